#include "concord/types.hpp"

#include "concord/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace concord {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ObservationIndex ObservationIndex::from_mask(const Mask& mask) {
  ObservationIndex index;
  index.by_instrument.resize(mask.rows());
  index.by_source.resize(mask.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      if (mask(i, j)) {
        index.by_instrument[i].push_back(static_cast<int>(j));
        index.by_source[j].push_back(static_cast<int>(i));
      }
    }
  }
  return index;
}

IndexVector ObservationIndex::instrument_counts() const {
  IndexVector out(by_instrument.size());
  for (std::size_t i = 0; i < by_instrument.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = static_cast<int>(by_instrument[i].size());
  }
  return out;
}

IndexVector ObservationIndex::source_counts() const {
  IndexVector out(by_source.size());
  for (std::size_t j = 0; j < by_source.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = static_cast<int>(by_source[j].size());
  }
  return out;
}

int ObservationIndex::n_observed() const {
  int n = 0;
  for (const auto& row : by_instrument) n += static_cast<int>(row.size());
  return n;
}

Dataset Dataset::from_counts(const Matrix& counts, const Matrix& factors, const Mask& mask,
                             std::vector<std::string> instrument_names,
                             std::vector<std::string> source_names) {
  if (counts.rows() == 0 || counts.cols() == 0) {
    throw ValidationError("dataset must have at least one instrument and one source");
  }
  if (factors.rows() != counts.rows() || factors.cols() != counts.cols() ||
      mask.rows() != counts.rows() || mask.cols() != counts.cols()) {
    throw ValidationError("counts, factors and mask must have identical shapes");
  }
  Dataset d;
  d.counts_ = Matrix::Constant(counts.rows(), counts.cols(), kNaN);
  d.factors_ = Matrix::Constant(counts.rows(), counts.cols(), kNaN);
  d.mask_ = mask;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double c = counts(i, j);
      const double t = factors(i, j);
      if (!std::isfinite(c) || c < 0.0) {
        std::ostringstream os;
        os << "count at (instrument " << i + 1 << ", source " << j + 1
           << ") must be a finite non-negative number";
        throw ValidationError(os.str());
      }
      if (!std::isfinite(t) || t <= 0.0) {
        std::ostringstream os;
        os << "factor at (instrument " << i + 1 << ", source " << j + 1
           << ") must be a finite positive number";
        throw ValidationError(os.str());
      }
      d.counts_(i, j) = c;
      d.factors_(i, j) = t;
    }
  }
  d.y_ = Matrix::Constant(counts.rows(), counts.cols(), kNaN);
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (!mask(i, j)) continue;
      if (d.counts_(i, j) == 0.0) {
        ++d.zero_cells_;
      } else {
        d.y_(i, j) = std::log(d.counts_(i, j)) - std::log(d.factors_(i, j));
      }
    }
  }
  d.finish(std::move(instrument_names), std::move(source_names));
  return d;
}

Dataset Dataset::from_counts(const Matrix& counts) {
  return from_counts(counts, Matrix::Ones(counts.rows(), counts.cols()),
                     Mask::Constant(counts.rows(), counts.cols(), true));
}

Dataset Dataset::from_log_data(const Matrix& y, const Mask& mask) {
  if (y.rows() != mask.rows() || y.cols() != mask.cols()) {
    throw ValidationError("log data and mask must have identical shapes");
  }
  Matrix counts = Matrix::Constant(y.rows(), y.cols(), kNaN);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (!mask(i, j)) continue;
      if (!std::isfinite(y(i, j))) throw ValidationError("log data must be finite on observed cells");
      counts(i, j) = std::exp(y(i, j));
    }
  }
  Dataset d = from_counts(counts.unaryExpr([](double v) { return std::isnan(v) ? 1.0 : v; }),
                          Matrix::Ones(y.rows(), y.cols()), mask);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (mask(i, j)) d.y_(i, j) = y(i, j);
    }
  }
  d.zero_cells_ = 0;
  return d;
}

Dataset Dataset::from_log_data(const Matrix& y) {
  return from_log_data(y, Mask::Constant(y.rows(), y.cols(), true));
}

const Matrix& Dataset::log_data() const {
  if (zero_cells_ > 0) {
    throw ValidationError("dataset contains zero counts; apply adjust_zero_counts before taking logs");
  }
  return y_;
}

void Dataset::finish(std::vector<std::string> instrument_names, std::vector<std::string> source_names) {
  index_ = ObservationIndex::from_mask(mask_);
  for (std::size_t j = 0; j < index_.by_source.size(); ++j) {
    if (index_.by_source[j].empty()) {
      std::ostringstream os;
      os << "source " << j + 1
         << " is not observed by any instrument; the posterior is proper only when every "
            "source is measured by at least one instrument";
      throw ValidationError(os.str());
    }
  }
  if (instrument_names.empty()) {
    for (int i = 0; i < n_instruments(); ++i) instrument_names.push_back("instrument_" + std::to_string(i + 1));
  }
  if (source_names.empty()) {
    for (int j = 0; j < n_sources(); ++j) source_names.push_back("source_" + std::to_string(j + 1));
  }
  if (static_cast<int>(instrument_names.size()) != n_instruments() ||
      static_cast<int>(source_names.size()) != n_sources()) {
    throw ValidationError("name lists do not match the dataset shape");
  }
  instrument_names_ = std::move(instrument_names);
  source_names_ = std::move(source_names);
}

Priors Priors::uniform(int n_instruments, double b, double tau, double alpha, double beta) {
  Priors p;
  p.b = Vector::Constant(n_instruments, b);
  p.tau2 = Vector::Constant(n_instruments, tau * tau);
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

void Priors::validate(int n_instruments) const {
  if (b.size() != n_instruments || tau2.size() != n_instruments) {
    throw ValidationError("prior vectors b and tau2 must have one entry per instrument");
  }
  if (!b.allFinite()) throw ValidationError("prior means b must be finite");
  for (Eigen::Index i = 0; i < tau2.size(); ++i) {
    if (!(tau2[i] > 0.0)) throw ValidationError("prior variances tau^2 must be positive");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be positive");
  if (kappa && !(*kappa > 0.0)) throw ValidationError("kappa must be positive");
  if (nu && !(*nu > 0.0)) throw ValidationError("nu must be positive");
}

double Priors::kappa_value() const { return kappa.value_or(std::sqrt(2.0 * beta)); }
double Priors::nu_value() const { return nu.value_or(2.0 * alpha); }

void ParamState::validate(const Dataset& data) const {
  if (B.size() != data.n_instruments() || sigma2.size() != data.n_instruments() ||
      G.size() != data.n_sources()) {
    throw ValidationError("parameter state dimensions do not match the dataset");
  }
  for (Eigen::Index i = 0; i < sigma2.size(); ++i) {
    if (!(sigma2[i] > 0.0)) throw ValidationError("sigma^2 must be positive");
  }
  if (xi) {
    if (xi->rows() != data.n_instruments() || xi->cols() != data.n_sources()) {
      throw ValidationError("xi must be N x M");
    }
    for (int i = 0; i < data.n_instruments(); ++i) {
      for (int j : data.index().by_instrument[i]) {
        if (!((*xi)(i, j) > 0.0)) throw ValidationError("latent weights xi must be positive");
      }
    }
  }
}

}  // namespace concord
