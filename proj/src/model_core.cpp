#include "concord/model_core.hpp"

#include "concord/errors.hpp"

#include <cmath>
#include <numbers>

namespace concord {

namespace {

constexpr double kPseudoCount = 0.5;
constexpr long kMaxPmfTerms = 50'000'000;

void check_state(const ParamState& state, const Dataset& data, const Priors& priors) {
  state.validate(data);
  priors.validate(data.n_instruments());
}

}  // namespace

ZeroAdjustment adjust_zero_counts(const Matrix& counts, const Mask& mask) {
  ZeroAdjustment out{counts, 0};
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (mask(i, j) && counts(i, j) == 0.0) {
        out.counts(i, j) = kPseudoCount;
        ++out.n_modified;
      }
    }
  }
  return out;
}

ZeroAdjustment adjust_zero_counts(const Matrix& counts) {
  return adjust_zero_counts(counts, Mask::Constant(counts.rows(), counts.cols(), true));
}

Dataset adjust_zero_counts(const Dataset& data, int* n_modified) {
  auto adjusted = adjust_zero_counts(data.counts(), data.mask());
  if (n_modified) *n_modified = adjusted.n_modified;
  if (adjusted.n_modified == 0) return data;
  return Dataset::from_counts(adjusted.counts, data.factors(), data.mask(), data.instrument_names(),
                              data.source_names());
}

ZeroModifiedMoments zero_modified_moments(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("zero-modified Poisson mean must be a finite non-negative number");
  }
  const double e = std::exp(-lambda);
  const double one_minus_e = -std::expm1(-lambda);
  return {lambda + 0.5 * e, lambda * one_minus_e + 0.25 * e * one_minus_e};
}

LogCountSd log_count_sd(double lambda, double tol) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("log_count_sd requires a finite positive lambda");
  }
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");

  const double log_lambda = std::log(lambda);
  auto log_pmf = [&](long k) {
    return static_cast<double>(k) * log_lambda - lambda - std::lgamma(static_cast<double>(k) + 1.0);
  };
  auto value = [](long k) { return k == 0 ? std::log(kPseudoCount) : std::log(static_cast<double>(k)); };
  auto contribution = [&](long k) {
    const double v = value(k);
    return std::exp(log_pmf(k)) * std::max(1.0, v * v);
  };

  const double half_width = 12.0 * std::sqrt(lambda);
  long lo = static_cast<long>(std::max(0.0, std::floor(lambda - half_width)));
  long hi = static_cast<long>(std::ceil(lambda + half_width));
  if (hi - lo > kMaxPmfTerms) {
    throw NumericalError("log_count_sd: tail summation does not converge for lambda this large");
  }
  while (lo > 0 && contribution(lo - 1) >= tol) {
    --lo;
    if (hi - lo > kMaxPmfTerms) throw NumericalError("log_count_sd: lower tail does not converge");
  }
  while (contribution(hi + 1) >= tol) {
    ++hi;
    if (hi - lo > kMaxPmfTerms) throw NumericalError("log_count_sd: upper tail does not converge");
  }

  double mass = 0.0;
  double first = 0.0;
  for (long k = lo; k <= hi; ++k) {
    const double p = std::exp(log_pmf(k));
    mass += p;
    first += p * value(k);
  }
  const double mean = first / mass;
  double second = 0.0;
  for (long k = lo; k <= hi; ++k) {
    const double d = value(k) - mean;
    second += std::exp(log_pmf(k)) * d * d;
  }

  const auto moments = zero_modified_moments(lambda);
  LogCountSd out;
  out.exact = std::sqrt(second / mass);
  out.delta_method = std::sqrt(moments.variance) / moments.mean;
  out.terms = static_cast<int>(hi - lo + 1);
  return out;
}

Matrix adjusted_log_data(const Dataset& data, const Vector& sigma2) {
  Matrix y = data.log_data();
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) y(i, j) += 0.5 * sigma2[i];
  }
  return y;
}

double log_joint_posterior(const ParamState& state, const Dataset& data, const Priors& priors) {
  check_state(state, data, priors);
  const Matrix& y = data.log_data();
  const auto& index = data.index();
  double total = 0.0;
  for (int i = 0; i < data.n_instruments(); ++i) {
    const double s = state.sigma2[i];
    const auto& J = index.by_instrument[i];
    double quad = 0.0;
    for (int j : J) {
      const double r = y(i, j) + 0.5 * s - state.B[i] - state.G[j];
      quad += r * r;
    }
    const double shape = static_cast<double>(J.size()) + 2.0 + 2.0 * priors.alpha;
    const double db = priors.b[i] - state.B[i];
    total += -shape * 0.5 * std::log(s) - 0.5 * quad / s - db * db / (2.0 * priors.tau2[i]) -
             priors.beta / s;
  }
  return total;
}

LogJointGradient log_joint_gradient(const ParamState& state, const Dataset& data, const Priors& priors) {
  check_state(state, data, priors);
  const Matrix& y = data.log_data();
  const auto& index = data.index();
  LogJointGradient g{Vector::Zero(data.n_instruments()), Vector::Zero(data.n_sources()),
                     Vector::Zero(data.n_instruments())};
  for (int i = 0; i < data.n_instruments(); ++i) {
    const double s = state.sigma2[i];
    const auto& J = index.by_instrument[i];
    double raw_sq = 0.0;
    for (int j : J) {
      const double raw = y(i, j) - state.B[i] - state.G[j];
      const double adj = (raw + 0.5 * s) / s;
      g.dB[i] += adj;
      g.dG[j] += adj;
      raw_sq += raw * raw;
    }
    g.dB[i] += (priors.b[i] - state.B[i]) / priors.tau2[i];
    const double nJ = static_cast<double>(J.size());
    const double shape = nJ + 2.0 + 2.0 * priors.alpha;
    g.dsigma2[i] = -shape / (2.0 * s) + (0.5 * raw_sq + priors.beta) / (s * s) - nJ / 8.0;
  }
  return g;
}

double log_joint_posterior_t(const ParamState& state, const Dataset& data, const Priors& priors) {
  check_state(state, data, priors);
  if (!state.xi) throw ValidationError("log-t density requires latent weights xi");
  const Matrix& y = data.log_data();
  const Matrix& xi = *state.xi;
  const double kappa2 = priors.kappa_value() * priors.kappa_value();
  const double nu = priors.nu_value();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const double chi2_const = -0.5 * nu * std::log(2.0) - std::lgamma(0.5 * nu);

  double total = 0.0;
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) {
      const double w = xi(i, j);
      const double var = kappa2 / w;
      const double r = y(i, j) - state.B[i] - state.G[j] + 0.5 * var;
      total += -0.5 * (log_2pi + std::log(var)) - 0.5 * r * r / var;
      total += (0.5 * nu - 1.0) * std::log(w) - 0.5 * w + chi2_const;
    }
    if (std::isfinite(priors.tau2[i])) {
      const double db = state.B[i] - priors.b[i];
      total += -0.5 * (log_2pi + std::log(priors.tau2[i])) - 0.5 * db * db / priors.tau2[i];
    }
  }
  return total;
}

LogJointGradientT log_joint_gradient_t(const ParamState& state, const Dataset& data, const Priors& priors) {
  check_state(state, data, priors);
  if (!state.xi) throw ValidationError("log-t gradient requires latent weights xi");
  const Matrix& y = data.log_data();
  const Matrix& xi = *state.xi;
  const double kappa2 = priors.kappa_value() * priors.kappa_value();
  const double nu = priors.nu_value();

  LogJointGradientT g{Vector::Zero(data.n_instruments()), Vector::Zero(data.n_sources()),
                      Matrix::Zero(data.n_instruments(), data.n_sources())};
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) {
      const double w = xi(i, j);
      const double raw = y(i, j) - state.B[i] - state.G[j];
      const double centered = raw + 0.5 * kappa2 / w;
      g.dB[i] += centered * w / kappa2;
      g.dG[j] += centered * w / kappa2;
      g.dxi(i, j) = 0.5 / w - raw * raw / (2.0 * kappa2) + kappa2 / (8.0 * w * w) +
                    (0.5 * nu - 1.0) / w - 0.5;
    }
    g.dB[i] += (priors.b[i] - state.B[i]) / priors.tau2[i];
  }
  return g;
}

}  // namespace concord
