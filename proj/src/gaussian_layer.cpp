#include "concord/gaussian_layer.hpp"

#include "concord/errors.hpp"
#include "concord/model_core.hpp"

#include <cmath>

namespace concord {

namespace {

void check_sigma2(const Dataset& data, const Priors& priors, const Vector& sigma2) {
  priors.validate(data.n_instruments());
  if (sigma2.size() != data.n_instruments()) {
    throw ValidationError("sigma^2 must have one entry per instrument");
  }
  for (Eigen::Index i = 0; i < sigma2.size(); ++i) {
    if (!(sigma2[i] > 0.0) || !std::isfinite(sigma2[i])) {
      throw ValidationError("sigma^2 must be finite and positive");
    }
  }
}

[[noreturn]] void throw_singular() {
  throw IdentifiabilityError(
      "precision matrix of (B, G) is singular: B_i + d, G_j - d leave the likelihood unchanged, so "
      "at least one instrument needs a finite prior variance tau_i^2 (the condition number grows "
      "like 1 + 4 sum |J_i| sigma_i^-2 / sum tau_i^-2)");
}

Matrix assemble_precision(const Dataset& data, const Priors& priors, const Matrix& w) {
  const int N = data.n_instruments();
  const int M = data.n_sources();
  Matrix omega = Matrix::Zero(N + M, N + M);
  for (int i = 0; i < N; ++i) {
    double row = 1.0 / priors.tau2[i];
    for (int j : data.index().by_instrument[i]) {
      row += w(i, j);
      omega(i, N + j) = w(i, j);
      omega(N + j, i) = w(i, j);
      omega(N + j, N + j) += w(i, j);
    }
    omega(i, i) = row;
  }
  return omega;
}

Vector assemble_linear_term(const Dataset& data, const Priors& priors, const Matrix& w,
                            const Matrix& centered_y) {
  const int N = data.n_instruments();
  Vector gamma = Vector::Zero(N + data.n_sources());
  for (int i = 0; i < N; ++i) {
    double acc = std::isfinite(priors.tau2[i]) ? priors.b[i] / priors.tau2[i] : 0.0;
    for (int j : data.index().by_instrument[i]) {
      const double v = w(i, j) * centered_y(i, j);
      acc += v;
      gamma[N + j] += v;
    }
    gamma[i] = acc;
  }
  return gamma;
}

}  // namespace

Matrix lognormal_cell_precision(const Dataset& data, const Vector& sigma2) {
  Matrix w = Matrix::Zero(data.n_instruments(), data.n_sources());
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) w(i, j) = 1.0 / sigma2[i];
  }
  return w;
}

Matrix logt_cell_precision(const Dataset& data, const Matrix& xi, double kappa2) {
  Matrix w = Matrix::Zero(data.n_instruments(), data.n_sources());
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) w(i, j) = xi(i, j) / kappa2;
  }
  return w;
}

Matrix logt_centered_data(const Dataset& data, const Matrix& xi, double kappa2) {
  Matrix yc = data.log_data();
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) yc(i, j) += 0.5 * kappa2 / xi(i, j);
  }
  return yc;
}

Vector gamma_vector(const Dataset& data, const Priors& priors, const Vector& sigma2) {
  check_sigma2(data, priors, sigma2);
  return assemble_linear_term(data, priors, lognormal_cell_precision(data, sigma2),
                              adjusted_log_data(data, sigma2));
}

Matrix omega_matrix(const Dataset& data, const Priors& priors, const Vector& sigma2) {
  check_sigma2(data, priors, sigma2);
  return assemble_precision(data, priors, lognormal_cell_precision(data, sigma2));
}

Matrix omega_inverse_woodbury(const Dataset& data, const Priors& priors, const Vector& sigma2) {
  check_sigma2(data, priors, sigma2);
  if (!data.complete()) {
    throw ValidationError(
        "closed-form inverse needs every instrument to observe every source; use the dense path "
        "(conditional_mean_cov) for incomplete masks");
  }
  Matrix out;
  if (!detail::woodbury_inverse<double>(sigma2, priors.tau2, data.n_sources(), out)) throw_singular();
  return out;
}

GaussianConditional conditional_mean_cov(const Dataset& data, const Priors& priors, const Vector& sigma2) {
  check_sigma2(data, priors, sigma2);
  GaussianConditional out;
  out.precision = assemble_precision(data, priors, lognormal_cell_precision(data, sigma2));
  out.linear_term = gamma_vector(data, priors, sigma2);
  if (data.complete()) {
    if (!detail::woodbury_inverse<double>(sigma2, priors.tau2, data.n_sources(), out.covariance)) {
      throw_singular();
    }
    out.mean = out.covariance * out.linear_term;
    out.log_det_precision = detail::woodbury_log_det<double>(sigma2, priors.tau2, data.n_sources());
    if (!std::isfinite(out.log_det_precision)) throw_singular();
    return out;
  }
  Eigen::LLT<Matrix> llt(out.precision);
  if (llt.info() != Eigen::Success) throw_singular();
  const Matrix& L = llt.matrixLLT();
  const double min_diag = L.diagonal().minCoeff();
  if (!(min_diag > 1e-12 * L.diagonal().maxCoeff())) throw_singular();
  out.covariance = llt.solve(Matrix::Identity(out.precision.rows(), out.precision.cols()));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.mean = llt.solve(out.linear_term);
  out.log_det_precision = 2.0 * L.diagonal().array().log().sum();
  return out;
}

double marginal_sigma2_logdensity(const Vector& sigma2, const Dataset& data, const Priors& priors) {
  const auto cond = conditional_mean_cov(data, priors, sigma2);
  const Matrix& y = data.log_data();
  double total = -0.5 * cond.log_det_precision + 0.5 * cond.mean.dot(cond.linear_term);
  for (int i = 0; i < data.n_instruments(); ++i) {
    const auto& J = data.index().by_instrument[i];
    double sum_sq = 0.0;
    for (int j : J) sum_sq += y(i, j) * y(i, j);
    const double nJ = static_cast<double>(J.size());
    const double s = sigma2[i];
    total += -(nJ + 2.0 + 2.0 * priors.alpha) * 0.5 * std::log(s) - (sum_sq + 2.0 * priors.beta) / (2.0 * s) -
             nJ * s / 8.0;
  }
  return total;
}

GaussianFactor factor_conditional(const Dataset& data, const Priors& priors, const Matrix& cell_precision,
                                  const Matrix& centered_y) {
  GaussianFactor f;
  f.linear_term = assemble_linear_term(data, priors, cell_precision, centered_y);
  f.llt.compute(assemble_precision(data, priors, cell_precision));
  if (f.llt.info() != Eigen::Success) throw_singular();
  f.mean = f.llt.solve(f.linear_term);
  if (!f.mean.allFinite()) throw_singular();
  return f;
}

}  // namespace concord
