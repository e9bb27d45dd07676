#pragma once

// Gaussian structure of theta = (B_1..B_N, G_1..G_M) given the variances.
//
// For fixed sigma^2 the log joint posterior is quadratic in theta, so
// theta | sigma^2 ~ N(Omega^{-1} gamma, Omega^{-1}). Omega has the block form
//
//   [ diag(sum_j w_ij + tau_i^{-2})   W             ]
//   [ W^T                             diag(sum_i w_ij) ]
//
// where w_ij is the precision of cell (i, j): sigma_i^{-2} for the log-Normal
// model and xi_ij / kappa^2 for the log-t model conditional on xi.

#include "concord/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace concord {

struct GaussianConditional {
  Vector mean;         // mu = Omega^{-1} gamma
  Matrix covariance;   // Sigma = Omega^{-1}
  Matrix precision;    // Omega
  Vector linear_term;  // gamma
  double log_det_precision = 0.0;
};

Vector gamma_vector(const Dataset& data, const Priors& priors, const Vector& sigma2);
Matrix omega_matrix(const Dataset& data, const Priors& priors, const Vector& sigma2);

/// Closed-form Omega^{-1} for complete masks (every instrument observes every
/// source). Throws ValidationError with a pointer to the dense path otherwise.
Matrix omega_inverse_woodbury(const Dataset& data, const Priors& priors, const Vector& sigma2);

/// Mean and covariance of theta | sigma^2. Complete masks use the closed
/// form; anything else goes through a Cholesky factorization of Omega.
GaussianConditional conditional_mean_cov(const Dataset& data, const Priors& priors, const Vector& sigma2);

/// Log marginal posterior density of sigma^2 with theta integrated out, up to
/// a constant that depends only on the data and priors:
///
///   sum_i -(|J_i| + 2 + 2 alpha) log sigma_i - 1/2 log|Omega| + 1/2 mu^T Omega mu
///     - sum_i [ (sum_j y_ij^2 + 2 beta) / (2 sigma_i^2) + |J_i| sigma_i^2 / 8 ]
///
/// The dropped constant is C = sum_ij y_ij / 2 + sum_i b_i^2 / (2 tau_i^2)
/// - (N + M) / 2 log(2 pi): this function minus C is exactly
/// log_joint_posterior(theta = 0) - log N(0; mu, Sigma).
double marginal_sigma2_logdensity(const Vector& sigma2, const Dataset& data, const Priors& priors);

/// Precision-factored form of theta | (cell weights), used by the samplers.
/// `cell_precision` is N x M (ignored off the mask); `centered_y` holds the
/// bias-corrected data the Gaussian is centred on.
struct GaussianFactor {
  Eigen::LLT<Matrix> llt;  // Omega = L L^T
  Vector mean;
  Vector linear_term;
};
GaussianFactor factor_conditional(const Dataset& data, const Priors& priors, const Matrix& cell_precision,
                                  const Matrix& centered_y);

/// Cell precisions and centred data for the log-Normal model.
Matrix lognormal_cell_precision(const Dataset& data, const Vector& sigma2);
/// Cell precisions xi_ij / kappa^2 and centred data y_ij + kappa^2 / (2 xi_ij)
/// for the log-t model.
Matrix logt_cell_precision(const Dataset& data, const Matrix& xi, double kappa2);
Matrix logt_centered_data(const Dataset& data, const Matrix& xi, double kappa2);

namespace detail {

/// Closed-form inverse of the complete-mask Omega. Only depends on the
/// variances and the number of sources. Returns false when the weighted prior
/// precision sum is zero (no proper prior anywhere).
template <typename Scalar>
bool woodbury_inverse(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& sigma2,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& tau2, int n_sources,
                      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& out) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index N = sigma2.size();
  const Eigen::Index M = n_sources;
  const Vec inv_s = sigma2.cwiseInverse();
  const Vec inv_t = tau2.cwiseInverse();
  const Vec data_prec = Scalar(M) * inv_s;
  const Vec W = data_prec.cwiseQuotient(data_prec + inv_t);
  const Scalar prior_weight = inv_t.dot(W);  // sum_u tau_u^{-2} W_u
  if (!(prior_weight > Scalar(0))) return false;
  const Scalar total_inv_s = inv_s.sum();
  const Scalar data_weight = inv_s.dot(W);  // sum_i W_i sigma_i^{-2}

  out.resize(N + M, N + M);
  // B block: diag((M sigma^-2 + tau^-2)^-1) + W W^T / sum tau^-2 W
  out.topLeftCorner(N, N) = (W * W.transpose()) / prior_weight;
  out.topLeftCorner(N, N).diagonal() += (data_prec + inv_t).cwiseInverse();
  // cross block
  out.topRightCorner(N, M) = (-W / prior_weight).replicate(1, M);
  out.bottomLeftCorner(M, N) = out.topRightCorner(N, M).transpose();
  // G block: (sum sigma^-2)^-1 [ I + (sum W sigma^-2 / sum W tau^-2) 1 1^T ]
  out.bottomRightCorner(M, M).setConstant(data_weight / (prior_weight * total_inv_s));
  out.bottomRightCorner(M, M).diagonal().array() += Scalar(1) / total_inv_s;
  return true;
}

/// log|Omega| for the complete mask via the matrix determinant lemma:
/// |Omega| = |A| sum_u tau_u^{-2} W_u / (M sum_u sigma_u^{-2}), A = diag(Omega).
template <typename Scalar>
Scalar woodbury_log_det(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& sigma2,
                        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& tau2, int n_sources) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using std::log;
  const Scalar M = Scalar(n_sources);
  const Vec inv_s = sigma2.cwiseInverse();
  const Vec inv_t = tau2.cwiseInverse();
  const Vec data_prec = M * inv_s;
  const Vec W = data_prec.cwiseQuotient(data_prec + inv_t);
  const Scalar total_inv_s = inv_s.sum();
  Scalar log_det = (data_prec + inv_t).array().log().sum() + M * log(total_inv_s);
  log_det += log(inv_t.dot(W)) - log(M * total_inv_s);
  return log_det;
}

}  // namespace detail
}  // namespace concord
