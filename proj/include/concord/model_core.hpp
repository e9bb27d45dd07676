#pragma once

// Data transformations and log posterior densities of the log-Normal and
// log-t concordance models.
//
// Additive constants: log_joint_posterior returns exactly
//
//   sum_i -(|J_i| + 2 + 2 alpha) log sigma_i
//     - 1/2 sum_{i, j in J_i} (y_ij + sigma_i^2 / 2 - B_i - G_j)^2 / sigma_i^2
//     - sum_i [ (b_i - B_i)^2 / (2 tau_i^2) + beta / sigma_i^2 ]
//
// with no other terms, so values are comparable across calls and across
// datasets of the same shape. log_joint_posterior_t is the fully normalized
// log of the product of Normal, chi-square and Normal-prior densities (the
// flat prior on G contributes zero).

#include "concord/types.hpp"

namespace concord {

struct ZeroAdjustment {
  Matrix counts;
  int n_modified = 0;
};

/// Replaces exact-zero observed counts with the pseudo count 0.5.
ZeroAdjustment adjust_zero_counts(const Matrix& counts, const Mask& mask);
ZeroAdjustment adjust_zero_counts(const Matrix& counts);

/// Returns a copy of `data` with zero counts replaced; `n_modified` receives
/// the number of cells changed.
Dataset adjust_zero_counts(const Dataset& data, int* n_modified = nullptr);

struct ZeroModifiedMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of a Poisson(lambda) variable whose zeros are replaced
/// by 0.5.
ZeroModifiedMoments zero_modified_moments(double lambda);

struct LogCountSd {
  double exact = 0.0;         // sd of log(q~) by direct summation
  double delta_method = 0.0;  // sqrt(Var q~) / E q~
  int terms = 0;              // number of pmf terms summed
};

/// Standard deviation of log(q~) for the zero-modified Poisson(lambda).
/// Summation starts on [lambda - 12 sqrt(lambda), lambda + 12 sqrt(lambda)]
/// and grows outward until a term contributes less than `tol`.
LogCountSd log_count_sd(double lambda, double tol = 1e-12);

/// y'_ij = y_ij + sigma_i^2 / 2 on observed cells (NaN elsewhere).
Matrix adjusted_log_data(const Dataset& data, const Vector& sigma2);

double log_joint_posterior(const ParamState& state, const Dataset& data, const Priors& priors);

/// Gradient of log_joint_posterior with respect to B, G and sigma^2.
struct LogJointGradient {
  Vector dB;
  Vector dG;
  Vector dsigma2;
};
LogJointGradient log_joint_gradient(const ParamState& state, const Dataset& data, const Priors& priors);

/// Log density of {B, G, xi} under the log-t model:
///   y_ij | B, G, xi ~ N(B_i + G_j - kappa^2 / (2 xi_ij), kappa^2 / xi_ij),
///   xi_ij ~ chi^2_nu,  B_i ~ N(b_i, tau_i^2),  G flat.
double log_joint_posterior_t(const ParamState& state, const Dataset& data, const Priors& priors);

struct LogJointGradientT {
  Vector dB;
  Vector dG;
  Matrix dxi;  // N x M, zero on unobserved cells
};
LogJointGradientT log_joint_gradient_t(const ParamState& state, const Dataset& data, const Priors& priors);

}  // namespace concord
