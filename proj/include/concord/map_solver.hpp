#pragma once

#include "concord/types.hpp"

namespace concord {

/// Shrinkage summary of a MAP fit. W_i is the share of the posterior
/// precision of B_i that comes from the data; S2 is the per-instrument
/// residual scale and R = sigma2 / S2 the variance-shrinkage factor.
struct ShrinkageReport {
  Vector W;
  Vector prior_influence;  // 1 - W
  Vector S2;
  Vector R;
};

/// How the sigma^2 half of the alternating MAP solver is updated.
///
/// `exact` solves d/d sigma_i^2 of the log joint posterior = 0, i.e. the
/// positive root of |J| s^2 + 4 (|J| + 2 + 2 alpha) s - 4 (sum r^2 + 2 beta);
/// its fixed point is a stationary point of the posterior.
///
/// `closed_form` uses s = 2 (sqrt(1 + S^2) - 1) with
/// S^2 = (sum r^2 + beta) / (|J| + alpha). It shrinks S^2 the same way but its
/// fixed point is not exactly the posterior mode.
enum class VarianceRule { exact, closed_form };

/// W_i = |J_i| sigma_i^-2 / (tau_i^-2 + |J_i| sigma_i^-2); 0 when |J_i| = 0.
Vector shrinkage_weights(const Vector& sigma2, const Vector& tau2, const IndexVector& J_sizes);

struct BGEstimate {
  Vector B;
  Vector G;
};

/// MAP of (B, G) at known sigma^2. G is eliminated source by source
/// (G_j = precision-weighted mean of y'_ij - B_i over I_j), leaving an N x N
/// system in B built from the shrinkage equations.
BGEstimate solve_map_known_variance(const Dataset& data, const Priors& priors, const Vector& sigma2);

/// Closed-form variance update: S^2 = (residuals_sq_sum + beta) / (J + alpha),
/// returns 2 (sqrt(1 + S^2) - 1).
double variance_map_update(double residuals_sq_sum, int J_size, double alpha, double beta);

/// Stationary point of the log joint posterior in sigma_i^2 with (B, G) fixed.
double variance_map_update_exact(double residuals_sq_sum, int J_size, double alpha, double beta);

/// Smallest sigma^2 either rule can return when every instrument observes
/// at most `n_sources` sources. For the closed form this is
/// 2 sqrt(1 + beta / (M + alpha)) - 2.
double variance_lower_bound(int n_sources, double alpha, double beta, VarianceRule rule);

struct MapOptions {
  int max_iter = 500;
  double tol = 1e-10;
  VarianceRule rule = VarianceRule::exact;
};

struct MapResult {
  ParamState state;
  ShrinkageReport shrinkage;
  bool converged = false;
  int iterations = 0;
  double last_change = 0.0;
};

/// B = b, G_j = mean over I_j of (y_ij - b_i), sigma^2 = beta / alpha.
ParamState default_map_init(const Dataset& data, const Priors& priors);

/// Block-coordinate ascent: exact (B, G) solve at the current variances, then
/// all sigma_i^2 updated at once from the raw residuals y_ij - B_i - G_j.
/// Stops when the max-abs change over (B, G, sigma^2) drops below tol.
/// Non-convergence is reported through `converged`, with the last iterate.
/// The joint posterior can be multimodal on data far from the model; the
/// result is then the local mode reached from `init`.
MapResult solve_map_joint(const Dataset& data, const Priors& priors, const ParamState& init,
                          const MapOptions& options = {});
MapResult solve_map_joint(const Dataset& data, const Priors& priors, const MapOptions& options = {});

ShrinkageReport shrinkage_report(const Dataset& data, const Priors& priors, const ParamState& state,
                                 VarianceRule rule);

/// A_i^ = a_i^(1 - W) [ (c~ / f~) e^{sigma^2 / 2} ]^W with c~, f~ the geometric
/// means of the counts and fluxes over J_i.
double power_shrinkage_area(double a_i, double W_i, double geo_mean_counts, double geo_mean_fluxes,
                            double sigma2_i);

}  // namespace concord
