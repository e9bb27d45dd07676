#pragma once

#include "concord/map_solver.hpp"
#include "concord/samplers.hpp"
#include "concord/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace concord {

struct ResidualTable {
  Matrix values;  // NaN on unobserved cells
  ModelKind model = ModelKind::lognormal;
  double threshold = 3.0;
  Mask flags;     // |value| > threshold
  int n_flagged() const { return static_cast<int>(flags.count()); }
};

/// Standardized residuals at point estimates (normally posterior means):
///   log-Normal: (y_ij - B_i - G_j + sigma_i^2 / 2) / sigma_i
///   log-t:      (y_ij - B_i - G_j + kappa^2 / (2 xi_ij)) / (kappa / sqrt(xi_ij))
/// The flag threshold defaults to 3 for log-Normal and 2 for log-t.
ResidualTable standardized_residuals(const ParamState& estimates, const Dataset& data, const Priors& priors,
                                     ModelKind model, double threshold = 0.0);

struct PpcResult {
  Vector T_obs;        // ybar_i. - ybar
  Vector p_upper;      // P(T_rep >= T_obs)
  Vector p_two_sided;  // min(1, 2 min(p, 1 - p))
};

/// Posterior predictive check of T_i = ybar_i. - ybar (means over observed
/// cells). Each draw gets its own random stream derived from `seed`, so the
/// result is deterministic and independent of thread count. Log-t draws
/// replicate with the drawn xi.
PpcResult posterior_predictive_pvalue(const PosteriorDraws& draws, const Dataset& data, const Priors& priors,
                                      std::uint64_t seed);

enum class VarianceMode { known, estimated };

struct GofResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  VarianceMode variance_mode = VarianceMode::known;
  bool approximate = false;  // true when variances were estimated
};

/// T = sum_i (b_i - B_i)^2 / tau_i^2 + sum_{observed} (y'_ij - B_i - G_j)^2 / sigma_i^2
/// against chi^2_df with df = (#observed cells + #finite tau) - N - M for known
/// variances (NM - M for a complete mask) and N fewer when estimated.
GofResult gof_chi2(const Vector& B_hat, const Vector& G_hat, const Dataset& data, const Priors& priors,
                   const Vector& sigma2, VarianceMode mode);

Vector prior_influence(const ShrinkageReport& report);
/// From draws: 1 - W_i evaluated at the posterior mean of sigma^2.
Vector prior_influence(const PosteriorDraws& draws, const Dataset& data, const Priors& priors);

struct MleVariances {
  Vector varB;
  Vector varG;
  Matrix covBG;  // N x M
};

/// Asymptotic covariance pieces of the known-variance MLE for a complete
/// N x M design, via the inflation factors
///   S_G = 1 + sum sigma^-2 W / sum tau^-2 W,  S_B^(i) = 1 + M sigma_i^-2 W_i / sum tau^-2 W.
MleVariances mle_asymptotic_variances(const Vector& sigma2, const Vector& tau2, int N, int M);

/// 1 + 4 sum_i |J_i| sigma_i^-2 / sum_i tau_i^-2; a lower bound on the
/// condition number of Omega.
double condition_number_bound(const Vector& sigma2, const Vector& tau2, const IndexVector& J_sizes);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
  double rhat = 0.0;
};

/// Posterior mean, sd and equal-tailed 95% interval of every monitored
/// parameter.
std::vector<ParameterSummary> summarize(const PosteriorDraws& draws);

/// Same summaries for the adjusted effective areas A_i = e^{B_i}.
std::vector<ParameterSummary> summarize_areas(const PosteriorDraws& draws);

}  // namespace concord
