#pragma once

#include "concord/gaussian_layer.hpp"
#include "concord/random.hpp"
#include "concord/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace concord {

/// gibbs: one-at-a-time B, G draws plus random-walk MH on log sigma^2.
/// block_gibbs: joint (B, G) draw plus the same sigma^2 move.
/// marginal: independence MH on sigma^2 against its marginal, then a block
/// (B, G) draw. hmc / hmc_t: leapfrog HMC on the log-Normal / log-t joint
/// posterior. gibbs_t: log-t model with a block (B, G) | xi draw and exact
/// xi | (B, G) draws.
enum class Algorithm { gibbs, block_gibbs, marginal, hmc, hmc_t, gibbs_t };
enum class ModelKind { lognormal, logt };
enum class XiUpdate { gig, mh };

ModelKind model_of(Algorithm algorithm);
std::string to_string(Algorithm algorithm);
std::string to_string(ModelKind model);
/// Accepts both "block-gibbs" and "block_gibbs" spellings.
Algorithm parse_algorithm(const std::string& name);
ModelKind parse_model(const std::string& name);

struct ChainConfig {
  int n_samples = 1000;
  int n_warmup = 500;
  int n_chains = 4;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::block_gibbs;
  double step_size = 0.1;      // initial HMC step size
  int n_leapfrog = 32;
  std::optional<Vector> mass;  // initial diagonal mass; identity when absent
  bool adapt = true;           // dual averaging and mass adaptation in warmup
  double target_accept = 0.8;
  double mh_scale = 0.3;       // sd of the log sigma^2 random walk
  XiUpdate xi_update = XiUpdate::gig;
  int xi_mh_steps = 5;         // inner MH steps per cell when xi_update = mh
  int thin = 1;

  void validate() const;
};

/// Draws from all chains, chain-major. Log-t states carry sigma2 = kappa^2
/// for every instrument so they stay valid ParamStates.
///
/// The monitored parameters are B_1..B_N, G_1..G_M and, for the log-Normal
/// model, sigma^2_1..sigma^2_N; `ess` and `rhat` follow that order.
struct PosteriorDraws {
  ModelKind model = ModelKind::lognormal;
  Algorithm algorithm = Algorithm::block_gibbs;
  int n_chains = 0;
  int n_samples = 0;
  std::vector<ParamState> states;
  std::vector<int> chain_id;
  std::map<std::string, double> acceptance_rates;
  std::vector<std::string> parameter_names;
  Vector ess;
  Vector rhat;
  int divergences = 0;
  std::vector<double> step_sizes;  // final HMC step size per chain
  std::vector<std::string> warnings;

  std::size_t size() const { return states.size(); }
  int n_parameters() const { return static_cast<int>(parameter_names.size()); }
  /// Value of monitored parameter k in draw d.
  double value(std::size_t d, int k) const;
  std::vector<double> trace(int k) const;
  std::vector<std::vector<double>> chains(int k) const;
  /// Posterior means; sigma2 holds the square of the posterior-mean sigma and
  /// xi (log-t) the posterior-mean weights.
  ParamState posterior_mean() const;
  /// Fills parameter_names, ess, rhat and convergence warnings.
  void compute_diagnostics(int n_instruments, int n_sources);
};

// ---- single-site kernels (log-Normal model) ----

void gibbs_step_B(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng);
void gibbs_step_G(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng);

/// Log target of sigma_i^2 given the rest, in terms of s = sigma_i^2 and
/// rss = sum_j (y_ij - B_i - G_j)^2. Tests swap in modified targets.
using Sigma2LogTarget = std::function<double(int i, double s, double rss, int J_size)>;

/// -(|J| + 2 + 2 alpha) / 2 log s - (rss + 2 beta) / (2 s) - |J| s / 8.
Sigma2LogTarget default_sigma2_target(const Priors& priors);

/// Random-walk MH on each log sigma_i^2 (Jacobian included). Returns the
/// number of accepted moves.
int gibbs_step_sigma2(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng, double mh_scale,
                      const Sigma2LogTarget& target = {});

/// theta ~ N(mu, Omega^{-1}) from a precision factor: theta = mu + L^{-T} z.
Vector draw_gaussian(const GaussianFactor& factor, Rng& rng);

/// Joint draw of (B, G) | sigma^2.
void block_gibbs_step(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng);

/// Shapes alpha + (|J_i| - sum_{j in J_i} 1 / |I_j|) / 2 of the product
/// inverse-Gamma proposal used by the independence sampler.
Vector independence_proposal_shapes(const Dataset& data, const Priors& priors);

using Sigma2VectorLogTarget = std::function<double(const Vector& sigma2)>;

/// Independence MH on the whole sigma^2 vector with the product
/// Inv-Gamma(shape_i, beta) proposal, targeting the marginal density of
/// sigma^2 (or `target` when given). Returns whether the move was accepted.
bool mh_sigma2_independence(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng,
                            const Sigma2VectorLogTarget& target = {});

// ---- log-t kernels ----

struct XiStepOptions {
  XiUpdate method = XiUpdate::gig;
  int mh_steps = 5;
  double mh_scale = 1.0;
  bool bias_term = true;  // false drops the kappa^2 / (8 xi) factor
};

/// Draws every observed xi_ij from its GIG((nu + 1) / 2, 1 + r^2 / kappa^2,
/// kappa^2 / 4) full conditional, r = y_ij - B_i - G_j. Returns the number of
/// accepted MH moves (0 for exact draws).
int logt_xi_step(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng,
                 const XiStepOptions& options = {});

/// Joint draw of (B, G) | xi under the log-t model.
void logt_block_step(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng);

// ---- chains ----

/// Jittered starting point: B = b + U(-0.1, 0.1), G_j = mean over I_j of
/// y_ij - b_i, sigma^2 = beta / alpha, xi = nu (log-t only).
ParamState initial_state(const Dataset& data, const Priors& priors, ModelKind model, Rng& rng);

/// Runs config.n_chains independent chains (in parallel) of the configured
/// algorithm and merges them by chain index. When `init` is given every chain
/// starts from it instead of a jittered point.
PosteriorDraws run_chain(const ChainConfig& config, const Dataset& data, const Priors& priors,
                         const std::optional<ParamState>& init = std::nullopt);

/// run_chain restricted to the HMC algorithms.
PosteriorDraws hmc_sample(const ChainConfig& config, const Dataset& data, const Priors& priors,
                          const std::optional<ParamState>& init = std::nullopt);

}  // namespace concord
