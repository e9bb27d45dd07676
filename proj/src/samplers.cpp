#include "concord/samplers.hpp"

#include "concord/errors.hpp"
#include "concord/gig.hpp"
#include "concord/hmc.hpp"
#include "concord/mcmc_stats.hpp"
#include "concord/model_core.hpp"
#include "concord/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace concord {

ModelKind model_of(Algorithm algorithm) {
  return (algorithm == Algorithm::hmc_t || algorithm == Algorithm::gibbs_t) ? ModelKind::logt
                                                                             : ModelKind::lognormal;
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::gibbs: return "gibbs";
    case Algorithm::block_gibbs: return "block-gibbs";
    case Algorithm::marginal: return "marginal";
    case Algorithm::hmc: return "hmc";
    case Algorithm::hmc_t: return "hmc-t";
    case Algorithm::gibbs_t: return "gibbs-t";
  }
  return "unknown";
}

std::string to_string(ModelKind model) { return model == ModelKind::logt ? "logt" : "lognormal"; }

Algorithm parse_algorithm(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  if (s == "gibbs") return Algorithm::gibbs;
  if (s == "block-gibbs") return Algorithm::block_gibbs;
  if (s == "marginal") return Algorithm::marginal;
  if (s == "hmc") return Algorithm::hmc;
  if (s == "hmc-t") return Algorithm::hmc_t;
  if (s == "gibbs-t") return Algorithm::gibbs_t;
  throw ValidationError("unknown algorithm '" + name + "'");
}

ModelKind parse_model(const std::string& name) {
  if (name == "lognormal" || name == "log-normal") return ModelKind::lognormal;
  if (name == "logt" || name == "log-t") return ModelKind::logt;
  throw ValidationError("unknown model '" + name + "'");
}

void ChainConfig::validate() const {
  if (n_samples < 1) throw ValidationError("n_samples must be positive");
  if (n_warmup < 0) throw ValidationError("n_warmup must be non-negative");
  if (n_chains < 1) throw ValidationError("n_chains must be positive");
  if (!(step_size > 0.0)) throw ValidationError("step size must be positive");
  if (n_leapfrog < 1) throw ValidationError("n_leapfrog must be positive");
  if (!(mh_scale > 0.0)) throw ValidationError("mh_scale must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ValidationError("target acceptance must lie in (0, 1)");
  if (xi_mh_steps < 1) throw ValidationError("xi_mh_steps must be positive");
  if (thin < 1) throw ValidationError("thin must be positive");
  if (mass && !(mass->array() > 0.0).all()) throw ValidationError("mass entries must be positive");
}

// ---- PosteriorDraws ----

double PosteriorDraws::value(std::size_t d, int k) const {
  const ParamState& s = states[d];
  const int N = static_cast<int>(s.B.size());
  const int M = static_cast<int>(s.G.size());
  if (k < N) return s.B[k];
  if (k < N + M) return s.G[k - N];
  return s.sigma2[k - N - M];
}

std::vector<double> PosteriorDraws::trace(int k) const {
  std::vector<double> out(states.size());
  for (std::size_t d = 0; d < states.size(); ++d) out[d] = value(d, k);
  return out;
}

std::vector<std::vector<double>> PosteriorDraws::chains(int k) const {
  std::vector<std::vector<double>> out(n_chains);
  for (std::size_t d = 0; d < states.size(); ++d) out[chain_id[d]].push_back(value(d, k));
  return out;
}

ParamState PosteriorDraws::posterior_mean() const {
  if (states.empty()) throw ValidationError("no posterior draws");
  const ParamState& first = states.front();
  ParamState m;
  m.B = Vector::Zero(first.B.size());
  m.G = Vector::Zero(first.G.size());
  Vector sigma = Vector::Zero(first.sigma2.size());
  Matrix xi;
  if (first.xi) xi = Matrix::Zero(first.xi->rows(), first.xi->cols());
  for (const auto& s : states) {
    m.B += s.B;
    m.G += s.G;
    sigma += s.sigma2.cwiseSqrt();
    if (first.xi) xi += *s.xi;
  }
  const double n = static_cast<double>(states.size());
  m.B /= n;
  m.G /= n;
  m.sigma2 = (sigma / n).cwiseAbs2();
  if (first.xi) m.xi = xi / n;
  return m;
}

void PosteriorDraws::compute_diagnostics(int n_instruments, int n_sources) {
  parameter_names.clear();
  for (int i = 0; i < n_instruments; ++i) parameter_names.push_back("B[" + std::to_string(i + 1) + "]");
  for (int j = 0; j < n_sources; ++j) parameter_names.push_back("G[" + std::to_string(j + 1) + "]");
  if (model == ModelKind::lognormal) {
    for (int i = 0; i < n_instruments; ++i) parameter_names.push_back("sigma2[" + std::to_string(i + 1) + "]");
  }
  const int P = n_parameters();
  ess = Vector::Constant(P, std::numeric_limits<double>::quiet_NaN());
  rhat = Vector::Constant(P, std::numeric_limits<double>::quiet_NaN());
  if (n_samples < 4) return;
  int flagged = 0;
  for (int k = 0; k < P; ++k) {
    const auto c = chains(k);
    ess[k] = effective_sample_size(c);
    rhat[k] = split_rhat(c);
    if (rhat[k] > 1.1) ++flagged;
  }
  if (flagged > 0) {
    std::ostringstream msg;
    msg << flagged << " parameter(s) have split R-hat above 1.1; the chains may not have converged";
    warnings.push_back(msg.str());
  }
}

// ---- log-Normal kernels ----

void gibbs_step_B(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng) {
  const Matrix& y = data.log_data();
  for (int i = 0; i < data.n_instruments(); ++i) {
    const double s = state.sigma2[i];
    const auto& J = data.index().by_instrument[i];
    const double prior_prec = 1.0 / priors.tau2[i];
    const double prec = prior_prec + static_cast<double>(J.size()) / s;
    if (!(prec > 0.0)) throw IdentifiabilityError("B_i has neither data nor a proper prior");
    double lin = std::isfinite(priors.tau2[i]) ? priors.b[i] * prior_prec : 0.0;
    for (int j : J) lin += (y(i, j) + 0.5 * s - state.G[j]) / s;
    if (!std::isfinite(prior_prec)) {
      state.B[i] = priors.b[i];  // tau = 0 pins B_i
      continue;
    }
    state.B[i] = lin / prec + std_normal(rng) / std::sqrt(prec);
  }
}

void gibbs_step_G(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng) {
  (void)priors;
  const Matrix& y = data.log_data();
  for (int j = 0; j < data.n_sources(); ++j) {
    double prec = 0.0, lin = 0.0;
    for (int i : data.index().by_source[j]) {
      const double s = state.sigma2[i];
      prec += 1.0 / s;
      lin += (y(i, j) + 0.5 * s - state.B[i]) / s;
    }
    if (!(prec > 0.0)) throw ValidationError("every source must be observed by at least one instrument");
    state.G[j] = lin / prec + std_normal(rng) / std::sqrt(prec);
  }
}

Sigma2LogTarget default_sigma2_target(const Priors& priors) {
  const double alpha = priors.alpha;
  const double beta = priors.beta;
  return [alpha, beta](int, double s, double rss, int J_size) {
    const double nJ = static_cast<double>(J_size);
    return -0.5 * (nJ + 2.0 + 2.0 * alpha) * std::log(s) - (rss + 2.0 * beta) / (2.0 * s) - nJ * s / 8.0;
  };
}

int gibbs_step_sigma2(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng, double mh_scale,
                      const Sigma2LogTarget& target) {
  const Sigma2LogTarget& f = target ? target : default_sigma2_target(priors);
  const Matrix& y = data.log_data();
  int accepted = 0;
  for (int i = 0; i < data.n_instruments(); ++i) {
    const auto& J = data.index().by_instrument[i];
    double rss = 0.0;
    for (int j : J) {
      const double r = y(i, j) - state.B[i] - state.G[j];
      rss += r * r;
    }
    const int nJ = static_cast<int>(J.size());
    const double u = std::log(state.sigma2[i]);
    const double u_prop = u + mh_scale * std_normal(rng);
    const double s_prop = std::exp(u_prop);
    if (!(s_prop > 0.0) || !std::isfinite(s_prop)) continue;
    const double log_ratio = f(i, s_prop, rss, nJ) + u_prop - f(i, state.sigma2[i], rss, nJ) - u;
    if (std::log(uniform01(rng)) < log_ratio) {
      state.sigma2[i] = s_prop;
      ++accepted;
    }
  }
  return accepted;
}

Vector draw_gaussian(const GaussianFactor& factor, Rng& rng) {
  Vector z(factor.mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = std_normal(rng);
  return factor.mean + factor.llt.matrixU().solve(z);
}

namespace {

void assign_theta(ParamState& state, const Vector& theta, int N, int M) {
  state.B = theta.head(N);
  state.G = theta.segment(N, M);
}

}  // namespace

void block_gibbs_step(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng) {
  const auto factor = factor_conditional(data, priors, lognormal_cell_precision(data, state.sigma2),
                                         adjusted_log_data(data, state.sigma2));
  assign_theta(state, draw_gaussian(factor, rng), data.n_instruments(), data.n_sources());
}

Vector independence_proposal_shapes(const Dataset& data, const Priors& priors) {
  const auto& index = data.index();
  Vector shapes(data.n_instruments());
  for (int i = 0; i < data.n_instruments(); ++i) {
    double share = 0.0;
    for (int j : index.by_instrument[i]) share += 1.0 / static_cast<double>(index.by_source[j].size());
    shapes[i] = priors.alpha + 0.5 * (static_cast<double>(index.by_instrument[i].size()) - share);
  }
  return shapes;
}

bool mh_sigma2_independence(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng,
                            const Sigma2VectorLogTarget& target) {
  const Vector shapes = independence_proposal_shapes(data, priors);
  const double beta = priors.beta;
  auto log_q = [&](const Vector& s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) acc += -(shapes[i] + 1.0) * std::log(s[i]) - beta / s[i];
    return acc;
  };
  auto log_pi = [&](const Vector& s) {
    return target ? target(s) : marginal_sigma2_logdensity(s, data, priors);
  };
  Vector prop(shapes.size());
  for (Eigen::Index i = 0; i < prop.size(); ++i) prop[i] = inv_gamma_draw(rng, shapes[i], beta);
  if (!(prop.array() > 0.0).all() || !prop.allFinite()) return false;
  const double log_ratio = log_pi(prop) - log_pi(state.sigma2) - log_q(prop) + log_q(state.sigma2);
  if (std::log(uniform01(rng)) < log_ratio) {
    state.sigma2 = prop;
    return true;
  }
  return false;
}

// ---- log-t kernels ----

int logt_xi_step(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng,
                 const XiStepOptions& options) {
  if (!state.xi) throw ValidationError("log-t step needs latent weights xi");
  const Matrix& y = data.log_data();
  const double kappa = priors.kappa_value();
  const double kappa2 = kappa * kappa;
  const double p = 0.5 * (priors.nu_value() + 1.0);
  const double b = options.bias_term ? 0.25 * kappa2 : 0.0;
  Matrix& xi = *state.xi;
  int accepted = 0;
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) {
      const double r = y(i, j) - state.B[i] - state.G[j];
      const double a = 1.0 + r * r / kappa2;
      if (options.method == XiUpdate::gig) {
        xi(i, j) = gig_draw(rng, p, a, b);
      } else {
        xi(i, j) = gig_mh(rng, p, a, b, xi(i, j), options.mh_steps, options.mh_scale, &accepted);
      }
    }
  }
  return accepted;
}

void logt_block_step(ParamState& state, const Dataset& data, const Priors& priors, Rng& rng) {
  if (!state.xi) throw ValidationError("log-t step needs latent weights xi");
  const double kappa = priors.kappa_value();
  const double kappa2 = kappa * kappa;
  const auto factor = factor_conditional(data, priors, logt_cell_precision(data, *state.xi, kappa2),
                                         logt_centered_data(data, *state.xi, kappa2));
  assign_theta(state, draw_gaussian(factor, rng), data.n_instruments(), data.n_sources());
}

// ---- chains ----

ParamState initial_state(const Dataset& data, const Priors& priors, ModelKind model, Rng& rng) {
  priors.validate(data.n_instruments());
  const Matrix& y = data.log_data();
  const int N = data.n_instruments();
  const int M = data.n_sources();
  ParamState s;
  s.B.resize(N);
  for (int i = 0; i < N; ++i) s.B[i] = priors.b[i] + (2.0 * uniform01(rng) - 1.0) * 0.1;
  s.G = Vector::Zero(M);
  for (int j = 0; j < M; ++j) {
    const auto& I = data.index().by_source[j];
    for (int i : I) s.G[j] += y(i, j) - priors.b[i];
    s.G[j] /= static_cast<double>(I.size());
  }
  if (model == ModelKind::lognormal) {
    s.sigma2 = Vector::Constant(N, priors.beta / priors.alpha);
  } else {
    const double kappa = priors.kappa_value();
    s.sigma2 = Vector::Constant(N, kappa * kappa);
    Matrix xi = Matrix::Constant(N, M, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < N; ++i) {
      for (int j : data.index().by_instrument[i]) xi(i, j) = priors.nu_value();
    }
    s.xi = std::move(xi);
  }
  return s;
}

namespace {

struct ChainOutput {
  std::vector<ParamState> states;
  std::map<std::string, std::pair<double, double>> moves;  // accepted, attempted
  int divergences = 0;
  double step_size = std::numeric_limits<double>::quiet_NaN();
};

void count(ChainOutput& out, const std::string& key, double accepted, double attempted) {
  auto& m = out.moves[key];
  m.first += accepted;
  m.second += attempted;
}

ChainOutput run_gibbs_family(const ChainConfig& cfg, const Dataset& data, const Priors& priors, ParamState state,
                             Rng& rng) {
  ChainOutput out;
  const int N = data.n_instruments();
  const int n_cells = data.index().n_observed();
  XiStepOptions xi_opts;
  xi_opts.method = cfg.xi_update;
  xi_opts.mh_steps = cfg.xi_mh_steps;
  const int total = cfg.n_warmup + cfg.n_samples * cfg.thin;
  out.states.reserve(cfg.n_samples);
  for (int t = 0; t < total; ++t) {
    const bool keep_stats = t >= cfg.n_warmup;
    switch (cfg.algorithm) {
      case Algorithm::gibbs: {
        gibbs_step_B(state, data, priors, rng);
        gibbs_step_G(state, data, priors, rng);
        const int acc = gibbs_step_sigma2(state, data, priors, rng, cfg.mh_scale);
        if (keep_stats) count(out, "sigma2_rw", acc, N);
        break;
      }
      case Algorithm::block_gibbs: {
        block_gibbs_step(state, data, priors, rng);
        const int acc = gibbs_step_sigma2(state, data, priors, rng, cfg.mh_scale);
        if (keep_stats) count(out, "sigma2_rw", acc, N);
        break;
      }
      case Algorithm::marginal: {
        const bool acc = mh_sigma2_independence(state, data, priors, rng);
        block_gibbs_step(state, data, priors, rng);
        if (keep_stats) count(out, "sigma2_independence", acc ? 1 : 0, 1);
        break;
      }
      case Algorithm::gibbs_t: {
        logt_block_step(state, data, priors, rng);
        const int acc = logt_xi_step(state, data, priors, rng, xi_opts);
        if (keep_stats && cfg.xi_update == XiUpdate::mh) count(out, "xi_mh", acc, double(n_cells) * cfg.xi_mh_steps);
        break;
      }
      default:
        throw ValidationError("not a Gibbs-family algorithm");
    }
    if (t >= cfg.n_warmup && (t - cfg.n_warmup) % cfg.thin == cfg.thin - 1) out.states.push_back(state);
  }
  return out;
}

template <typename Target>
ChainOutput run_hmc_chain(const ChainConfig& cfg, const Target& target, const ParamState& init, Rng& rng) {
  HmcSettings settings;
  settings.n_warmup = cfg.n_warmup;
  settings.n_samples = cfg.n_samples * cfg.thin;
  settings.step_size = cfg.step_size;
  settings.n_leapfrog = cfg.n_leapfrog;
  settings.adapt = cfg.adapt;
  settings.target_accept = cfg.target_accept;
  if (cfg.mass) {
    if (cfg.mass->size() != target.dim()) throw ValidationError("mass vector has the wrong dimension");
    settings.inv_mass = cfg.mass->cwiseInverse();
  }
  const HmcRun run = hmc_run(target, target.pack(init), settings, rng);
  ChainOutput out;
  for (int r = cfg.thin - 1; r < run.draws.rows(); r += cfg.thin) {
    out.states.push_back(target.unpack(run.draws.row(r).transpose()));
  }
  count(out, "hmc", run.accept_rate * settings.n_samples, settings.n_samples);
  out.divergences = run.divergences;
  out.step_size = run.step_size;
  return out;
}

}  // namespace

PosteriorDraws run_chain(const ChainConfig& config, const Dataset& data, const Priors& priors,
                         const std::optional<ParamState>& init) {
  config.validate();
  priors.validate(data.n_instruments());
  const ModelKind model = model_of(config.algorithm);
  if (init) {
    init->validate(data);
    if (model == ModelKind::logt && !init->xi) throw ValidationError("log-t sampling needs an initial xi");
  }
  const Matrix& y = data.log_data();  // throws early on unadjusted zero counts
  (void)y;

  std::vector<ChainOutput> outputs(config.n_chains);
  parallel_for(config.n_chains, [&](int c) {
    Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(c)});
    ParamState start = init ? *init : initial_state(data, priors, model, rng);
    if (model == ModelKind::logt) {
      const double kappa = priors.kappa_value();
      start.sigma2 = Vector::Constant(data.n_instruments(), kappa * kappa);
    }
    switch (config.algorithm) {
      case Algorithm::hmc:
        outputs[c] = run_hmc_chain(config, LogNormalTarget(data, priors), start, rng);
        break;
      case Algorithm::hmc_t:
        outputs[c] = run_hmc_chain(config, LogTTarget(data, priors), start, rng);
        break;
      default:
        outputs[c] = run_gibbs_family(config, data, priors, std::move(start), rng);
    }
  });

  PosteriorDraws draws;
  draws.model = model;
  draws.algorithm = config.algorithm;
  draws.n_chains = config.n_chains;
  draws.n_samples = config.n_samples;
  std::map<std::string, std::pair<double, double>> moves;
  for (int c = 0; c < config.n_chains; ++c) {
    for (auto& s : outputs[c].states) {
      draws.states.push_back(std::move(s));
      draws.chain_id.push_back(c);
    }
    for (const auto& [k, v] : outputs[c].moves) {
      moves[k].first += v.first;
      moves[k].second += v.second;
    }
    draws.divergences += outputs[c].divergences;
    draws.step_sizes.push_back(outputs[c].step_size);
  }
  for (const auto& [k, v] : moves) draws.acceptance_rates[k] = v.second > 0 ? v.first / v.second : 0.0;
  for (const auto& s : draws.states) {
    if (!s.B.allFinite() || !s.G.allFinite() || !(s.sigma2.array() > 0.0).all()) {
      throw NumericalError("sampler produced a non-finite or non-positive draw");
    }
  }
  draws.compute_diagnostics(data.n_instruments(), data.n_sources());
  if (draws.divergences > 0) {
    draws.warnings.push_back(std::to_string(draws.divergences) + " divergent HMC transition(s) after warmup");
  }
  return draws;
}

PosteriorDraws hmc_sample(const ChainConfig& config, const Dataset& data, const Priors& priors,
                          const std::optional<ParamState>& init) {
  if (config.algorithm != Algorithm::hmc && config.algorithm != Algorithm::hmc_t) {
    throw ValidationError("hmc_sample needs algorithm hmc or hmc-t");
  }
  return run_chain(config, data, priors, init);
}

}  // namespace concord
