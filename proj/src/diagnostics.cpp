#include "concord/diagnostics.hpp"

#include "concord/errors.hpp"
#include "concord/gaussian_layer.hpp"
#include "concord/model_core.hpp"
#include "concord/parallel.hpp"
#include "concord/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concord {

ResidualTable standardized_residuals(const ParamState& estimates, const Dataset& data, const Priors& priors,
                                     ModelKind model, double threshold) {
  const int N = data.n_instruments();
  const int M = data.n_sources();
  if (estimates.B.size() != N || estimates.G.size() != M) {
    throw ValidationError("estimates do not match the dataset");
  }
  ResidualTable out;
  out.model = model;
  out.threshold = threshold > 0.0 ? threshold : (model == ModelKind::logt ? 2.0 : 3.0);
  out.values = Matrix::Constant(N, M, std::numeric_limits<double>::quiet_NaN());
  out.flags = Mask::Constant(N, M, false);
  const Matrix& y = data.log_data();

  if (model == ModelKind::lognormal) {
    if (estimates.sigma2.size() != N) throw ValidationError("estimates need one sigma^2 per instrument");
    for (int i = 0; i < N; ++i) {
      if (!(estimates.sigma2[i] > 0.0)) throw ValidationError("estimated sigma must be positive");
    }
  } else if (!estimates.xi) {
    throw ValidationError("log-t residuals need estimated xi");
  }
  const double kappa = priors.kappa_value();
  for (int i = 0; i < N; ++i) {
    for (int j : data.index().by_instrument[i]) {
      const double raw = y(i, j) - estimates.B[i] - estimates.G[j];
      double v;
      if (model == ModelKind::lognormal) {
        const double s2 = estimates.sigma2[i];
        v = (raw + 0.5 * s2) / std::sqrt(s2);
      } else {
        const double w = (*estimates.xi)(i, j);
        if (!(w > 0.0)) throw ValidationError("estimated xi must be positive");
        v = (raw + 0.5 * kappa * kappa / w) / (kappa / std::sqrt(w));
      }
      out.values(i, j) = v;
      out.flags(i, j) = std::abs(v) > out.threshold;
    }
  }
  return out;
}

namespace {

Vector instrument_contrast(const Matrix& y, const Dataset& data) {
  const int N = data.n_instruments();
  Vector row_mean(N);
  double total = 0.0;
  int n = 0;
  for (int i = 0; i < N; ++i) {
    double acc = 0.0;
    for (int j : data.index().by_instrument[i]) acc += y(i, j);
    total += acc;
    n += static_cast<int>(data.index().by_instrument[i].size());
    row_mean[i] = data.index().by_instrument[i].empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : acc / static_cast<double>(data.index().by_instrument[i].size());
  }
  return row_mean.array() - total / n;
}

}  // namespace

PpcResult posterior_predictive_pvalue(const PosteriorDraws& draws, const Dataset& data, const Priors& priors,
                                      std::uint64_t seed) {
  if (draws.states.empty()) throw ValidationError("posterior predictive check needs draws");
  const int N = data.n_instruments();
  const int M = data.n_sources();
  const Matrix& y = data.log_data();
  PpcResult out;
  out.T_obs = instrument_contrast(y, data);
  const double kappa = priors.kappa_value();

  const int D = static_cast<int>(draws.states.size());
  std::vector<std::vector<char>> exceed(D, std::vector<char>(N, 0));
  parallel_for(D, [&](int d) {
    Rng rng = make_rng(seed, {0x505043ull, static_cast<std::uint64_t>(d)});
    const ParamState& s = draws.states[d];
    Matrix yrep = Matrix::Constant(N, M, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < N; ++i) {
      for (int j : data.index().by_instrument[i]) {
        const double var = (draws.model == ModelKind::logt && s.xi) ? kappa * kappa / (*s.xi)(i, j) : s.sigma2[i];
        yrep(i, j) = s.B[i] + s.G[j] - 0.5 * var + std::sqrt(var) * std_normal(rng);
      }
    }
    const Vector T = instrument_contrast(yrep, data);
    for (int i = 0; i < N; ++i) exceed[d][i] = T[i] >= out.T_obs[i];
  });

  out.p_upper = Vector::Zero(N);
  for (int d = 0; d < D; ++d) {
    for (int i = 0; i < N; ++i) out.p_upper[i] += exceed[d][i];
  }
  out.p_upper /= static_cast<double>(D);
  out.p_two_sided.resize(N);
  for (int i = 0; i < N; ++i) {
    out.p_two_sided[i] = std::min(1.0, 2.0 * std::min(out.p_upper[i], 1.0 - out.p_upper[i]));
  }
  return out;
}

GofResult gof_chi2(const Vector& B_hat, const Vector& G_hat, const Dataset& data, const Priors& priors,
                   const Vector& sigma2, VarianceMode mode) {
  priors.validate(data.n_instruments());
  const int N = data.n_instruments();
  const int M = data.n_sources();
  if (B_hat.size() != N || G_hat.size() != M || sigma2.size() != N) {
    throw ValidationError("gof_chi2: dimensions do not match the dataset");
  }
  const Matrix yp = adjusted_log_data(data, sigma2);
  GofResult out;
  out.variance_mode = mode;
  out.approximate = mode == VarianceMode::estimated;
  int finite_priors = 0;
  for (int i = 0; i < N; ++i) {
    if (std::isfinite(priors.tau2[i])) {
      const double d = priors.b[i] - B_hat[i];
      out.statistic += d * d / priors.tau2[i];
      ++finite_priors;
    }
    for (int j : data.index().by_instrument[i]) {
      const double r = yp(i, j) - B_hat[i] - G_hat[j];
      out.statistic += r * r / sigma2[i];
    }
  }
  out.df = data.index().n_observed() + finite_priors - N - M;
  if (mode == VarianceMode::estimated) out.df -= N;
  if (out.df <= 0) throw ValidationError("goodness-of-fit test has no degrees of freedom left");
  out.p_value = stats::chi2_sf(out.statistic, out.df);
  return out;
}

Vector prior_influence(const ShrinkageReport& report) { return Vector::Ones(report.W.size()) - report.W; }

Vector prior_influence(const PosteriorDraws& draws, const Dataset& data, const Priors& priors) {
  if (draws.states.empty()) throw ValidationError("no posterior draws");
  Vector s2 = Vector::Zero(data.n_instruments());
  for (const auto& s : draws.states) s2 += s.sigma2;
  s2 /= static_cast<double>(draws.states.size());
  const Vector W = shrinkage_weights(s2, priors.tau2, data.index().instrument_counts());
  return Vector::Ones(W.size()) - W;
}

MleVariances mle_asymptotic_variances(const Vector& sigma2, const Vector& tau2, int N, int M) {
  if (sigma2.size() != N || tau2.size() != N || M < 1) throw ValidationError("mle_asymptotic_variances: bad sizes");
  if (!(sigma2.array() > 0.0).all() || !(tau2.array() > 0.0).all()) {
    throw ValidationError("variances must be positive");
  }
  const Vector inv_s = sigma2.cwiseInverse();
  const Vector inv_t = tau2.cwiseInverse();
  const Vector data_prec = static_cast<double>(M) * inv_s;
  const Vector W = data_prec.cwiseQuotient(data_prec + inv_t);
  const double prior_weight = inv_t.dot(W);
  if (!(prior_weight > 0.0)) {
    throw IdentifiabilityError("asymptotic variances are infinite without a finite prior variance");
  }
  const double S_G = 1.0 + inv_s.dot(W) / prior_weight;
  MleVariances out;
  out.varG = Vector::Constant(M, S_G / inv_s.sum());
  out.varB.resize(N);
  for (int i = 0; i < N; ++i) {
    const double S_B = 1.0 + data_prec[i] * W[i] / prior_weight;
    out.varB[i] = S_B / (data_prec[i] + inv_t[i]);
  }
  out.covBG = (-W / prior_weight).replicate(1, M);
  return out;
}

double condition_number_bound(const Vector& sigma2, const Vector& tau2, const IndexVector& J_sizes) {
  if (sigma2.size() != tau2.size() || sigma2.size() != J_sizes.size()) {
    throw ValidationError("condition_number_bound: size mismatch");
  }
  if (!(sigma2.array() > 0.0).all() || !(tau2.array() > 0.0).all()) {
    throw ValidationError("variances must be positive");
  }
  double data = 0.0;
  for (Eigen::Index i = 0; i < sigma2.size(); ++i) data += J_sizes[i] / sigma2[i];
  const double prior = tau2.cwiseInverse().sum();
  if (prior == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 + 4.0 * data / prior;
}

namespace {

ParameterSummary summarize_trace(std::string name, std::vector<double> x) {
  ParameterSummary s;
  s.name = std::move(name);
  s.mean = stats::mean(x);
  s.sd = stats::sd(x);
  std::sort(x.begin(), x.end());
  s.q025 = stats::quantile_sorted(x, 0.025);
  s.q975 = stats::quantile_sorted(x, 0.975);
  return s;
}

}  // namespace

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws) {
  if (draws.states.empty()) throw ValidationError("no posterior draws to summarize");
  std::vector<ParameterSummary> out;
  for (int k = 0; k < draws.n_parameters(); ++k) {
    auto s = summarize_trace(draws.parameter_names[k], draws.trace(k));
    s.ess = draws.ess.size() > k ? draws.ess[k] : std::numeric_limits<double>::quiet_NaN();
    s.rhat = draws.rhat.size() > k ? draws.rhat[k] : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ParameterSummary> summarize_areas(const PosteriorDraws& draws) {
  if (draws.states.empty()) throw ValidationError("no posterior draws to summarize");
  const int N = static_cast<int>(draws.states.front().B.size());
  std::vector<ParameterSummary> out;
  for (int i = 0; i < N; ++i) {
    std::vector<double> a;
    a.reserve(draws.size());
    for (const auto& s : draws.states) a.push_back(std::exp(s.B[i]));
    auto summary = summarize_trace("A[" + std::to_string(i + 1) + "]", std::move(a));
    summary.ess = draws.ess.size() > i ? draws.ess[i] : std::numeric_limits<double>::quiet_NaN();
    summary.rhat = draws.rhat.size() > i ? draws.rhat[i] : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(summary));
  }
  return out;
}

}  // namespace concord
