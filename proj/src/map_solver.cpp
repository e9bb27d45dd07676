#include "concord/map_solver.hpp"

#include "concord/errors.hpp"
#include "concord/model_core.hpp"

#include <Eigen/LU>

#include <cmath>

namespace concord {

Vector shrinkage_weights(const Vector& sigma2, const Vector& tau2, const IndexVector& J_sizes) {
  if (sigma2.size() != tau2.size() || sigma2.size() != J_sizes.size()) {
    throw ValidationError("shrinkage_weights: size mismatch");
  }
  Vector W(sigma2.size());
  for (Eigen::Index i = 0; i < sigma2.size(); ++i) {
    if (!(sigma2[i] > 0.0) || !(tau2[i] > 0.0) || J_sizes[i] < 0) {
      throw ValidationError("shrinkage_weights: variances must be positive and sizes non-negative");
    }
    const double data_prec = static_cast<double>(J_sizes[i]) / sigma2[i];
    W[i] = data_prec == 0.0 ? 0.0 : data_prec / (1.0 / tau2[i] + data_prec);
  }
  return W;
}

BGEstimate solve_map_known_variance(const Dataset& data, const Priors& priors, const Vector& sigma2) {
  priors.validate(data.n_instruments());
  const int N = data.n_instruments();
  const int M = data.n_sources();
  const auto& index = data.index();
  const Matrix yp = adjusted_log_data(data, sigma2);
  const Vector W = shrinkage_weights(sigma2, priors.tau2, index.instrument_counts());

  // Precision weights of instrument k within source j.
  Vector source_prec = Vector::Zero(M);
  for (int j = 0; j < M; ++j) {
    for (int k : index.by_source[j]) source_prec[j] += 1.0 / sigma2[k];
  }
  Vector source_mean = Vector::Zero(M);  // precision-weighted mean of y'_kj over I_j
  for (int j = 0; j < M; ++j) {
    for (int k : index.by_source[j]) source_mean[j] += yp(k, j) / sigma2[k];
    source_mean[j] /= source_prec[j];
  }

  Matrix A = Matrix::Identity(N, N);
  Vector rhs(N);
  for (int i = 0; i < N; ++i) {
    const auto& J = index.by_instrument[i];
    if (J.empty()) {
      rhs[i] = priors.b[i];
      continue;
    }
    const double nJ = static_cast<double>(J.size());
    double row_mean = 0.0;
    double mean_of_source_means = 0.0;
    for (int j : J) {
      row_mean += yp(i, j);
      mean_of_source_means += source_mean[j];
      for (int k : index.by_source[j]) {
        A(i, k) -= W[i] / nJ * (1.0 / sigma2[k]) / source_prec[j];
      }
    }
    row_mean /= nJ;
    mean_of_source_means /= nJ;
    rhs[i] = W[i] * (row_mean - mean_of_source_means) + (1.0 - W[i]) * priors.b[i];
  }

  Eigen::FullPivLU<Matrix> lu(A);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    throw IdentifiabilityError(
        "MAP system for B is singular: with every tau_i^2 infinite only B_i - B_k is identified");
  }
  BGEstimate out;
  out.B = lu.solve(rhs);
  out.G.resize(M);
  for (int j = 0; j < M; ++j) {
    double acc = 0.0;
    for (int k : index.by_source[j]) acc += (yp(k, j) - out.B[k]) / sigma2[k];
    out.G[j] = acc / source_prec[j];
  }
  return out;
}

double variance_map_update(double residuals_sq_sum, int J_size, double alpha, double beta) {
  const double S2 = (residuals_sq_sum + beta) / (static_cast<double>(J_size) + alpha);
  // 2 (sqrt(1 + S2) - 1), written without cancellation for small S2.
  return 2.0 * S2 / (1.0 + std::sqrt(1.0 + S2));
}

double variance_map_update_exact(double residuals_sq_sum, int J_size, double alpha, double beta) {
  const double nJ = static_cast<double>(J_size);
  const double K = nJ + 2.0 + 2.0 * alpha;
  const double Q = residuals_sq_sum + 2.0 * beta;
  return 2.0 * Q / (K + std::sqrt(K * K + nJ * Q));
}

double variance_lower_bound(int n_sources, double alpha, double beta, VarianceRule rule) {
  if (rule == VarianceRule::closed_form) {
    return 2.0 * std::sqrt(1.0 + beta / (n_sources + alpha)) - 2.0;
  }
  return variance_map_update_exact(0.0, n_sources, alpha, beta);
}

ParamState default_map_init(const Dataset& data, const Priors& priors) {
  priors.validate(data.n_instruments());
  const Matrix& y = data.log_data();
  ParamState s;
  s.B = priors.b;
  s.G = Vector::Zero(data.n_sources());
  for (int j = 0; j < data.n_sources(); ++j) {
    const auto& I = data.index().by_source[j];
    for (int i : I) s.G[j] += y(i, j) - priors.b[i];
    s.G[j] /= static_cast<double>(I.size());
  }
  s.sigma2 = Vector::Constant(data.n_instruments(), priors.beta / priors.alpha);
  return s;
}

namespace {

Vector residual_sums(const Dataset& data, const Vector& B, const Vector& G) {
  const Matrix& y = data.log_data();
  Vector out = Vector::Zero(data.n_instruments());
  for (int i = 0; i < data.n_instruments(); ++i) {
    for (int j : data.index().by_instrument[i]) {
      const double r = y(i, j) - B[i] - G[j];
      out[i] += r * r;
    }
  }
  return out;
}

}  // namespace

ShrinkageReport shrinkage_report(const Dataset& data, const Priors& priors, const ParamState& state,
                                 VarianceRule rule) {
  const IndexVector J = data.index().instrument_counts();
  ShrinkageReport rep;
  rep.W = shrinkage_weights(state.sigma2, priors.tau2, J);
  rep.prior_influence = Vector::Ones(rep.W.size()) - rep.W;
  const Vector rss = residual_sums(data, state.B, state.G);
  rep.S2.resize(J.size());
  rep.R.resize(J.size());
  for (Eigen::Index i = 0; i < J.size(); ++i) {
    const double nJ = static_cast<double>(J[i]);
    if (rule == VarianceRule::closed_form) {
      rep.S2[i] = (rss[i] + priors.beta) / (nJ + priors.alpha);
      rep.R[i] = 2.0 / (1.0 + std::sqrt(1.0 + rep.S2[i]));
    } else {
      const double K = nJ + 2.0 + 2.0 * priors.alpha;
      rep.S2[i] = (rss[i] + 2.0 * priors.beta) / K;
      rep.R[i] = 2.0 / (1.0 + std::sqrt(1.0 + nJ * rep.S2[i] / K));
    }
  }
  return rep;
}

MapResult solve_map_joint(const Dataset& data, const Priors& priors, const ParamState& init,
                          const MapOptions& options) {
  init.validate(data);
  priors.validate(data.n_instruments());
  if (options.max_iter < 1 || !(options.tol > 0.0)) throw ValidationError("invalid MAP solver options");
  const IndexVector J = data.index().instrument_counts();

  MapResult result;
  ParamState cur = init;
  cur.xi.reset();
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const BGEstimate bg = solve_map_known_variance(data, priors, cur.sigma2);
    const Vector rss = residual_sums(data, bg.B, bg.G);
    Vector s2(cur.sigma2.size());
    for (Eigen::Index i = 0; i < s2.size(); ++i) {
      s2[i] = options.rule == VarianceRule::exact
                  ? variance_map_update_exact(rss[i], J[i], priors.alpha, priors.beta)
                  : variance_map_update(rss[i], J[i], priors.alpha, priors.beta);
    }
    const double change = std::max({(bg.B - cur.B).cwiseAbs().maxCoeff(), (bg.G - cur.G).cwiseAbs().maxCoeff(),
                                    (s2 - cur.sigma2).cwiseAbs().maxCoeff()});
    cur.B = bg.B;
    cur.G = bg.G;
    cur.sigma2 = s2;
    result.iterations = iter;
    result.last_change = change;
    if (!std::isfinite(change)) throw NumericalError("MAP iteration produced non-finite values");
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  result.state = cur;
  result.shrinkage = shrinkage_report(data, priors, cur, options.rule);
  return result;
}

MapResult solve_map_joint(const Dataset& data, const Priors& priors, const MapOptions& options) {
  return solve_map_joint(data, priors, default_map_init(data, priors), options);
}

double power_shrinkage_area(double a_i, double W_i, double geo_mean_counts, double geo_mean_fluxes,
                            double sigma2_i) {
  if (!(a_i > 0.0) || !(geo_mean_counts > 0.0) || !(geo_mean_fluxes > 0.0) || !(sigma2_i > 0.0)) {
    throw ValidationError("power_shrinkage_area: inputs must be positive");
  }
  if (!(W_i >= 0.0 && W_i <= 1.0)) throw ValidationError("power_shrinkage_area: W must lie in [0, 1]");
  const double log_data_term = std::log(geo_mean_counts) - std::log(geo_mean_fluxes) + 0.5 * sigma2_i;
  return std::exp((1.0 - W_i) * std::log(a_i) + W_i * log_data_term);
}

}  // namespace concord
