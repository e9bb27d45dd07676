#include "concord/hmc.hpp"

#include "concord/errors.hpp"
#include "concord/model_core.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace concord {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double fail(Vector& grad) {
  grad.setConstant(std::numeric_limits<double>::quiet_NaN());
  return kNegInf;
}

}  // namespace

Vector LogNormalTarget::pack(const ParamState& state) const {
  Vector q(dim());
  q << state.B, state.G, state.sigma2.array().log().matrix();
  return q;
}

ParamState LogNormalTarget::unpack(const Vector& q) const {
  const int N = data_.n_instruments();
  const int M = data_.n_sources();
  ParamState s;
  s.B = q.head(N);
  s.G = q.segment(N, M);
  s.sigma2 = q.tail(N).array().exp();
  return s;
}

double LogNormalTarget::log_density(const Vector& q, Vector& grad) const {
  const int N = data_.n_instruments();
  const int M = data_.n_sources();
  grad.resize(dim());
  const ParamState s = unpack(q);
  if (!(s.sigma2.array() > 0.0).all() || !s.sigma2.allFinite() || !q.allFinite()) return fail(grad);
  const double lp = log_joint_posterior(s, data_, priors_) + q.tail(N).sum();
  const auto g = log_joint_gradient(s, data_, priors_);
  grad.head(N) = g.dB;
  grad.segment(N, M) = g.dG;
  grad.tail(N) = g.dsigma2.cwiseProduct(s.sigma2) + Vector::Ones(N);
  return lp;
}

Vector LogTTarget::pack(const ParamState& state) const {
  if (!state.xi) throw ValidationError("log-t state needs xi");
  const int N = data_.n_instruments();
  const int M = data_.n_sources();
  Vector q(dim());
  q.head(N) = state.B;
  q.segment(N, M) = state.G;
  int k = N + M;
  for (int i = 0; i < N; ++i) {
    for (int j : data_.index().by_instrument[i]) q[k++] = std::log((*state.xi)(i, j));
  }
  return q;
}

ParamState LogTTarget::unpack(const Vector& q) const {
  const int N = data_.n_instruments();
  const int M = data_.n_sources();
  ParamState s;
  s.B = q.head(N);
  s.G = q.segment(N, M);
  const double kappa = priors_.kappa_value();
  s.sigma2 = Vector::Constant(N, kappa * kappa);
  Matrix xi = Matrix::Constant(N, M, std::numeric_limits<double>::quiet_NaN());
  int k = N + M;
  for (int i = 0; i < N; ++i) {
    for (int j : data_.index().by_instrument[i]) xi(i, j) = std::exp(q[k++]);
  }
  s.xi = std::move(xi);
  return s;
}

double LogTTarget::log_density(const Vector& q, Vector& grad) const {
  const int N = data_.n_instruments();
  const int M = data_.n_sources();
  grad.resize(dim());
  if (!q.allFinite()) return fail(grad);
  const ParamState s = unpack(q);
  const Matrix& xi = *s.xi;
  for (int i = 0; i < N; ++i) {
    for (int j : data_.index().by_instrument[i]) {
      if (!(xi(i, j) > 0.0) || !std::isfinite(xi(i, j))) return fail(grad);
    }
  }
  const double lp = log_joint_posterior_t(s, data_, priors_) + q.tail(dim() - N - M).sum();
  const auto g = log_joint_gradient_t(s, data_, priors_);
  grad.head(N) = g.dB;
  grad.segment(N, M) = g.dG;
  int k = N + M;
  for (int i = 0; i < N; ++i) {
    for (int j : data_.index().by_instrument[i]) {
      grad[k++] = g.dxi(i, j) * xi(i, j) + 1.0;
    }
  }
  return lp;
}

double FixedVarianceTarget::log_density(const Vector& q, Vector& grad) const {
  const int N = data_.n_instruments();
  const int M = data_.n_sources();
  grad.resize(dim());
  if (!q.allFinite()) return fail(grad);
  ParamState s;
  s.B = q.head(N);
  s.G = q.tail(M);
  s.sigma2 = sigma2_;
  const auto g = log_joint_gradient(s, data_, priors_);
  grad.head(N) = g.dB;
  grad.tail(M) = g.dG;
  return log_joint_posterior(s, data_, priors_);
}

double leapfrog(const HmcTarget& target, Vector& q, Vector& p, Vector& grad, double eps, const Vector& inv_mass,
                int n_steps) {
  double lp = kNegInf;
  p += 0.5 * eps * grad;
  for (int l = 0; l < n_steps; ++l) {
    q += eps * inv_mass.cwiseProduct(p);
    lp = target.log_density(q, grad);
    if (!std::isfinite(lp) || !grad.allFinite()) return kNegInf;
    p += (l + 1 == n_steps ? 0.5 : 1.0) * eps * grad;
  }
  return lp;
}

DualAverage::DualAverage(double initial_step, double target, double gamma, double t0, double kappa)
    : target_(target), gamma_(gamma), t0_(t0), kappa_(kappa) {
  restart(initial_step);
}

void DualAverage::restart(double initial_step) {
  mu_ = std::log(10.0 * initial_step);
  h_bar_ = 0.0;
  log_eps_bar_ = std::log(initial_step);
  count_ = 0;
}

double DualAverage::update(double accept_stat) {
  ++count_;
  const double t = static_cast<double>(count_);
  const double eta = 1.0 / (t + t0_);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_stat);
  const double log_eps = mu_ - std::sqrt(t) / gamma_ * h_bar_;
  const double w = std::pow(t, -kappa_);
  log_eps_bar_ = w * log_eps + (1.0 - w) * log_eps_bar_;
  return std::exp(log_eps);
}

namespace {

double kinetic(const Vector& p, const Vector& inv_mass) { return 0.5 * p.cwiseProduct(inv_mass).dot(p); }

Vector draw_momentum(const Vector& inv_mass, Rng& rng) {
  Vector p(inv_mass.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) p[k] = std_normal(rng) / std::sqrt(inv_mass[k]);
  return p;
}

// Doubles or halves eps until a single leapfrog step crosses acceptance 1/2.
double reasonable_step(const HmcTarget& target, const Vector& q0, const Vector& grad0, double lp0, double eps,
                       const Vector& inv_mass, Rng& rng) {
  auto log_ratio = [&](double e) {
    Vector q = q0, g = grad0;
    Vector p = draw_momentum(inv_mass, rng);
    const double h0 = -lp0 + kinetic(p, inv_mass);
    const double lp = leapfrog(target, q, p, g, e, inv_mass, 1);
    const double h1 = -lp + kinetic(p, inv_mass);
    return std::isfinite(h1) ? h0 - h1 : kNegInf;
  };
  double r = log_ratio(eps);
  const double dir = r > std::log(0.5) ? 1.0 : -1.0;
  for (int k = 0; k < 50; ++k) {
    if (dir * r <= dir * std::log(0.5)) break;
    eps *= std::pow(2.0, dir);
    r = log_ratio(eps);
  }
  return eps;
}

// Ends (exclusive) of the slow adaptation windows.
std::vector<int> slow_window_ends(int n_warmup, int& slow_begin) {
  std::vector<int> ends;
  if (n_warmup < 20) {
    slow_begin = n_warmup;
    return ends;
  }
  int init = 75, term = 50, base = 25;
  if (n_warmup < 150) {
    init = static_cast<int>(0.15 * n_warmup);
    term = static_cast<int>(0.1 * n_warmup);
    base = n_warmup - init - term;
  }
  const int last = n_warmup - term;
  slow_begin = init;
  int start = init;
  int size = base;
  while (start < last) {
    int end = start + size;
    if (end + 2 * size > last) end = last;
    ends.push_back(end);
    start = end;
    size *= 2;
  }
  return ends;
}

}  // namespace

HmcRun hmc_run(const HmcTarget& target, const Vector& q0, const HmcSettings& settings, Rng& rng) {
  if (settings.n_samples < 0 || settings.n_warmup < 0 || settings.n_leapfrog < 1 || !(settings.step_size > 0.0)) {
    throw ValidationError("invalid HMC settings");
  }
  const int d = target.dim();
  if (q0.size() != d) throw ValidationError("HMC start has the wrong dimension");
  Vector inv_mass = settings.inv_mass.size() == d ? settings.inv_mass : Vector::Ones(d);
  if (!(inv_mass.array() > 0.0).all()) throw ValidationError("mass must be positive");

  Vector q = q0;
  Vector grad(d);
  double lp = target.log_density(q, grad);
  if (!std::isfinite(lp) || !grad.allFinite()) {
    throw NumericalError("log density or gradient is not finite at the HMC starting point");
  }

  double eps = settings.step_size;
  if (settings.adapt && settings.n_warmup > 0) eps = reasonable_step(target, q, grad, lp, eps, inv_mass, rng);
  DualAverage da(eps, settings.target_accept);

  int slow_begin = 0;
  const std::vector<int> window_ends = settings.adapt ? slow_window_ends(settings.n_warmup, slow_begin)
                                                      : std::vector<int>{};
  std::size_t next_window = 0;
  std::vector<Vector> window;

  HmcRun run;
  run.draws.resize(settings.n_samples, d);
  int accepted = 0;
  double abs_dh = 0.0;
  const int total = settings.n_warmup + settings.n_samples;
  for (int t = 0; t < total; ++t) {
    const bool warmup = t < settings.n_warmup;
    double eps_used = eps;
    if (!warmup && settings.jitter > 0.0) {
      eps_used = eps * (1.0 - settings.jitter + 2.0 * settings.jitter * uniform01(rng));
    }

    Vector p = draw_momentum(inv_mass, rng);
    const double h0 = -lp + kinetic(p, inv_mass);
    Vector q1 = q, g1 = grad;
    const double lp1 = leapfrog(target, q1, p, g1, eps_used, inv_mass, settings.n_leapfrog);
    const double dh = std::isfinite(lp1) ? (-lp1 + kinetic(p, inv_mass)) - h0
                                         : std::numeric_limits<double>::infinity();
    const bool divergent = !std::isfinite(dh) || dh > settings.divergence_threshold;
    const double accept_stat = divergent ? 0.0 : std::min(1.0, std::exp(-dh));
    const bool accept = !divergent && std::log(uniform01(rng)) < -dh;
    if (accept) {
      q = std::move(q1);
      grad = std::move(g1);
      lp = lp1;
    }

    if (warmup) {
      if (settings.adapt) {
        eps = da.update(accept_stat);
        if (next_window < window_ends.size() && t >= slow_begin) {
          window.push_back(q);
          if (t + 1 == window_ends[next_window]) {
            const double n = static_cast<double>(window.size());
            Vector m = Vector::Zero(d), v = Vector::Zero(d);
            for (const auto& x : window) m += x;
            m /= n;
            for (const auto& x : window) v += (x - m).cwiseAbs2();
            v /= std::max(1.0, n - 1.0);
            inv_mass = (n / (n + 5.0)) * v + Vector::Constant(d, 1e-3 * 5.0 / (n + 5.0));
            window.clear();
            ++next_window;
            eps = reasonable_step(target, q, grad, lp, eps, inv_mass, rng);
            da.restart(eps);
          }
        }
        if (t + 1 == settings.n_warmup) eps = da.final_step();
      }
      continue;
    }
    const int row = t - settings.n_warmup;
    run.draws.row(row) = q.transpose();
    accepted += accept ? 1 : 0;
    run.divergences += divergent ? 1 : 0;
    abs_dh += std::isfinite(dh) ? std::abs(dh) : 0.0;
  }
  run.accept_rate = settings.n_samples > 0 ? static_cast<double>(accepted) / settings.n_samples : 0.0;
  run.mean_abs_energy_error = settings.n_samples > 0 ? abs_dh / settings.n_samples : 0.0;
  run.step_size = eps;
  run.inv_mass = inv_mass;
  return run;
}

}  // namespace concord
