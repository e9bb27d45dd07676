#pragma once

// Static-path HMC with a diagonal mass matrix. Step size is tuned during
// warmup by dual averaging; the mass is set from windowed draw variances.

#include "concord/random.hpp"
#include "concord/types.hpp"

#include <memory>

namespace concord {

/// A differentiable log density on R^d.
class HmcTarget {
 public:
  virtual ~HmcTarget() = default;
  virtual int dim() const = 0;
  /// Returns log p(q) and writes its gradient.
  virtual double log_density(const Vector& q, Vector& grad) const = 0;
};

/// log joint posterior of the log-Normal model in q = (B, G, log sigma^2).
class LogNormalTarget : public HmcTarget {
 public:
  LogNormalTarget(const Dataset& data, const Priors& priors) : data_(data), priors_(priors) {}
  int dim() const override { return 2 * data_.n_instruments() + data_.n_sources(); }
  double log_density(const Vector& q, Vector& grad) const override;
  Vector pack(const ParamState& state) const;
  ParamState unpack(const Vector& q) const;

 private:
  const Dataset& data_;
  const Priors& priors_;
};

/// log-t joint posterior in q = (B, G, log xi over observed cells, row-major).
class LogTTarget : public HmcTarget {
 public:
  LogTTarget(const Dataset& data, const Priors& priors) : data_(data), priors_(priors) {}
  int dim() const override { return data_.n_instruments() + data_.n_sources() + data_.index().n_observed(); }
  double log_density(const Vector& q, Vector& grad) const override;
  Vector pack(const ParamState& state) const;
  ParamState unpack(const Vector& q) const;

 private:
  const Dataset& data_;
  const Priors& priors_;
};

/// (B, G) with sigma^2 held fixed: a Gaussian target with known moments.
class FixedVarianceTarget : public HmcTarget {
 public:
  FixedVarianceTarget(const Dataset& data, const Priors& priors, Vector sigma2)
      : data_(data), priors_(priors), sigma2_(std::move(sigma2)) {}
  int dim() const override { return data_.n_instruments() + data_.n_sources(); }
  double log_density(const Vector& q, Vector& grad) const override;

 private:
  const Dataset& data_;
  const Priors& priors_;
  Vector sigma2_;
};

/// L leapfrog steps of size eps with kinetic energy p^T M^{-1} p / 2.
/// q, p and grad (the gradient of log p at q) are advanced in place; returns
/// the log density at the end point (non-finite if the path blew up).
double leapfrog(const HmcTarget& target, Vector& q, Vector& p, Vector& grad, double eps,
                const Vector& inv_mass, int n_steps);

/// Nesterov dual averaging of log step size.
class DualAverage {
 public:
  explicit DualAverage(double initial_step, double target = 0.8, double gamma = 0.05, double t0 = 10.0,
                       double kappa = 0.75);
  void restart(double initial_step);
  /// Feeds one acceptance statistic; returns the next step size to use.
  double update(double accept_stat);
  double final_step() const { return std::exp(log_eps_bar_); }

 private:
  double mu_ = 0.0, target_, gamma_, t0_, kappa_;
  double h_bar_ = 0.0, log_eps_bar_ = 0.0;
  int count_ = 0;
};

struct HmcSettings {
  int n_warmup = 500;
  int n_samples = 1000;
  double step_size = 0.1;
  int n_leapfrog = 32;
  Vector inv_mass;  // empty: identity
  bool adapt = true;
  double target_accept = 0.8;
  double divergence_threshold = 1000.0;
  double jitter = 0.1;  // post-warmup step size drawn from eps * U(1 - jitter, 1 + jitter)
};

struct HmcRun {
  Matrix draws;  // n_samples x dim
  double accept_rate = 0.0;
  int divergences = 0;
  double step_size = 0.0;
  Vector inv_mass;
  double mean_abs_energy_error = 0.0;
};

/// One chain. Warmup uses an initial fast window (15%), doubling slow
/// windows that end with a mass update, and a final fast window (10%).
HmcRun hmc_run(const HmcTarget& target, const Vector& q0, const HmcSettings& settings, Rng& rng);

}  // namespace concord
