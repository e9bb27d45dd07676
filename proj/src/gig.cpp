#include "concord/gig.hpp"

#include "concord/errors.hpp"

#include <cmath>
#include <numbers>

namespace concord {

namespace {

constexpr int kMaxRejections = 100000;

void check_gig(double p, double a, double b) {
  if (!std::isfinite(p) || !(a > 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ValidationError("GIG parameters need finite p, a > 0 and b >= 0");
  }
  if (b == 0.0 && !(p > 0.0)) throw ValidationError("GIG with b = 0 needs p > 0");
}

// Mode of the standardized density y^{lambda-1} exp(-omega (y + 1/y) / 2).
double std_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Both return a standardized draw or a negative value when the loop stalls.
double rou_noshift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = std_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (int k = 0; k < kMaxRejections; ++k) {
    const double U = um * uniform01(rng);
    const double V = uniform01(rng);
    const double X = U / V;
    if (std::log(V) <= t * std::log(X) - s * (X + 1.0 / X) - nc) return X;
  }
  return -1.0;
}

double rou_shift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = std_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) are roots of a cubic; solve it in
  // depressed form with the trigonometric formula (three real roots).
  const double ca = -(2.0 * (lambda + 1.0) / omega + xm);
  const double cb = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double cc = xm;
  const double p = cb - ca * ca / 3.0;
  const double q = 2.0 * ca * ca * ca / 27.0 - ca * cb / 3.0 + cc;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - ca / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - ca / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (int k = 0; k < kMaxRejections; ++k) {
    const double U = uminus + uniform01(rng) * (uplus - uminus);
    const double V = uniform01(rng);
    const double X = U / V + xm;
    if (X > 0.0 && std::log(V) <= t * std::log(X) - s * (X + 1.0 / X) - nc) return X;
  }
  return -1.0;
}

}  // namespace

double gig_logdensity(double x, double p, double a, double b) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (p - 1.0) * std::log(x) - 0.5 * (a * x + b / x);
}

double gig_mode(double p, double a, double b) {
  check_gig(p, a, b);
  // root of a x^2 - 2 (p - 1) x - b = 0
  const double pm = p - 1.0;
  if (pm >= 0.0) return (pm + std::sqrt(pm * pm + a * b)) / a;
  return b / (std::sqrt(pm * pm + a * b) - pm);
}

double gig_mh(Rng& rng, double p, double a, double b, double x0, int n_steps, double scale, int* accepted) {
  check_gig(p, a, b);
  if (!(x0 > 0.0)) throw ValidationError("GIG MH start must be positive");
  double u = std::log(x0);
  // density of u = log x picks up the Jacobian x
  auto logf = [&](double uu) { return gig_logdensity(std::exp(uu), p, a, b) + uu; };
  double lf = logf(u);
  int acc = 0;
  for (int k = 0; k < n_steps; ++k) {
    const double prop = u + scale * std_normal(rng);
    const double lp = logf(prop);
    if (std::log(uniform01(rng)) < lp - lf) {
      u = prop;
      lf = lp;
      ++acc;
    }
  }
  if (accepted) *accepted += acc;
  return std::exp(u);
}

double gig_draw(Rng& rng, double p, double a, double b) {
  check_gig(p, a, b);
  if (b == 0.0) return gamma_draw(rng, p, 0.5 * a);
  if (p < 0.0) return 1.0 / gig_draw(rng, -p, b, a);

  const double omega = std::sqrt(a * b);
  const double scale = std::sqrt(b / a);
  if (omega < 1e-12) {
    // Numerically a Gamma(p, a/2) law; the standardized form would overflow.
    if (p > 0.0) return gamma_draw(rng, p, 0.5 * a);
  }
  const double y = (p > 2.0 || omega > 3.0) ? rou_shift(rng, p, omega) : rou_noshift(rng, p, omega);
  if (y > 0.0) return scale * y;
  return gig_mh(rng, p, a, b, gig_mode(p, a, b), 200, 1.0);
}

}  // namespace concord
