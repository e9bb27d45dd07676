#pragma once

// Generalized inverse Gaussian GIG(p, a, b) with density proportional to
//   x^{p - 1} exp(-(a x + b / x) / 2),  x > 0,  a > 0, b >= 0.

#include "concord/random.hpp"

namespace concord {

/// Unnormalized log density.
double gig_logdensity(double x, double p, double a, double b);

/// Exact draw by ratio-of-uniforms (Hoermann and Leydold): the mode-shifted
/// variant when p > 2 or sqrt(ab) > 3, the plain variant otherwise. Negative
/// p is handled through 1 / GIG(-p, b, a); b = 0 reduces to a Gamma draw.
/// If the rejection loop stalls a random-walk MH chain on log x takes over.
double gig_draw(Rng& rng, double p, double a, double b);

/// Random-walk Metropolis on log x targeting GIG(p, a, b), started at x0 and
/// run for n_steps with proposal sd `scale`. Returns the final state and adds
/// the number of accepted moves to *accepted when given.
double gig_mh(Rng& rng, double p, double a, double b, double x0, int n_steps, double scale,
              int* accepted = nullptr);

double gig_mode(double p, double a, double b);

}  // namespace concord
