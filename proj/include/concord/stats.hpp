#pragma once

#include "concord/types.hpp"

#include <functional>
#include <vector>

namespace concord::stats {

double mean(const std::vector<double>& x);
/// Sample variance with denominator n - 1.
double variance(const std::vector<double>& x);
double sd(const std::vector<double>& x);

/// Linear-interpolation quantile (type 7): h = (n - 1) p, interpolate
/// between order statistics floor(h) and floor(h) + 1.
double quantile(std::vector<double> x, double p);
double quantile_sorted(const std::vector<double>& sorted, double p);

double normal_cdf(double x);
double normal_logpdf(double x, double mean, double sd);

/// Regularized lower and upper incomplete gamma functions P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Upper tail P(X > x) for X ~ chi^2_df.
double chi2_sf(double x, double df);

/// Asymptotic Kolmogorov tail probability P(K > lambda).
double kolmogorov_sf(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test against a continuous CDF. The p-value uses the
/// Stephens small-sample correction of the asymptotic distribution.
KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf);
KsResult ks_test_two_sample(std::vector<double> x, std::vector<double> y);

}  // namespace concord::stats
