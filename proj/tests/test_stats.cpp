#include "oracles.hpp"

#include "concord/errors.hpp"
#include "concord/gig.hpp"
#include "concord/mcmc_stats.hpp"
#include "concord/parallel.hpp"
#include "concord/random.hpp"
#include "concord/stats.hpp"

#include <doctest.h>

#include <atomic>

using namespace concord;

TEST_CASE("quantiles follow the linear-interpolation rule") {
  const std::vector<double> x{4, 1, 3, 2, 5};
  CHECK(stats::quantile(x, 0.0) == 1.0);
  CHECK(stats::quantile(x, 1.0) == 5.0);
  CHECK(stats::quantile(x, 0.5) == 3.0);
  CHECK(stats::quantile(x, 0.3) == doctest::Approx(2.2));
  CHECK(stats::quantile({7.0}, 0.9) == 7.0);
}

TEST_CASE("incomplete gamma and chi-square tails") {
  // P(1, x) = 1 - e^{-x}
  for (double x : {0.01, 0.5, 2.0, 30.0}) CHECK(stats::gamma_p(1.0, x) == doctest::Approx(1 - std::exp(-x)));
  // chi^2_2 tail is e^{-x/2}
  for (double x : {0.1, 3.0, 50.0}) CHECK(stats::chi2_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  // chi^2_10 upper 5% point
  CHECK(stats::chi2_sf(18.307038053275146, 10.0) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::gamma_p(3.5, 2.0) + stats::gamma_q(3.5, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  // quadrature oracle at a = 4.3
  const double a = 4.3, x = 6.1;
  const double num = oracle::simpson([&](double t) { return std::pow(t, a - 1) * std::exp(-t); }, 0.0, x, 20000);
  CHECK(stats::gamma_p(a, x) == doctest::Approx(num / std::tgamma(a)).epsilon(1e-9));
}

TEST_CASE("normal cdf") {
  CHECK(stats::normal_cdf(0.0) == 0.5);
  CHECK(stats::normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("Kolmogorov-Smirnov test") {
  Rng rng = make_rng(51);
  std::vector<double> u(5000);
  for (double& v : u) v = uniform01(rng);
  const auto ok = stats::ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(ok.p_value > 0.01);
  const auto bad = stats::ks_test(u, [](double x) { return std::clamp(x * x, 0.0, 1.0); });
  CHECK(bad.p_value < 1e-6);
  // D for a single point at 0.3 against U(0,1) is 0.7
  CHECK(stats::ks_test({0.3}, [](double x) { return x; }).statistic == doctest::Approx(0.7));
  CHECK(stats::kolmogorov_sf(0.0) == 1.0);
  CHECK(stats::kolmogorov_sf(1.3580986393225505) == doctest::Approx(0.05).epsilon(1e-6));
  std::vector<double> v(4000);
  for (double& x : v) x = uniform01(rng);
  CHECK(stats::ks_test_two_sample(u, v).p_value > 0.01);
}

TEST_CASE("GIG density and draws") {
  Rng rng = make_rng(52);
  struct Case {
    double p, a, b;
  };
  // both ratio-of-uniforms branches, negative p, and b = 0
  for (const Case c : {Case{0.5, 1.0, 1.0}, Case{2.5, 13.5, 0.005}, Case{4.0, 2.0, 3.0}, Case{-1.5, 2.0, 0.7},
                       Case{1.2, 0.1, 20.0}, Case{3.0, 2.0, 0.0}}) {
    const auto lo = c.b > 0 ? -15.0 : -25.0;
    const auto cdf = oracle::grid_cdf(
        [&](double u) { return gig_logdensity(std::exp(u), c.p, c.a, c.b) + u; }, lo, 6.0, 60000);
    std::vector<double> xs(100000);
    for (double& x : xs) x = std::log(gig_draw(rng, c.p, c.a, c.b));
    CHECK_MESSAGE(stats::ks_test(xs, cdf).statistic < 0.01, "p=" << c.p << " a=" << c.a << " b=" << c.b);
  }
}

TEST_CASE("GIG mode and MH agree with exact draws") {
  Rng rng = make_rng(53);
  const double p = 2.5, a = 3.0, b = 0.5;
  const double m = gig_mode(p, a, b);
  const double h = 1e-6;
  CHECK((gig_logdensity(m + h, p, a, b) - gig_logdensity(m - h, p, a, b)) / (2 * h) == doctest::Approx(0.0).scale(1));
  std::vector<double> exact(50000), mh(50000);
  for (double& x : exact) x = gig_draw(rng, p, a, b);
  double x = m;
  int accepted = 0;
  for (double& v : mh) v = x = gig_mh(rng, p, a, b, x, 10, 1.0, &accepted);
  CHECK(accepted > 0);
  CHECK(stats::ks_test_two_sample(exact, mh).statistic < 0.02);
  CHECK_THROWS_AS(gig_draw(rng, 1.0, 0.0, 1.0), ValidationError);
}

TEST_CASE("split R-hat and ESS") {
  Rng rng = make_rng(54);
  SUBCASE("independent chains") {
    std::vector<std::vector<double>> ch(4, std::vector<double>(2000));
    for (auto& c : ch) {
      for (double& v : c) v = std_normal(rng);
    }
    CHECK(split_rhat(ch) == doctest::Approx(1.0).epsilon(0.01));
    const double ess = effective_sample_size(ch);
    CHECK(ess > 6000);
    CHECK(ess <= 8000);
  }
  SUBCASE("AR(1) chains have ESS near n (1 - phi) / (1 + phi)") {
    const double phi = 0.8;
    std::vector<std::vector<double>> ch(4, std::vector<double>(20000));
    for (auto& c : ch) {
      double x = std_normal(rng) / std::sqrt(1 - phi * phi);
      for (double& v : c) v = x = phi * x + std_normal(rng);
    }
    const double expect = 80000.0 * (1 - phi) / (1 + phi);
    CHECK(effective_sample_size(ch) == doctest::Approx(expect).epsilon(0.15));
  }
  SUBCASE("chains stuck apart are flagged") {
    std::vector<std::vector<double>> ch(2, std::vector<double>(500));
    for (int c = 0; c < 2; ++c) {
      for (double& v : ch[c]) v = 3.0 * c + 0.1 * std_normal(rng);
    }
    CHECK(split_rhat(ch) > 1.5);
  }
  SUBCASE("a trend within one chain is flagged by splitting") {
    std::vector<std::vector<double>> ch(1, std::vector<double>(1000));
    for (int t = 0; t < 1000; ++t) ch[0][t] = t / 100.0 + 0.1 * std_normal(rng);
    CHECK(split_rhat(ch) > 1.5);
  }
  SUBCASE("too short") {
    std::vector<std::vector<double>> ch(1, std::vector<double>(3, 0.0));
    CHECK_THROWS_AS(split_rhat(ch), ValidationError);
  }
}

TEST_CASE("parallel_for covers every index and passes exceptions on") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, [&](int k) { hits[k] += 1; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, [](int k) {
                    if (k == 7) throw NumericalError("boom");
                  }),
                  NumericalError);
}

TEST_CASE("random streams are reproducible and distinct") {
  Rng a = make_rng(5, {1}), b = make_rng(5, {1}), c = make_rng(5, {2});
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
}
