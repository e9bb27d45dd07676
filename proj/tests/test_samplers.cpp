#include "oracles.hpp"

#include "concord/errors.hpp"
#include "concord/gaussian_layer.hpp"
#include "concord/hmc.hpp"
#include "concord/mcmc_stats.hpp"
#include "concord/model_core.hpp"
#include "concord/samplers.hpp"
#include "concord/sim_harness.hpp"
#include "concord/stats.hpp"

#include <doctest.h>

using namespace concord;

namespace {

Dataset small_data() {
  Matrix y(3, 5);
  y << 2.1, 3.0, 1.2, 2.6, 0.4,  //
      2.0, 3.2, 1.1, 2.4, 0.5,   //
      2.3, 2.9, 1.4, 2.7, 0.2;
  return Dataset::from_log_data(y);
}

// Counts transitions between the terciles of a scalar summary; a reversible
// kernel at stationarity moves a -> b as often as b -> a.
double worst_asymmetry(const std::vector<double>& x) {
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const double t1 = stats::quantile_sorted(s, 1.0 / 3), t2 = stats::quantile_sorted(s, 2.0 / 3);
  auto bin = [&](double v) { return v < t1 ? 0 : (v < t2 ? 1 : 2); };
  double n[3][3] = {};
  for (std::size_t t = 1; t < x.size(); ++t) n[bin(x[t - 1])][bin(x[t])] += 1;
  double worst = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const double tot = n[a][b] + n[b][a];
      if (tot > 0) worst = std::max(worst, std::abs(n[a][b] - n[b][a]) / std::sqrt(tot));
    }
  }
  return worst;  // in units of the binomial MC error
}

double total_variation(const std::vector<double>& draws, const std::function<double(double)>& cdf, double lo,
                       double hi, int bins) {
  std::vector<double> h(bins, 0.0);
  for (double v : draws) {
    const int k = static_cast<int>((v - lo) / (hi - lo) * bins);
    if (k >= 0 && k < bins) h[k] += 1.0 / draws.size();
  }
  double tv = 0.0;
  for (int k = 0; k < bins; ++k) {
    const double a = lo + (hi - lo) * k / bins, b = lo + (hi - lo) * (k + 1) / bins;
    tv += std::abs(h[k] - (cdf(b) - cdf(a)));
  }
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("algorithm and model names") {
  CHECK(parse_algorithm("block-gibbs") == Algorithm::block_gibbs);
  CHECK(parse_algorithm("block_gibbs") == Algorithm::block_gibbs);
  CHECK(parse_algorithm("hmc-t") == Algorithm::hmc_t);
  CHECK(model_of(Algorithm::gibbs_t) == ModelKind::logt);
  CHECK(model_of(Algorithm::marginal) == ModelKind::lognormal);
  CHECK(parse_model("logt") == ModelKind::logt);
  CHECK_THROWS_AS(parse_algorithm("nuts"), ValidationError);
  ChainConfig c;
  c.n_samples = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("Gibbs B conditional") {
  Rng rng = make_rng(61);
  SUBCASE("one observation, unit variances") {
    // y' - G = 2 with y = 1.5, G = 0, sigma^2 = 1
    const auto d = Dataset::from_log_data(Matrix::Constant(1, 1, 1.5));
    const Priors p = Priors::uniform(1, 0.0, 1.0, 2.0, 0.01);
    ParamState s{Vector::Zero(1), Vector::Zero(1), Vector::Ones(1), std::nullopt};
    std::vector<double> b(200000);
    for (double& v : b) {
      gibbs_step_B(s, d, p, rng);
      v = s.B[0];
    }
    CHECK(stats::mean(b) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(stats::variance(b) == doctest::Approx(0.5).epsilon(0.01));
  }
  SUBCASE("tight prior pins the draw") {
    const auto d = small_data();
    Priors p = Priors::uniform(3, 0.0, 1e-6, 2.0, 0.01);
    p.b << 0.3, -0.1, 0.2;
    ParamState s{Vector::Zero(3), Vector::Constant(5, 2.0), Vector::Constant(3, 0.04), std::nullopt};
    for (int k = 0; k < 10; ++k) gibbs_step_B(s, d, p, rng);
    CHECK((s.B - p.b).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("Gibbs G conditional") {
  Rng rng = make_rng(62);
  SUBCASE("single instrument") {
    const auto d = Dataset::from_log_data(Matrix::Constant(1, 1, 1.5));
    const Priors p = Priors::uniform(1, 0.0, 1.0, 2.0, 0.01);
    ParamState s{Vector::Constant(1, 0.5), Vector::Zero(1), Vector::Constant(1, 0.25), std::nullopt};
    std::vector<double> g(200000);
    for (double& v : g) {
      gibbs_step_G(s, d, p, rng);
      v = s.G[0];
    }
    CHECK(stats::mean(g) == doctest::Approx(1.5 + 0.125 - 0.5).epsilon(0.005));
    CHECK(stats::variance(g) == doctest::Approx(0.25).epsilon(0.01));
  }
  SUBCASE("equal variances centre on the arithmetic mean") {
    const auto d = small_data();
    const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
    ParamState s{Vector::Zero(3), Vector::Zero(5), Vector::Constant(3, 1e-14), std::nullopt};
    gibbs_step_G(s, d, p, rng);
    const Matrix y = d.log_data();
    for (int j = 0; j < 5; ++j) CHECK(s.G[j] == doctest::Approx(y.col(j).mean()).epsilon(1e-6));
  }
}

TEST_CASE("sigma^2 random-walk kernel") {
  Rng rng = make_rng(63);
  Matrix y(1, 4);
  y << 0.3, 0.5, 0.1, 0.45;
  const auto d = Dataset::from_log_data(y);
  const Priors p = Priors::uniform(1, 0.0, 0.1, 2.0, 0.01);
  ParamState s{Vector::Constant(1, 0.1), Vector::Constant(4, 0.2), Vector::Constant(1, 0.02), std::nullopt};

  SUBCASE("tiny proposals are almost always accepted") {
    int acc = 0;
    for (int t = 0; t < 5000; ++t) acc += gibbs_step_sigma2(s, d, p, rng, 1e-6);
    CHECK(acc > 4990);
    CHECK(s.sigma2[0] == doctest::Approx(0.02).epsilon(1e-3));
  }

  SUBCASE("full target against quadrature in total variation") {
    const double rss = (y.array() - 0.3).square().sum();
    std::vector<double> u;
    for (int t = 0; t < 1000 + 100000 * 5; ++t) {
      gibbs_step_sigma2(s, d, p, rng, 1.2);
      if (t >= 1000 && (t - 1000) % 5 == 4) u.push_back(std::log(s.sigma2[0]));
    }
    const auto cdf = oracle::grid_cdf(
        [&](double v) {
          const double x = std::exp(v);
          return -0.5 * (4.0 + 2.0 + 4.0) * v - (rss + 0.02) / (2 * x) - 4.0 * x / 8.0 + v;
        },
        -15.0, 3.0, 40000);
    CHECK(total_variation(u, cdf, -9.0, 0.0, 40) < 0.03);
    CHECK(worst_asymmetry(u) < 4.0);
  }
}

TEST_CASE("block draws") {
  Rng rng = make_rng(64);
  const auto d = small_data();
  Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  const Vector s2 = (Vector(3) << 0.01, 0.02, 0.05).finished();
  const auto c = conditional_mean_cov(d, p, s2);
  ParamState s{Vector::Zero(3), Vector::Zero(5), s2, std::nullopt};
  const int n = 100000;
  Matrix draws(n, 8);
  for (int t = 0; t < n; ++t) {
    block_gibbs_step(s, d, p, rng);
    draws.row(t) << s.B.transpose(), s.G.transpose();
  }
  const Vector mean = draws.colwise().mean();
  const Matrix centred = draws.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / (n - 1);
  for (int k = 0; k < 8; ++k) {
    const double se = std::sqrt(c.covariance(k, k) / n);
    CHECK(std::abs(mean[k] - c.mean[k]) < 4 * se);
    // the sd of a sample variance is about var * sqrt(2 / n)
    CHECK(std::abs(cov(k, k) - c.covariance(k, k)) < 4 * c.covariance(k, k) * std::sqrt(2.0 / n));
  }
  CHECK(std::abs(cov(0, 3) - c.covariance(0, 3)) <
        4 * std::sqrt((c.covariance(0, 0) * c.covariance(3, 3) + c.covariance(0, 3) * c.covariance(0, 3)) / n));

  SUBCASE("tight prior pins B") {
    Priors tight = Priors::uniform(3, 0.2, 1e-7, 2.0, 0.01);
    block_gibbs_step(s, d, tight, rng);
    CHECK((s.B.array() - 0.2).abs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("independence sampler") {
  Rng rng = make_rng(65);
  const auto d = small_data();
  const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);

  SUBCASE("proposal shapes") {
    const Vector sh = independence_proposal_shapes(d, p);
    // complete 3 x 5: |J| = 5, each |I_j| = 3
    CHECK(sh[0] == doctest::Approx(2.0 + (5.0 - 5.0 / 3.0) / 2.0));
  }

  SUBCASE("a target equal to the proposal always accepts") {
    const Vector sh = independence_proposal_shapes(d, p);
    Sigma2VectorLogTarget same = [&](const Vector& s2) {
      double v = 0.0;
      for (int i = 0; i < s2.size(); ++i) v += -(sh[i] + 1) * std::log(s2[i]) - p.beta / s2[i];
      return v;
    };
    ParamState s{Vector::Zero(3), Vector::Zero(5), Vector::Constant(3, 0.01), std::nullopt};
    int acc = 0;
    for (int t = 0; t < 2000; ++t) acc += mh_sigma2_independence(s, d, p, rng, same);
    CHECK(acc == 2000);
  }

  SUBCASE("kernel alone is reversible for the marginal") {
    ParamState s{Vector::Zero(3), Vector::Zero(5), Vector::Constant(3, 0.01), std::nullopt};
    std::vector<double> x;
    for (int t = 0; t < 60000; ++t) {
      mh_sigma2_independence(s, d, p, rng);
      x.push_back(std::log(s.sigma2[0]));
    }
    CHECK(worst_asymmetry(x) < 4.0);
  }

  SUBCASE("acceptance on Simulation-II data") {
    const auto sim = generate(SimSpec::preset(Scenario::S2, 17));
    ChainConfig cfg;
    cfg.algorithm = Algorithm::marginal;
    cfg.n_chains = 1;
    cfg.n_warmup = 200;
    cfg.n_samples = 500;
    const auto draws = run_chain(cfg, sim.data, sim.priors);
    // Pilot threshold, recorded only. The Inv-Gamma proposal sits left of the
    // target here and the chain rarely moves.
    const double rate = draws.acceptance_rates.at("sigma2_independence");
    MESSAGE("independence acceptance on Simulation-II: " << rate);
    CHECK(std::isfinite(rate));
  }
}

TEST_CASE("latent weights") {
  Rng rng = make_rng(66);
  SUBCASE("small kappa pushes outlier weights towards zero") {
    Matrix y(1, 1);
    y << 1.0;
    const auto d = Dataset::from_log_data(y);
    double last = INFINITY;
    for (double kappa : {0.5, 0.1, 0.02}) {
      Priors p = Priors::uniform(1, 0.0, 0.1, 2.0, 0.01);
      p.kappa = kappa;
      ParamState s{Vector::Zero(1), Vector::Constant(1, 0.5), Vector::Constant(1, kappa * kappa),
                   Matrix::Constant(1, 1, 4.0)};
      std::vector<double> xi(20000);
      for (double& v : xi) {
        logt_xi_step(s, d, p, rng);
        v = (*s.xi)(0, 0);
      }
      const double m = stats::mean(xi);
      CHECK(m < last);
      last = m;
    }
    CHECK(last < 0.01);
  }

  SUBCASE("MH variant is reversible") {
    Matrix y(1, 1);
    y << 0.7;
    const auto d = Dataset::from_log_data(y);
    const Priors p = Priors::uniform(1, 0.0, 0.1, 2.0, 0.01);
    ParamState s{Vector::Constant(1, 0.2), Vector::Constant(1, 0.4), Vector::Constant(1, 0.02),
                 Matrix::Constant(1, 1, 4.0)};
    XiStepOptions o;
    o.method = XiUpdate::mh;
    o.mh_steps = 1;
    std::vector<double> x;
    for (int t = 0; t < 60000; ++t) {
      logt_xi_step(s, d, p, rng, o);
      x.push_back((*s.xi)(0, 0));
    }
    CHECK(worst_asymmetry(x) < 4.0);
  }

  SUBCASE("outlying source gets small weights on Simulation-III data") {
    const auto sim = generate(SimSpec::preset(Scenario::S3, 5));
    ChainConfig cfg;
    cfg.algorithm = Algorithm::gibbs_t;
    cfg.n_chains = 1;
    cfg.n_warmup = 200;
    cfg.n_samples = 500;
    const auto pm = run_chain(cfg, sim.data, sim.priors).posterior_mean();
    const Matrix& xi = *pm.xi;
    CHECK(xi.col(0).mean() < 0.6 * xi.rightCols(39).mean());
    CHECK(xi.col(0).minCoeff() < 0.25 * xi.rightCols(39).mean());
  }
}

TEST_CASE("leapfrog is second order") {
  const auto d = small_data();
  const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  const LogNormalTarget target(d, p);
  Rng rng = make_rng(67);
  ParamState s = initial_state(d, p, ModelKind::lognormal, rng);
  s.sigma2.setConstant(0.01);
  const Vector q0 = target.pack(s);
  const Vector inv_mass = Vector::Ones(target.dim());
  auto mean_error = [&](double eps, int L) {
    Rng r = make_rng(1);
    double tot = 0.0;
    for (int k = 0; k < 50; ++k) {
      Vector q = q0, p0(q0.size());
      for (int i = 0; i < p0.size(); ++i) p0[i] = std_normal(r);
      Vector grad;
      const double h0 = target.log_density(q, grad) - 0.5 * p0.squaredNorm();
      Vector pm = p0;
      const double lp = leapfrog(target, q, pm, grad, eps, inv_mass, L);
      tot += std::abs((lp - 0.5 * pm.squaredNorm()) - h0);
    }
    return tot / 50;
  };
  const double coarse = mean_error(0.004, 10), fine = mean_error(0.0004, 100);
  CHECK(coarse / fine > 50.0);
  CHECK(coarse / fine < 200.0);
}

TEST_CASE("HMC on a Gaussian target") {
  const auto d = small_data();
  const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  const Vector s2 = (Vector(3) << 0.01, 0.02, 0.05).finished();
  const FixedVarianceTarget target(d, p, s2);
  const auto c = conditional_mean_cov(d, p, s2);
  HmcSettings set;
  set.n_warmup = 1000;
  set.n_samples = 20000;
  set.n_leapfrog = 16;
  Rng rng = make_rng(68);
  const auto run = hmc_run(target, c.mean, set, rng);
  CHECK(run.divergences == 0);
  CHECK(run.accept_rate > 0.6);
  for (int k = 0; k < 8; ++k) {
    std::vector<std::vector<double>> ch(1);
    for (int t = 0; t < run.draws.rows(); ++t) ch[0].push_back(run.draws(t, k));
    const double ess = effective_sample_size(ch);
    const double se = std::sqrt(c.covariance(k, k) / ess);
    CHECK(std::abs(stats::mean(ch[0]) - c.mean[k]) < 4 * se);
    CHECK(stats::variance(ch[0]) == doctest::Approx(c.covariance(k, k)).epsilon(0.1));
  }
}

TEST_CASE("HMC failure modes") {
  const auto d = small_data();
  const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  const LogNormalTarget target(d, p);
  Rng rng = make_rng(69);
  Vector q0 = target.pack(initial_state(d, p, ModelKind::lognormal, rng));

  SUBCASE("huge fixed steps diverge and are counted") {
    HmcSettings set;
    set.adapt = false;
    set.step_size = 5.0;
    set.n_warmup = 0;
    set.n_samples = 20;
    set.jitter = 0.0;
    const auto run = hmc_run(target, q0, set, rng);
    CHECK(run.divergences > 0);
    CHECK(run.draws.allFinite());
  }
  SUBCASE("non-finite start aborts") {
    q0[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(hmc_run(target, q0, HmcSettings{}, rng), NumericalError);
  }
}

TEST_CASE("dual averaging settles near the target acceptance") {
  DualAverage da(1.0, 0.8);
  double eps = 1.0;
  // synthetic acceptance curve exp(-eps)
  for (int t = 0; t < 2000; ++t) eps = da.update(std::exp(-eps));
  CHECK(da.final_step() == doctest::Approx(-std::log(0.8)).epsilon(0.05));
}

TEST_CASE("log-t target packs and unpacks") {
  Mask m = Mask::Constant(2, 3, true);
  m(1, 0) = false;
  Matrix y(2, 3);
  y << 1, 2, 3, 4, 5, 6;
  const auto d = Dataset::from_log_data(y, m);
  const Priors p = Priors::uniform(2, 0.0, 0.1, 2.0, 0.01);
  const LogTTarget target(d, p);
  CHECK(target.dim() == 2 + 3 + 5);
  Rng rng = make_rng(70);
  ParamState s = initial_state(d, p, ModelKind::logt, rng);
  (*s.xi)(0, 2) = 1.7;
  const ParamState back = target.unpack(target.pack(s));
  CHECK((back.B - s.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((*back.xi)(0, 2) == doctest::Approx(1.7).epsilon(1e-14));
  Vector grad;
  const Vector q = target.pack(s);
  const double lp = target.log_density(q, grad);
  // gradient in log xi includes the Jacobian
  auto f = [&](const oracle::Vec& v) {
    Vector g;
    return target.log_density(v, g);
  };
  const auto fd = oracle::fd_gradient(f, q, 1e-6);
  CHECK(std::isfinite(lp));
  CHECK((fd - grad).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
}

TEST_CASE("log-Normal HMC target gradient") {
  const auto d = small_data();
  const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  const LogNormalTarget target(d, p);
  Rng rng = make_rng(71);
  const Vector q = target.pack(initial_state(d, p, ModelKind::lognormal, rng));
  Vector grad;
  target.log_density(q, grad);
  auto f = [&](const oracle::Vec& v) {
    Vector g;
    return target.log_density(v, g);
  };
  const auto fd = oracle::fd_gradient(f, q, 1e-6);
  CHECK((fd - grad).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
}

TEST_CASE("run_chain plumbing") {
  const auto d = small_data();
  const Priors p = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 100;
  cfg.n_samples = 200;
  cfg.seed = 77;

  SUBCASE("deterministic under a fixed seed for every algorithm") {
    for (Algorithm a : {Algorithm::gibbs, Algorithm::block_gibbs, Algorithm::marginal, Algorithm::hmc,
                        Algorithm::hmc_t, Algorithm::gibbs_t}) {
      cfg.algorithm = a;
      const auto x = run_chain(cfg, d, p), y = run_chain(cfg, d, p);
      REQUIRE(x.size() == 400);
      bool same = true;
      for (std::size_t k = 0; k < x.size(); ++k) {
        same = same && x.states[k].B == y.states[k].B && x.states[k].G == y.states[k].G &&
               x.states[k].sigma2 == y.states[k].sigma2;
      }
      CHECK_MESSAGE(same, to_string(a));
      for (const auto& s : x.states) {
        CHECK((s.sigma2.array() > 0).all());
        CHECK(s.B.allFinite());
        if (s.xi) CHECK((s.xi->array() > 0).all());
      }
      for (int k = 0; k < x.n_parameters(); ++k) CHECK(x.ess[k] <= 400.0);
    }
  }

  SUBCASE("one draw without warmup") {
    cfg.n_warmup = 0;
    cfg.n_samples = 1;
    cfg.n_chains = 1;
    ParamState init{Vector::Zero(3), Vector::Constant(5, 2.0), Vector::Constant(3, 0.01), std::nullopt};
    const auto x = run_chain(cfg, d, p, init);
    CHECK(x.size() == 1);
    CHECK(x.chain_id[0] == 0);
  }

  SUBCASE("parameter naming and means") {
    cfg.algorithm = Algorithm::block_gibbs;
    const auto x = run_chain(cfg, d, p);
    CHECK(x.parameter_names.front() == "B[1]");
    CHECK(x.parameter_names.back() == "sigma2[3]");
    CHECK(x.n_parameters() == 3 + 5 + 3);
    const auto pm = x.posterior_mean();
    CHECK(pm.B[1] == doctest::Approx(stats::mean(x.trace(1))));
  }

  SUBCASE("poor mixing raises a warning") {
    cfg.algorithm = Algorithm::gibbs;
    cfg.n_warmup = 0;
    cfg.n_samples = 20;
    cfg.n_chains = 4;
    Priors flat = p;
    flat.tau2.setConstant(1e6);
    const auto x = run_chain(cfg, d, flat);
    CHECK_FALSE(x.warnings.empty());
  }
}

namespace {

// Same data under tau^2 = sigma^2 and tau^2 = 100 sigma^2.
std::pair<PosteriorDraws, PosteriorDraws> tight_and_loose(Algorithm alg) {
  Rng rng = make_rng(72);
  const Vector s2 = Vector::Constant(3, 0.01);
  Matrix y(3, 5);
  for (int k = 0; k < y.size(); ++k) y(k) = 2.0 + 0.1 * std_normal(rng);
  const auto d = Dataset::from_log_data(y);
  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 300;
  cfg.n_samples = 3000;
  cfg.algorithm = alg;
  Priors tight = Priors::uniform(3, 0.0, 0.1, 2.0, 0.01);
  Priors loose = tight;
  tight.tau2 = s2;
  loose.tau2 = 100.0 * s2;
  return {run_chain(cfg, d, tight), run_chain(cfg, d, loose)};
}

}  // namespace

TEST_CASE("weak priors slow one-at-a-time Gibbs down") {
  const auto [a, b] = tight_and_loose(Algorithm::gibbs);
  for (int k = 0; k < 8; ++k) CHECK(b.ess[k] < a.ess[k]);
}

// Known to fail: the joint (B, G) draw is exact given sigma^2, so the ridge
// costs block Gibbs nothing. Registered as its own ctest entry.
TEST_CASE("weak priors slow block Gibbs down") {
  const auto [a, b] = tight_and_loose(Algorithm::block_gibbs);
  // B[1] is index 0
  CHECK(b.ess[0] < a.ess[0]);
  CHECK(b.ess.sum() < a.ess.sum());
}
