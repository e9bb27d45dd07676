#include "concord/sim_harness.hpp"

#include "concord/csv.hpp"
#include "concord/diagnostics.hpp"
#include "concord/errors.hpp"
#include "concord/model_core.hpp"
#include "concord/parallel.hpp"
#include "concord/stats.hpp"
#include "concord/svg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace concord {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    case Scenario::S3: return "S3";
    case Scenario::S4: return "S4";
    case Scenario::S5: return "S5";
    case Scenario::S6: return "S6";
    case Scenario::S7: return "S7";
    case Scenario::custom: return "custom";
  }
  return "custom";
}

Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5, Scenario::S6,
                     Scenario::S7}) {
    if (name == to_string(s)) return s;
  }
  throw ValidationError("unknown scenario '" + name + "' (expected S1..S7)");
}

SimSpec SimSpec::preset(Scenario scenario, std::uint64_t seed, double beta) {
  SimSpec s;
  s.scenario = scenario;
  s.seed = seed;
  s.beta = beta;
  double B = 5.0, G = 3.0;
  switch (scenario) {
    case Scenario::S1: B = 1.0; G = 1.0; break;
    case Scenario::S2:
    case Scenario::S3: break;
    case Scenario::S4: s.misspec = Misspec::scale_counts; s.lambda_range = {0.8, 1.2}; break;
    case Scenario::S5: s.misspec = Misspec::scale_counts; s.lambda_range = {0.4, 1.6}; break;
    case Scenario::S6: B = 1.0; s.misspec = Misspec::scale_rate; s.lambda_range = {0.8, 1.2}; break;
    case Scenario::S7: s.misspec = Misspec::scale_rate; s.lambda_range = {0.8, 1.2}; break;
    case Scenario::custom: throw ValidationError("custom scenarios have no preset");
  }
  s.B_true = Vector::Constant(s.N, B);
  s.G_true = Vector::Constant(s.M, G);
  if (scenario == Scenario::S3) s.G_true[0] = -2.0;
  return s;
}

void SimSpec::validate() const {
  if (N < 1 || M < 1) throw ValidationError("simulation needs N, M >= 1");
  if (B_true.size() != N || G_true.size() != M) throw ValidationError("true B, G do not match N, M");
  if (!(b_noise_sd >= 0.0)) throw ValidationError("b noise sd must be non-negative");
  if (!(lambda_range.first > 0.0) || lambda_range.second < lambda_range.first) {
    throw ValidationError("misspecification range must be positive and ordered");
  }
  if (!(tau > 0.0) || !(alpha > 0.0) || !(beta > 0.0)) throw ValidationError("prior settings must be positive");
}

SimulatedData generate(const SimSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng lambda_rng = make_rng(seed, {1});
  Rng count_rng = make_rng(seed, {2});
  Rng prior_rng = make_rng(seed, {3});
  const int N = spec.N;
  const int M = spec.M;

  SimulatedData out;
  out.lambda.resize(N, M);
  Matrix counts(N, M);
  const auto [lo, hi] = spec.lambda_range;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      const double lam = lo + (hi - lo) * uniform01(lambda_rng);
      out.lambda(i, j) = lam;
      double rate = std::exp(spec.B_true[i] + spec.G_true[j]);
      if (spec.misspec == Misspec::scale_rate) rate *= lam;
      double c = static_cast<double>(std::poisson_distribution<long long>(rate)(count_rng));
      if (spec.misspec == Misspec::scale_counts) c *= lam;
      counts(i, j) = c;
    }
  }
  const auto adjusted = adjust_zero_counts(counts);
  out.n_zero_adjusted = adjusted.n_modified;
  out.data = Dataset::from_counts(adjusted.counts);

  out.priors = Priors::uniform(N, 0.0, spec.tau, spec.alpha, spec.beta);
  for (int i = 0; i < N; ++i) out.priors.b[i] = spec.B_true[i] + spec.b_noise_sd * std_normal(prior_rng);

  out.truth.B = spec.B_true;
  out.truth.G = spec.G_true;
  out.truth.sigma2.resize(N);
  for (int i = 0; i < N; ++i) {
    double acc = 0.0;
    for (int j = 0; j < M; ++j) {
      const auto mm = zero_modified_moments(std::exp(spec.B_true[i] + spec.G_true[j]));
      acc += mm.variance / (mm.mean * mm.mean);
    }
    out.truth.sigma2[i] = acc / M;
  }
  return out;
}

std::vector<CoverageTable::Block> CoverageTable::blocks() const {
  std::vector<Block> out;
  auto make = [&](const std::string& label, int begin, int end) {
    if (end <= begin) return;
    Block b;
    b.label = label;
    b.min_coverage = 1.0;
    b.max_coverage = 0.0;
    for (int k = begin; k < end; ++k) {
      b.min_coverage = std::min(b.min_coverage, rows[k].coverage);
      b.max_coverage = std::max(b.max_coverage, rows[k].coverage);
      b.pooled_coverage += rows[k].coverage;
      b.mean_length += rows[k].mean_length;
    }
    b.pooled_coverage /= (end - begin);
    b.mean_length /= (end - begin);
    out.push_back(b);
  };
  make("B", 0, N);
  make("G1", N, N + 1);
  make("G2..GM", N + 1, N + M);
  return out;
}

std::string CoverageTable::to_csv() const {
  CsvTable t;
  t.header = {"parameter", "truth", "coverage", "mean_length", "sd_length"};
  for (const auto& r : rows) {
    t.rows.push_back({r.name, format_double(r.truth), format_double(r.coverage), format_double(r.mean_length),
                      format_double(r.sd_length)});
  }
  return t.to_string();
}

CoverageTable coverage_study(const SimSpec& spec, ModelKind model, int reps, const ChainConfig& chain) {
  spec.validate();
  chain.validate();
  if (reps < 1) throw ValidationError("coverage study needs reps >= 1");
  if (model_of(chain.algorithm) != model) {
    throw ValidationError("algorithm " + to_string(chain.algorithm) + " does not fit the " + to_string(model) +
                          " model");
  }
  const int N = spec.N;
  const int M = spec.M;
  const int P = N + M;

  struct RepResult {
    bool ok = false;
    std::string error;
    std::vector<char> covered;
    std::vector<double> length;
  };
  std::vector<RepResult> results(reps);
  parallel_for(reps, [&](int r) {
    RepResult& res = results[r];
    try {
      const auto sim = generate(spec, make_rng(spec.seed, {0xC0FFEEull, static_cast<std::uint64_t>(r)})());
      ChainConfig cfg = chain;
      cfg.seed = make_rng(chain.seed, {0xFEEDull, static_cast<std::uint64_t>(r)})();
      const auto draws = run_chain(cfg, sim.data, sim.priors);
      res.covered.resize(P);
      res.length.resize(P);
      for (int k = 0; k < P; ++k) {
        auto x = draws.trace(k);
        std::sort(x.begin(), x.end());
        const double lo = stats::quantile_sorted(x, 0.025);
        const double hi = stats::quantile_sorted(x, 0.975);
        const double truth = k < N ? spec.B_true[k] : spec.G_true[k - N];
        res.covered[k] = lo <= truth && truth <= hi;
        res.length[k] = hi - lo;
      }
      res.ok = true;
    } catch (const NumericalError& e) {
      res.error = "replicate " + std::to_string(r) + ": " + e.what();
    }
  });

  CoverageTable table;
  table.model = model;
  table.reps = reps;
  table.N = N;
  table.M = M;
  for (int k = 0; k < P; ++k) {
    CoverageRow row;
    row.name = k < N ? "B[" + std::to_string(k + 1) + "]" : "G[" + std::to_string(k - N + 1) + "]";
    row.truth = k < N ? spec.B_true[k] : spec.G_true[k - N];
    table.rows.push_back(row);
  }
  std::vector<std::vector<double>> lengths(P);
  int ok = 0;
  for (const auto& res : results) {
    if (!res.ok) {
      ++table.failures;
      table.failure_messages.push_back(res.error);
      continue;
    }
    ++ok;
    for (int k = 0; k < P; ++k) {
      table.rows[k].coverage += res.covered[k];
      lengths[k].push_back(res.length[k]);
    }
  }
  if (ok == 0) throw NumericalError("every coverage replicate failed");
  for (int k = 0; k < P; ++k) {
    table.rows[k].coverage /= ok;
    table.rows[k].mean_length = stats::mean(lengths[k]);
    table.rows[k].sd_length = stats::sd(lengths[k]);
  }
  return table;
}

namespace {

std::string posterior_histogram_csv(const PosteriorDraws& draws, int n_instruments, int bins,
                                    std::vector<std::vector<double>>& edges_out,
                                    std::vector<std::vector<double>>& counts_out) {
  CsvTable t;
  t.header = {"parameter", "bin_lo", "bin_hi", "count"};
  for (int i = 0; i < n_instruments; ++i) {
    const auto x = draws.trace(i);
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    double lo = *mn, hi = *mx;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    std::vector<double> edges(bins + 1), counts(bins, 0.0);
    for (int b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * b / bins;
    for (double v : x) {
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      counts[std::clamp(b, 0, bins - 1)] += 1.0;
    }
    for (int b = 0; b < bins; ++b) {
      t.rows.push_back({"B[" + std::to_string(i + 1) + "]", format_double(edges[b]), format_double(edges[b + 1]),
                        format_double(counts[b])});
    }
    edges_out.push_back(std::move(edges));
    counts_out.push_back(std::move(counts));
  }
  return t.to_string();
}

void emit_fit(const std::string& tag, const SimulatedData& sim, const PosteriorDraws& draws,
              const std::filesystem::path& dir, ReportBundle& bundle) {
  const int N = sim.data.n_instruments();
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    write_text(path, text);
    bundle.files.push_back(path);
  };

  std::vector<std::vector<double>> edges, counts;
  put(tag + "_B_histograms.csv", posterior_histogram_csv(draws, N, 30, edges, counts));
  for (int i = 0; i < N; ++i) {
    put(tag + "_B" + std::to_string(i + 1) + "_histogram.svg",
        svg::histogram(edges[i], counts[i], tag + " posterior of B[" + std::to_string(i + 1) + "]",
                       sim.truth.B[i]));
  }

  const auto summaries = summarize(draws);
  CsvTable iv;
  iv.header = {"parameter", "truth", "mean", "sd", "q2.5", "q97.5"};
  std::vector<svg::Interval> rows;
  for (int k = 0; k < N + sim.data.n_sources(); ++k) {
    const double truth = k < N ? sim.truth.B[k] : sim.truth.G[k - N];
    const auto& s = summaries[k];
    iv.rows.push_back({s.name, format_double(truth), format_double(s.mean), format_double(s.sd),
                       format_double(s.q025), format_double(s.q975)});
    if (k < N) rows.push_back({s.name, s.mean - truth, s.q025 - truth, s.q975 - truth, 0.0});
  }
  put(tag + "_intervals.csv", iv.to_string());
  put(tag + "_B_intervals.svg", svg::interval_plot(rows, tag + ": 95% intervals of B minus truth"));

  const ModelKind model = draws.model;
  const auto res = standardized_residuals(draws.posterior_mean(), sim.data, sim.priors, model);
  CsvTable rt;
  rt.header = {"source"};
  for (int i = 0; i < N; ++i) rt.header.push_back("instrument_" + std::to_string(i + 1));
  std::vector<std::vector<double>> panel(N);
  for (int j = 0; j < sim.data.n_sources(); ++j) {
    std::vector<std::string> row{"source_" + std::to_string(j + 1)};
    for (int i = 0; i < N; ++i) {
      row.push_back(format_double(res.values(i, j)));
      panel[i].push_back(res.values(i, j));
    }
    rt.rows.push_back(std::move(row));
  }
  put(tag + "_residuals.csv", rt.to_string());
  put(tag + "_residuals.svg", svg::residual_panel(panel, tag + " standardized residuals", 2.0));
}

}  // namespace

ReportBundle reproduce_figures(const std::vector<SimSpec>& specs, const std::filesystem::path& outputs,
                               const ChainConfig& chain) {
  ReportBundle bundle;
  if (specs.empty()) return bundle;
  std::error_code ec;
  std::filesystem::create_directories(outputs, ec);
  if (ec || !std::filesystem::is_directory(outputs)) {
    throw ValidationError("cannot create output directory '" + outputs.string() + "'");
  }
  for (const auto& spec : specs) {
    const auto sim = generate(spec);
    const std::string name = to_string(spec.scenario);
    write_text(outputs / (name + "_counts.csv"), dataset_counts_csv(sim.data));
    bundle.files.push_back(outputs / (name + "_counts.csv"));

    ChainConfig ln = chain;
    if (model_of(ln.algorithm) != ModelKind::lognormal) ln.algorithm = Algorithm::block_gibbs;
    emit_fit(name + "_lognormal", sim, run_chain(ln, sim.data, sim.priors), outputs, bundle);
    if (spec.scenario == Scenario::S3) {
      ChainConfig lt = chain;
      if (model_of(lt.algorithm) != ModelKind::logt) lt.algorithm = Algorithm::gibbs_t;
      emit_fit(name + "_logt", sim, run_chain(lt, sim.data, sim.priors), outputs, bundle);
    }
  }
  return bundle;
}

}  // namespace concord
