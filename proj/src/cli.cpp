#include "concord/cli.hpp"

#include "concord/csv.hpp"
#include "concord/diagnostics.hpp"
#include "concord/errors.hpp"
#include "concord/map_solver.hpp"
#include "concord/report.hpp"
#include "concord/samplers.hpp"
#include "concord/sim_harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef CONCORD_VERSION
#define CONCORD_VERSION "unknown"
#endif

namespace concord {

using nlohmann::json;

namespace {

struct PriorOptions {
  std::string b = "0";
  std::string tau = "0.05";
  double alpha = 1.5;
  std::optional<double> beta;
  std::optional<double> kappa;
  std::optional<double> nu;
};

struct ChainOptions {
  int samples = 1000;
  int warmup = 500;
  int chains = 4;
  std::uint64_t seed = 1;
  std::string model = "lognormal";
  std::string algorithm;
  double step_size = 0.1;
  int leapfrog = 32;
  double mh_scale = 0.3;
  std::string xi_update = "gig";
};

void add_prior_options(CLI::App* app, PriorOptions& p) {
  app->add_option("--b", p.b, "Prior means b_i of B = log A (one value or a comma list per instrument)");
  app->add_option("--tau", p.tau, "Prior sds tau_i (one value or a comma list; 'inf' for none)");
  app->add_option("--alpha", p.alpha, "Inverse-Gamma shape for sigma^2");
  app->add_option("--beta", p.beta, "Inverse-Gamma scale for sigma^2 (required)");
  app->add_option("--kappa", p.kappa, "log-t scale (default sqrt(2 beta))");
  app->add_option("--nu", p.nu, "log-t degrees of freedom (default 2 alpha)");
}

void add_chain_options(CLI::App* app, ChainOptions& c, bool with_model) {
  app->add_option("--samples", c.samples, "Post-warmup draws per chain");
  app->add_option("--warmup", c.warmup, "Warmup iterations per chain");
  app->add_option("--chains", c.chains, "Number of chains");
  if (with_model) {
    app->add_option("--model", c.model, "lognormal or logt")->check(CLI::IsMember({"lognormal", "logt"}));
  }
  app->add_option("--algorithm", c.algorithm, "gibbs, block-gibbs, marginal, hmc, hmc-t or gibbs-t");
  app->add_option("--step-size", c.step_size, "Initial HMC step size");
  app->add_option("--leapfrog", c.leapfrog, "Leapfrog steps per HMC iteration");
  app->add_option("--mh-scale", c.mh_scale, "sd of the log sigma^2 random walk");
  app->add_option("--xi-update", c.xi_update, "gig or mh")->check(CLI::IsMember({"gig", "mh"}));
}

std::vector<double> parse_list(const std::string& text, int n, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_double(item));
  if (v.size() == 1) v.assign(n, v.front());
  if (static_cast<int>(v.size()) != n) {
    throw ValidationError(what + " needs one value or one per instrument (" + std::to_string(n) + ")");
  }
  return v;
}

Priors make_priors(const PriorOptions& p, int N, ModelKind model) {
  if (!p.beta) throw ValidationError("--beta is required; there is no universal default for the variance prior");
  if (model == ModelKind::lognormal && (p.kappa || p.nu)) {
    throw ValidationError("--kappa and --nu only apply to the log-t model; conflicting model options");
  }
  Priors pr;
  const auto b = parse_list(p.b, N, "--b");
  const auto tau = parse_list(p.tau, N, "--tau");
  pr.b = Vector::Map(b.data(), N);
  pr.tau2.resize(N);
  for (int i = 0; i < N; ++i) pr.tau2[i] = tau[i] * tau[i];
  pr.alpha = p.alpha;
  pr.beta = *p.beta;
  pr.kappa = p.kappa;
  pr.nu = p.nu;
  pr.validate(N);
  return pr;
}

json priors_json(const Priors& p) {
  json j;
  j["b"] = std::vector<double>(p.b.data(), p.b.data() + p.b.size());
  std::vector<json> tau;
  for (Eigen::Index i = 0; i < p.tau2.size(); ++i) {
    const double t = std::sqrt(p.tau2[i]);
    tau.push_back(std::isfinite(t) ? json(t) : json("inf"));
  }
  j["tau"] = tau;
  j["alpha"] = p.alpha;
  j["beta"] = p.beta;
  j["kappa"] = p.kappa_value();
  j["nu"] = p.nu_value();
  return j;
}

ChainConfig make_chain(const ChainOptions& c, ModelKind model) {
  ChainConfig cfg;
  cfg.n_samples = c.samples;
  cfg.n_warmup = c.warmup;
  cfg.n_chains = c.chains;
  cfg.seed = c.seed;
  cfg.step_size = c.step_size;
  cfg.n_leapfrog = c.leapfrog;
  cfg.mh_scale = c.mh_scale;
  cfg.xi_update = c.xi_update == "mh" ? XiUpdate::mh : XiUpdate::gig;
  if (c.algorithm.empty()) {
    cfg.algorithm = model == ModelKind::logt ? Algorithm::gibbs_t : Algorithm::block_gibbs;
  } else {
    cfg.algorithm = parse_algorithm(c.algorithm);
    if (model_of(cfg.algorithm) != model) {
      throw ValidationError("algorithm " + c.algorithm + " conflicts with model " + to_string(model));
    }
  }
  cfg.validate();
  return cfg;
}

json chain_json(const ChainConfig& c) {
  return {{"algorithm", to_string(c.algorithm)}, {"n_samples", c.n_samples}, {"n_warmup", c.n_warmup},
          {"n_chains", c.n_chains},              {"seed", c.seed},           {"step_size", c.step_size},
          {"n_leapfrog", c.n_leapfrog},          {"mh_scale", c.mh_scale},
          {"target_accept", c.target_accept},    {"xi_update", c.xi_update == XiUpdate::mh ? "mh" : "gig"}};
}

json base_provenance(const std::string& command) {
  return {{"tool", "concord"}, {"version", CONCORD_VERSION}, {"command", command}};
}

LoadedDataset load(const std::string& counts, const std::string& factors, bool transpose, std::ostream& err) {
  auto loaded = load_dataset(counts, factors, transpose);
  for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
  return loaded;
}

json input_json(const std::string& counts, const std::string& factors, bool transpose) {
  return {{"counts", counts}, {"factors", factors.empty() ? json(nullptr) : json(factors)}, {"transpose", transpose}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concordance adjustment of instrument effective areas"};
  app.set_version_flag("--version", std::string(CONCORD_VERSION));
  app.require_subcommand(1);

  std::string counts, factors, out_dir, draws_path, formats = "csv,json,svg";
  bool transpose = false;
  PriorOptions prior_opts;
  ChainOptions chain_opts;

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--counts", counts, "Counts CSV (sources as rows, instruments as columns)")->required();
    sub->add_option("--factors", factors, "Known factors T_ij with the same layout (default 1)");
    sub->add_flag("--transpose", transpose, "Input has instruments as rows");
  };

  auto* fit = app.add_subcommand("fit", "Sample the posterior and write summaries, residuals and checks");
  add_input(fit);
  add_prior_options(fit, prior_opts);
  add_chain_options(fit, chain_opts, true);
  fit->add_option("--seed", chain_opts.seed, "Random seed");
  fit->add_option("--out", out_dir, "Output directory")->required();
  fit->add_option("--formats", formats, "Comma list of csv, json, svg");

  auto* map = app.add_subcommand("map", "Posterior mode by the shrinkage fixed point");
  add_input(map);
  add_prior_options(map, prior_opts);
  std::string rule_name = "exact";
  int max_iter = 500;
  double tol = 1e-10;
  map->add_option("--rule", rule_name, "Variance update: exact or closed-form")
      ->check(CLI::IsMember({"exact", "closed-form"}));
  map->add_option("--max-iter", max_iter, "Iteration cap");
  map->add_option("--tol", tol, "Convergence tolerance on the max-abs change");
  map->add_option("--out", out_dir, "Output directory (prints the instrument table when omitted)");

  auto* simulate = app.add_subcommand("simulate", "Generate a simulated dataset");
  std::string scenario = "S2";
  double sim_beta = 0.01;
  simulate->add_option("--scenario", scenario, "S1..S7");
  simulate->add_option("--seed", chain_opts.seed, "Random seed");
  simulate->add_option("--beta", sim_beta, "Inverse-Gamma scale used for the priors");
  simulate->add_option("--out", out_dir, "Output directory (prints the counts when omitted)");

  auto* coverage = app.add_subcommand("coverage", "Interval coverage over simulated replicates");
  int reps = 200;
  coverage->add_option("--scenario", scenario, "S1..S7");
  coverage->add_option("--reps", reps, "Number of replicates");
  coverage->add_option("--beta", sim_beta, "Inverse-Gamma scale used for the priors");
  coverage->add_option("--seed", chain_opts.seed, "Random seed");
  add_chain_options(coverage, chain_opts, true);
  coverage->add_option("--out", out_dir, "Output directory (prints the table when omitted)");

  auto* check = app.add_subcommand("check", "Diagnostics for saved draws");
  add_input(check);
  add_prior_options(check, prior_opts);
  check->add_option("--draws", draws_path, "draws.csv written by fit")->required();
  check->add_option("--seed", chain_opts.seed, "Seed of the predictive replicates");
  check->add_option("--out", out_dir, "Output directory")->required();
  check->add_option("--formats", formats, "Comma list of csv, json, svg");

  auto* report = app.add_subcommand("report", "SVG/CSV figure bundle for simulated scenarios");
  std::vector<std::string> scenarios;
  report->add_option("--scenario", scenarios, "Scenarios to run (repeatable)");
  report->add_option("--beta", sim_beta, "Inverse-Gamma scale used for the priors");
  report->add_option("--seed", chain_opts.seed, "Random seed");
  add_chain_options(report, chain_opts, false);
  report->add_option("--out", out_dir, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << CONCORD_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (fit->parsed()) {
      const ModelKind model = parse_model(chain_opts.model);
      const auto loaded = load(counts, factors, transpose, err);
      const Priors priors = make_priors(prior_opts, loaded.data.n_instruments(), model);
      const ChainConfig cfg = make_chain(chain_opts, model);
      const ReportFormats fmt = parse_formats(formats);
      auto draws = run_chain(cfg, loaded.data, priors);
      for (const auto& w : draws.warnings) err << "warning: " << w << '\n';
      json prov = base_provenance("fit");
      prov["input"] = input_json(counts, factors, transpose);
      prov["model"] = to_string(model);
      prov["priors"] = priors_json(priors);
      prov["chain"] = chain_json(cfg);
      prov["zero_counts_adjusted"] = loaded.n_zero_adjusted;
      const std::string draws_text = draws_csv(draws, loaded.data);
      const auto rep = build_fit_report(loaded.data, priors, std::move(draws), cfg.seed, prov);
      emit_report(rep, fmt, out_dir);
      if (fmt.csv) write_text(std::filesystem::path(out_dir) / "draws.csv", draws_text);
      out << "wrote fit report to " << out_dir << '\n';
      return 0;
    }

    if (map->parsed()) {
      const auto loaded = load(counts, factors, transpose, err);
      const Priors priors = make_priors(prior_opts, loaded.data.n_instruments(), ModelKind::lognormal);
      MapOptions opts;
      opts.max_iter = max_iter;
      opts.tol = tol;
      opts.rule = rule_name == "exact" ? VarianceRule::exact : VarianceRule::closed_form;
      const auto fitted = solve_map_joint(loaded.data, priors, opts);
      if (!fitted.converged) err << "warning: MAP iteration stopped before reaching the tolerance\n";
      json prov = base_provenance("map");
      prov["input"] = input_json(counts, factors, transpose);
      prov["priors"] = priors_json(priors);
      prov["options"] = {{"rule", rule_name}, {"max_iter", max_iter}, {"tol", tol}};
      prov["zero_counts_adjusted"] = loaded.n_zero_adjusted;
      const auto rep = build_map_report(loaded.data, priors, fitted, opts.rule, prov);
      if (out_dir.empty()) {
        out << rep.instruments_csv;
      } else {
        ensure_directory(out_dir);
        const std::filesystem::path dir(out_dir);
        write_text(dir / "map_instruments.csv", rep.instruments_csv);
        write_text(dir / "map_sources.csv", rep.sources_csv);
        write_text(dir / "map_summary.json", rep.summary.dump(2) + "\n");
        out << "wrote MAP report to " << out_dir << '\n';
      }
      return 0;
    }

    if (simulate->parsed()) {
      const SimSpec spec = SimSpec::preset(parse_scenario(scenario), chain_opts.seed, sim_beta);
      const auto sim = generate(spec);
      const std::string counts_text = dataset_counts_csv(sim.data);
      if (out_dir.empty()) {
        out << counts_text;
        return 0;
      }
      ensure_directory(out_dir);
      const std::filesystem::path dir(out_dir);
      CsvTable truth;
      truth.header = {"parameter", "value"};
      for (int i = 0; i < spec.N; ++i) truth.rows.push_back({"B[" + std::to_string(i + 1) + "]", format_double(spec.B_true[i])});
      for (int j = 0; j < spec.M; ++j) truth.rows.push_back({"G[" + std::to_string(j + 1) + "]", format_double(spec.G_true[j])});
      CsvTable pri;
      pri.header = {"instrument", "b", "tau"};
      for (int i = 0; i < spec.N; ++i) {
        pri.rows.push_back({sim.data.instrument_names()[i], format_double(sim.priors.b[i]), format_double(spec.tau)});
      }
      json j = base_provenance("simulate");
      j["scenario"] = scenario;
      j["seed"] = chain_opts.seed;
      j["priors"] = priors_json(sim.priors);
      j["zero_counts_adjusted"] = sim.n_zero_adjusted;
      j["lambda_range"] = {spec.lambda_range.first, spec.lambda_range.second};
      write_text(dir / "counts.csv", counts_text);
      write_text(dir / "truth.csv", truth.to_string());
      write_text(dir / "priors.csv", pri.to_string());
      write_text(dir / "simulation.json", j.dump(2) + "\n");
      out << "wrote scenario " << scenario << " to " << out_dir << '\n';
      return 0;
    }

    if (coverage->parsed()) {
      const ModelKind model = parse_model(chain_opts.model);
      const SimSpec spec = SimSpec::preset(parse_scenario(scenario), chain_opts.seed, sim_beta);
      const ChainConfig cfg = make_chain(chain_opts, model);
      const auto table = coverage_study(spec, model, reps, cfg);
      for (const auto& m : table.failure_messages) err << "warning: " << m << '\n';
      json j = base_provenance("coverage");
      j["scenario"] = scenario;
      j["model"] = to_string(model);
      j["reps"] = reps;
      j["failures"] = table.failures;
      j["failure_messages"] = table.failure_messages;
      j["chain"] = chain_json(cfg);
      json blocks = json::array();
      for (const auto& b : table.blocks()) {
        blocks.push_back({{"label", b.label}, {"min_coverage", b.min_coverage}, {"max_coverage", b.max_coverage},
                          {"pooled_coverage", b.pooled_coverage}, {"mean_length", b.mean_length}});
      }
      j["blocks"] = blocks;
      if (out_dir.empty()) {
        out << table.to_csv();
      } else {
        ensure_directory(out_dir);
        write_text(std::filesystem::path(out_dir) / "coverage.csv", table.to_csv());
        write_text(std::filesystem::path(out_dir) / "coverage.json", j.dump(2) + "\n");
        out << "wrote coverage table to " << out_dir << '\n';
      }
      return 0;
    }

    if (check->parsed()) {
      const auto loaded = load(counts, factors, transpose, err);
      const std::string text = read_text(draws_path);
      // The draw file's width tells the model apart; priors are checked for both.
      Priors priors = make_priors(prior_opts, loaded.data.n_instruments(), ModelKind::logt);
      auto draws = read_draws_csv(text, loaded.data, priors);
      if (draws.model == ModelKind::lognormal && (prior_opts.kappa || prior_opts.nu)) {
        throw ValidationError("--kappa and --nu only apply to log-t draws; conflicting model options");
      }
      json prov = base_provenance("check");
      prov["input"] = input_json(counts, factors, transpose);
      prov["draws"] = draws_path;
      prov["priors"] = priors_json(priors);
      prov["seed"] = chain_opts.seed;
      const auto rep = build_fit_report(loaded.data, priors, std::move(draws), chain_opts.seed, prov);
      emit_report(rep, parse_formats(formats), out_dir);
      out << "wrote diagnostics to " << out_dir << '\n';
      return 0;
    }

    if (report->parsed()) {
      std::vector<SimSpec> specs;
      for (const auto& s : scenarios) specs.push_back(SimSpec::preset(parse_scenario(s), chain_opts.seed, sim_beta));
      ChainConfig cfg = make_chain(chain_opts, ModelKind::lognormal);
      const auto bundle = reproduce_figures(specs, out_dir, cfg);
      out << "wrote " << bundle.files.size() << " file(s) to " << out_dir << '\n';
      return 0;
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace concord
