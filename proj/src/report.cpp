#include "concord/report.hpp"

#include "concord/csv.hpp"
#include "concord/errors.hpp"
#include "concord/svg.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace concord {

using nlohmann::json;

ReportFormats parse_formats(const std::string& list) {
  ReportFormats f{false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") f.csv = true;
    else if (item == "json") f.json = true;
    else if (item == "svg") f.svg = true;
    else if (!item.empty()) throw ValidationError("unknown report format '" + item + "'");
  }
  if (!f.csv && !f.json && !f.svg) throw ValidationError("no report formats selected");
  return f;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ValidationError("cannot create output directory '" + dir.string() + "'");
  }
}

namespace {

json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::vector<std::string> display_names(const PosteriorDraws& draws, const std::vector<std::string>& inst,
                                       const std::vector<std::string>& src) {
  std::vector<std::string> out;
  for (const auto& n : inst) out.push_back("B[" + n + "]");
  for (const auto& n : src) out.push_back("G[" + n + "]");
  if (draws.model == ModelKind::lognormal) {
    for (const auto& n : inst) out.push_back("sigma2[" + n + "]");
  }
  return out;
}

}  // namespace

FitReport build_fit_report(const Dataset& data, const Priors& priors, PosteriorDraws draws, std::uint64_t ppc_seed,
                           json provenance) {
  if (draws.states.empty()) throw ValidationError("cannot report an empty set of draws");
  FitReport r;
  r.instrument_names = data.instrument_names();
  r.source_names = data.source_names();
  r.summaries = summarize(draws);
  const auto names = display_names(draws, r.instrument_names, r.source_names);
  for (std::size_t k = 0; k < r.summaries.size(); ++k) r.summaries[k].name = names[k];
  r.areas = summarize_areas(draws);
  for (std::size_t i = 0; i < r.areas.size(); ++i) r.areas[i].name = r.instrument_names[i];
  const ParamState mean = draws.posterior_mean();
  r.residuals = standardized_residuals(mean, data, priors, draws.model);
  r.ppc = posterior_predictive_pvalue(draws, data, priors, ppc_seed);
  r.prior_influence = prior_influence(draws, data, priors);
  if (draws.model == ModelKind::lognormal) {
    r.gof = gof_chi2(mean.B, mean.G, data, priors, mean.sigma2, VarianceMode::estimated);
  }
  r.provenance = std::move(provenance);
  r.draws = std::move(draws);
  return r;
}

std::vector<std::filesystem::path> emit_report(const FitReport& report, const ReportFormats& formats,
                                               const std::filesystem::path& dir) {
  if (report.draws.states.empty() || report.summaries.empty()) {
    throw ValidationError("cannot report an empty set of draws");
  }
  std::vector<std::pair<std::string, std::string>> files;
  const int N = static_cast<int>(report.instrument_names.size());
  const int M = static_cast<int>(report.source_names.size());

  if (formats.csv) {
    CsvTable s;
    s.header = {"parameter", "mean", "sd", "q2.5", "q97.5", "ess", "rhat"};
    for (const auto& p : report.summaries) {
      s.rows.push_back({p.name, format_double(p.mean), format_double(p.sd), format_double(p.q025),
                        format_double(p.q975), format_double(p.ess), format_double(p.rhat)});
    }
    files.emplace_back("posterior_summary.csv", s.to_string());

    CsvTable a;
    a.header = {"instrument", "area_mean", "area_sd", "area_q2.5", "area_q97.5", "prior_influence"};
    for (int i = 0; i < N; ++i) {
      const auto& p = report.areas[i];
      a.rows.push_back({p.name, format_double(p.mean), format_double(p.sd), format_double(p.q025),
                        format_double(p.q975), format_double(report.prior_influence[i])});
    }
    files.emplace_back("areas.csv", a.to_string());

    CsvTable res;
    res.header = {"source"};
    for (const auto& n : report.instrument_names) res.header.push_back(n);
    for (int j = 0; j < M; ++j) {
      std::vector<std::string> row{report.source_names[j]};
      for (int i = 0; i < N; ++i) row.push_back(format_double(report.residuals.values(i, j)));
      res.rows.push_back(std::move(row));
    }
    files.emplace_back("residuals.csv", res.to_string());

    CsvTable pp;
    pp.header = {"instrument", "T_obs", "p_upper", "p_two_sided"};
    for (int i = 0; i < N; ++i) {
      pp.rows.push_back({report.instrument_names[i], format_double(report.ppc.T_obs[i]),
                         format_double(report.ppc.p_upper[i]), format_double(report.ppc.p_two_sided[i])});
    }
    files.emplace_back("ppc.csv", pp.to_string());
  }

  if (formats.json) {
    json j;
    j["provenance"] = report.provenance;
    j["model"] = to_string(report.draws.model);
    j["algorithm"] = to_string(report.draws.algorithm);
    j["n_chains"] = report.draws.n_chains;
    j["n_samples"] = report.draws.n_samples;
    json acc = json::object();
    for (const auto& [k, v] : report.draws.acceptance_rates) acc[k] = number(v);
    j["acceptance_rates"] = acc;
    j["divergences"] = report.draws.divergences;
    j["warnings"] = report.draws.warnings;
    json params = json::array();
    for (const auto& p : report.summaries) {
      params.push_back({{"name", p.name}, {"mean", number(p.mean)}, {"sd", number(p.sd)},
                        {"q2.5", number(p.q025)}, {"q97.5", number(p.q975)}, {"ess", number(p.ess)},
                        {"rhat", number(p.rhat)}});
    }
    j["parameters"] = params;
    json inst = json::array();
    for (int i = 0; i < N; ++i) {
      inst.push_back({{"name", report.instrument_names[i]},
                      {"area_mean", number(report.areas[i].mean)},
                      {"prior_influence", number(report.prior_influence[i])},
                      {"ppc_p_upper", number(report.ppc.p_upper[i])},
                      {"ppc_p_two_sided", number(report.ppc.p_two_sided[i])}});
    }
    j["instruments"] = inst;
    j["residuals_flagged"] = report.residuals.n_flagged();
    j["residual_threshold"] = report.residuals.threshold;
    if (report.draws.model == ModelKind::lognormal) {
      j["gof"] = {{"statistic", number(report.gof.statistic)},
                  {"df", report.gof.df},
                  {"p_value", number(report.gof.p_value)},
                  {"variance_mode", "estimated"},
                  {"approximate", report.gof.approximate}};
    }
    files.emplace_back("summary.json", j.dump(2) + "\n");
  }

  if (formats.svg) {
    std::vector<svg::Interval> rows;
    for (int i = 0; i < N; ++i) {
      const auto& p = report.summaries[i];
      rows.push_back({report.instrument_names[i], p.mean, p.q025, p.q975, std::nullopt});
    }
    files.emplace_back("B_intervals.svg", svg::interval_plot(rows, "Posterior 95% intervals of B = log A"));
    std::vector<std::vector<double>> panel(N);
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < M; ++j) panel[i].push_back(report.residuals.values(i, j));
    }
    files.emplace_back("residuals.svg",
                       svg::residual_panel(panel, "Standardized residuals", report.residuals.threshold));
  }

  ensure_directory(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : files) {
    write_text(dir / name, text);
    written.push_back(dir / name);
  }
  return written;
}

std::string draws_csv(const PosteriorDraws& draws, const Dataset& data) {
  CsvTable t;
  t.header.push_back("chain");
  for (const auto& n : draws.parameter_names) t.header.push_back(n);
  const bool with_xi = draws.model == ModelKind::logt;
  if (with_xi) {
    for (int i = 0; i < data.n_instruments(); ++i) {
      for (int j : data.index().by_instrument[i]) {
        t.header.push_back("xi[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
      }
    }
  }
  for (std::size_t d = 0; d < draws.size(); ++d) {
    std::vector<std::string> row{std::to_string(draws.chain_id[d])};
    for (int k = 0; k < draws.n_parameters(); ++k) row.push_back(format_double(draws.value(d, k)));
    if (with_xi) {
      for (int i = 0; i < data.n_instruments(); ++i) {
        for (int j : data.index().by_instrument[i]) row.push_back(format_double((*draws.states[d].xi)(i, j)));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t.to_string();
}

PosteriorDraws read_draws_csv(const std::string& text, const Dataset& data, const Priors& priors) {
  const auto rows = parse_csv(text);
  if (rows.size() < 2) throw ValidationError("draws file has no draws");
  const int N = data.n_instruments();
  const int M = data.n_sources();
  const auto& header = rows.front();
  const int n_cells = data.index().n_observed();
  PosteriorDraws draws;
  if (static_cast<int>(header.size()) == 1 + 2 * N + M) {
    draws.model = ModelKind::lognormal;
  } else if (static_cast<int>(header.size()) == 1 + N + M + n_cells) {
    draws.model = ModelKind::logt;
  } else {
    throw ValidationError("draws file columns do not match the dataset");
  }
  draws.algorithm = draws.model == ModelKind::logt ? Algorithm::gibbs_t : Algorithm::block_gibbs;
  const double kappa = priors.kappa_value();
  std::map<int, int> per_chain;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw ValidationError("ragged row in draws file");
    const int chain = std::stoi(row[0]);
    ParamState s;
    s.B.resize(N);
    s.G.resize(M);
    for (int i = 0; i < N; ++i) s.B[i] = parse_double(row[1 + i]);
    for (int j = 0; j < M; ++j) s.G[j] = parse_double(row[1 + N + j]);
    if (draws.model == ModelKind::lognormal) {
      s.sigma2.resize(N);
      for (int i = 0; i < N; ++i) s.sigma2[i] = parse_double(row[1 + N + M + i]);
    } else {
      s.sigma2 = Vector::Constant(N, kappa * kappa);
      Matrix xi = Matrix::Constant(N, M, std::numeric_limits<double>::quiet_NaN());
      int k = 1 + N + M;
      for (int i = 0; i < N; ++i) {
        for (int j : data.index().by_instrument[i]) xi(i, j) = parse_double(row[k++]);
      }
      s.xi = std::move(xi);
    }
    s.validate(data);
    draws.states.push_back(std::move(s));
    draws.chain_id.push_back(chain);
    ++per_chain[chain];
  }
  draws.n_chains = static_cast<int>(per_chain.size());
  draws.n_samples = per_chain.begin()->second;
  for (const auto& [c, n] : per_chain) {
    if (n != draws.n_samples || c < 0 || c >= draws.n_chains) {
      throw ValidationError("draws file chains must be numbered 0..k-1 with equal lengths");
    }
  }
  draws.compute_diagnostics(N, M);
  return draws;
}

MapReport build_map_report(const Dataset& data, const Priors& priors, const MapResult& fit, VarianceRule rule,
                           json provenance) {
  const int N = data.n_instruments();
  const auto& st = fit.state;
  const auto& sh = fit.shrinkage;
  MapReport r;
  CsvTable inst;
  inst.header = {"instrument", "B", "area", "sigma2", "W", "prior_influence", "S2", "R"};
  for (int i = 0; i < N; ++i) {
    inst.rows.push_back({data.instrument_names()[i], format_double(st.B[i]), format_double(std::exp(st.B[i])),
                         format_double(st.sigma2[i]), format_double(sh.W[i]), format_double(sh.prior_influence[i]),
                         format_double(sh.S2[i]), format_double(sh.R[i])});
  }
  r.instruments_csv = inst.to_string();
  CsvTable src;
  src.header = {"source", "G", "flux"};
  for (int j = 0; j < data.n_sources(); ++j) {
    src.rows.push_back({data.source_names()[j], format_double(st.G[j]), format_double(std::exp(st.G[j]))});
  }
  r.sources_csv = src.to_string();

  json j;
  j["provenance"] = std::move(provenance);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["last_change"] = number(fit.last_change);
  j["variance_rule"] = rule == VarianceRule::exact ? "exact" : "closed-form";
  j["variance_lower_bound"] = number(variance_lower_bound(data.n_sources(), priors.alpha, priors.beta, rule));
  try {
    const auto g = gof_chi2(st.B, st.G, data, priors, st.sigma2, VarianceMode::estimated);
    j["gof"] = {{"statistic", number(g.statistic)}, {"df", g.df}, {"p_value", number(g.p_value)},
                {"variance_mode", "estimated"}, {"approximate", true}};
  } catch (const ValidationError& e) {
    j["gof"] = {{"error", e.what()}};
  }
  r.summary = std::move(j);
  return r;
}

}  // namespace concord
