#include "concord/cli.hpp"
#include "concord/csv.hpp"
#include "concord/errors.hpp"
#include "concord/random.hpp"
#include "concord/report.hpp"
#include "concord/sim_harness.hpp"
#include "concord/stats.hpp"
#include "concord/svg.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace concord;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("concord_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Tag balance, attribute quoting and entity use; enough to catch broken
// markup without an XML library.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < s.size()) {
    if (s[i] == '&') {
      const auto semi = s.find(';', i);
      if (semi == std::string::npos) return false;
      const auto ent = s.substr(i, semi - i + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") return false;
      i = semi + 1;
      continue;
    }
    if (s[i] != '<') {
      if (s[i] == '>') return false;
      ++i;
      continue;
    }
    const auto close = s.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = s.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.rfind("?", 0) == 0 || tag.rfind("!--", 0) == 0) continue;
    if (tag.empty()) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    // quotes must pair up inside the tag
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag.find('<') != std::string::npos) return false;
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty() && root_seen) return false;
    root_seen = true;
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty();
}

PosteriorDraws small_fit(const Dataset& d, const Priors& p) {
  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 100;
  cfg.n_samples = 200;
  cfg.seed = 3;
  return run_chain(cfg, d, p);
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  Rng rng = make_rng(901);
  for (int k = 0; k < 2000; ++k) {
    const double v = std::ldexp(uniform01(rng) - 0.5, static_cast<int>(uniform01(rng) * 200) - 100);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()).empty());
  CHECK(std::isinf(parse_double("inf")));
  CHECK_THROWS_AS(parse_double("1.5x"), ValidationError);
}

TEST_CASE("CSV parsing") {
  const auto rows = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\n1,,3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][1] == "b,c");
  CHECK(rows[0][2] == "say \"hi\"");
  CHECK(rows[1][1].empty());
  CsvTable t;
  t.header = {"x", "y,z"};
  t.rows = {{"1", "2"}};
  CHECK(parse_csv(t.to_string())[0][1] == "y,z");
}

TEST_CASE("loading datasets") {
  SUBCASE("complete 2 x 2") {
    const auto l = load_dataset_text("source,I1,I2\ns1,10,12\ns2,20,25\n");
    CHECK(l.data.n_instruments() == 2);
    CHECK(l.data.n_sources() == 2);
    CHECK(l.data.complete());
    CHECK(l.data.counts()(1, 0) == 12.0);
    CHECK(l.data.instrument_names()[1] == "I2");
    CHECK(l.data.source_names()[0] == "s1");
  }
  SUBCASE("an empty cell is unobserved") {
    const auto l = load_dataset_text("source,I1,I2,I3\ns1,10,,7\ns2,20,25,9\n");
    CHECK_FALSE(l.data.observed(1, 0));
    CHECK(l.data.index().instrument_counts() == (IndexVector(3) << 2, 1, 2).finished());
    CHECK(l.data.index().source_counts() == (IndexVector(2) << 2, 3).finished());
  }
  SUBCASE("transpose reads instruments as rows") {
    const auto a = load_dataset_text("source,I1,I2\ns1,10,12\ns2,20,25\ns3,1,2\n");
    const auto b = load_dataset_text("instrument,s1,s2,s3\nI1,10,20,1\nI2,12,25,2\n", {}, true);
    CHECK(a.data.counts() == b.data.counts());
  }
  SUBCASE("zero counts are adjusted with a warning") {
    const auto l = load_dataset_text("source,I1,I2\ns1,0,12\ns2,20,25\n");
    CHECK(l.n_zero_adjusted == 1);
    CHECK(l.data.counts()(0, 0) == 0.5);
    CHECK_FALSE(l.warnings.empty());
  }
  SUBCASE("factors") {
    const auto l = load_dataset_text("source,I1,I2\ns1,10,12\ns2,20,\n", "source,I1,I2\ns1,2,3\ns2,4,\n");
    CHECK(l.data.log_data()(1, 0) == doctest::Approx(std::log(12.0 / 3.0)));
    CHECK_THROWS_AS(load_dataset_text("source,I1,I2\ns1,10,12\ns2,20,\n", "source,I1,I2\ns1,2,3\ns2,4,5\n"),
                    ValidationError);
    CHECK_THROWS_AS(load_dataset_text("source,I1,I2\ns1,10,12\n", "source,I1\ns1,2\n"), ValidationError);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(load_dataset_text("source,I1,I2\ns1,10\n"), ValidationError);
    CHECK_THROWS_AS(load_dataset_text("source,I1,I2\ns1,10,-1\n"), ValidationError);
    CHECK_THROWS_AS(load_dataset_text("source,I1,I2\ns1,10,abc\n"), ValidationError);
    CHECK_THROWS_AS(load_dataset_text(""), ValidationError);
    try {
      load_dataset_text("source,I1,I2\ns1,10,12\ns2,,\n");
      FAIL("all-empty source accepted");
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      CHECK(what.find("s2") != std::string::npos);
      CHECK(what.find("at least one instrument") != std::string::npos);
    }
    CHECK_THROWS_AS(load_dataset("/nonexistent/counts.csv"), ValidationError);
  }
  SUBCASE("emit then load reproduces the dataset") {
    const auto sim = generate(SimSpec::preset(Scenario::S5, 8));
    Mask m = sim.data.mask();
    m(2, 3) = false;
    const auto d = Dataset::from_counts(sim.data.counts(), sim.data.counts().cwiseAbs().cwiseSqrt(), m,
                                        sim.data.instrument_names(), sim.data.source_names());
    const auto back = load_dataset_text(dataset_counts_csv(d), dataset_factors_csv(d));
    CHECK(back.data.mask() == d.mask());
    CHECK(back.data.instrument_names() == d.instrument_names());
    CHECK(back.data.source_names() == d.source_names());
    for (int i = 0; i < d.n_instruments(); ++i) {
      for (int j = 0; j < d.n_sources(); ++j) {
        if (!d.observed(i, j)) continue;
        CHECK(back.data.counts()(i, j) == d.counts()(i, j));
        CHECK(back.data.factors()(i, j) == d.factors()(i, j));
      }
    }
  }
}

TEST_CASE("fit reports") {
  const auto l = load_dataset_text("source,I1,I2,I3\ns1,1000,1100,950\ns2,400,420,380\ns3,2500,2400,2600\n"
                                   "s4,800,860,790\n");
  const Priors p = Priors::uniform(3, 0.0, 0.05, 1.5, 0.001);
  const auto draws = small_fit(l.data, p);
  const auto rep = build_fit_report(l.data, p, draws, 5, json{{"command", "test"}});

  SUBCASE("quantiles match order statistics") {
    const auto dir = scratch("report");
    const auto files = emit_report(rep, {}, dir);
    CHECK(fs::exists(dir / "posterior_summary.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "B_intervals.svg"));
    const auto rows = parse_csv(read_text(dir / "posterior_summary.csv"));
    REQUIRE(rows.size() == static_cast<std::size_t>(1 + draws.n_parameters()));
    for (int k = 0; k < draws.n_parameters(); ++k) {
      auto x = draws.trace(k);
      std::sort(x.begin(), x.end());
      // linear interpolation between order statistics
      auto q = [&](double prob) {
        const double h = prob * (x.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, x.size() - 1);
        return x[lo] + (h - lo) * (x[hi] - x[lo]);
      };
      // labelled with instrument and source names
      const auto& name = draws.parameter_names[k];
      CHECK(rows[k + 1][0].substr(0, rows[k + 1][0].find('[')) == name.substr(0, name.find('[')));
      CHECK(parse_double(rows[k + 1][3]) == doctest::Approx(q(0.025)).epsilon(1e-14));
      CHECK(parse_double(rows[k + 1][4]) == doctest::Approx(q(0.975)).epsilon(1e-14));
    }
    const auto j = json::parse(read_text(dir / "summary.json"));
    CHECK(j.at("provenance").at("command") == "test");
    for (const auto& f : files) {
      if (f.extension() == ".svg") CHECK_MESSAGE(well_formed_xml(read_text(f)), f.string());
    }
    const auto svg_text = read_text(dir / "B_intervals.svg");
    CHECK(svg_text.find("stroke-dasharray") != std::string::npos);
    fs::remove_all(dir);
  }
  SUBCASE("format selection") {
    const auto dir = scratch("formats");
    emit_report(rep, parse_formats("json"), dir);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK_FALSE(fs::exists(dir / "posterior_summary.csv"));
    CHECK_FALSE(fs::exists(dir / "B_intervals.svg"));
    CHECK_THROWS_AS(parse_formats("csv,png"), ValidationError);
    fs::remove_all(dir);
  }
  SUBCASE("empty draws write nothing") {
    const auto dir = scratch("empty") / "inner";
    FitReport empty = rep;
    empty.draws = PosteriorDraws{};
    CHECK_THROWS_AS(emit_report(empty, {}, dir), ValidationError);
    CHECK((!fs::exists(dir) || fs::is_empty(dir)));
    fs::remove_all(dir.parent_path());
  }
  SUBCASE("draw tables round-trip") {
    const auto back = read_draws_csv(draws_csv(draws, l.data), l.data, p);
    REQUIRE(back.size() == draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) {
      CHECK(back.states[d].B == draws.states[d].B);
      CHECK(back.states[d].sigma2 == draws.states[d].sigma2);
      CHECK(back.chain_id[d] == draws.chain_id[d]);
    }
  }
}

TEST_CASE("SVG output is well-formed") {
  const std::vector<svg::Interval> rows{{"B[1] <&>", 0.1, -0.2, 0.3, 0.0}, {"B[2]", -0.1, -0.4, 0.2, std::nullopt}};
  CHECK(well_formed_xml(svg::interval_plot(rows, "a \"quoted\" title")));
  CHECK(well_formed_xml(svg::histogram({0.0, 1.0, 2.0}, {3.0, 5.0}, "h", 1.5)));
  CHECK(well_formed_xml(svg::residual_panel({{0.1, -2.5, 3.2}, {0.0, 1.0, 0.5}}, "r", 2.0)));
  CHECK(svg::escape("<a&b>") == "&lt;a&amp;b&gt;");
  CHECK_FALSE(well_formed_xml("<svg><g></svg>"));
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  put(dir / "d.csv", "source,I1,I2,I3\ns1,1000,1100,950\ns2,400,420,380\ns3,2500,2400,2600\ns4,800,860,790\n");
  put(dir / "bad.csv", "source,I1,I2\ns1,10,12\ns2,,\n");

  SUBCASE("exit codes") {
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"map", "--counts", (dir / "d.csv").string(), "--beta", "0.001"}).code == 0);
    CHECK(cli({"map", "--counts", (dir / "d.csv").string()}).code == 1);  // beta is required
    CHECK(cli({"map", "--counts", (dir / "d.csv").string(), "--beta", "0.001", "--bogus"}).code == 1);
    CHECK(cli({"nosuch"}).code == 1);
    const auto inf = cli({"map", "--counts", (dir / "d.csv").string(), "--beta", "0.001", "--tau", "inf"});
    CHECK(inf.code == 2);
    CHECK(cli({"fit", "--counts", (dir / "d.csv").string(), "--beta", "0.001", "--model", "logt", "--algorithm",
               "block-gibbs", "--out", (dir / "f").string()})
              .code == 1);
  }
  SUBCASE("fit on a source nobody observed") {
    const auto r = cli({"fit", "--counts", (dir / "bad.csv").string(), "--beta", "0.001", "--out",
                        (dir / "bad_out").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("at least one instrument") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "bad_out" / "summary.json"));
  }
  SUBCASE("simulate twice gives identical files") {
    for (const char* tag : {"s1", "s2"}) {
      REQUIRE(cli({"simulate", "--scenario", "S2", "--seed", "7", "--out", (dir / tag).string()}).code == 0);
    }
    for (const char* f : {"counts.csv", "truth.csv", "priors.csv", "simulation.json"}) {
      CHECK_MESSAGE(read_text(dir / "s1" / f) == read_text(dir / "s2" / f), f);
    }
    const auto other = cli({"simulate", "--scenario", "S2", "--seed", "8", "--out", (dir / "s3").string()});
    CHECK(other.code == 0);
    CHECK(read_text(dir / "s3" / "counts.csv") != read_text(dir / "s1" / "counts.csv"));
  }
  SUBCASE("fit then check") {
    const auto fit = cli({"fit", "--counts", (dir / "d.csv").string(), "--beta", "0.001", "--samples", "200",
                          "--warmup", "100", "--chains", "2", "--seed", "4", "--out", (dir / "fit").string()});
    REQUIRE(fit.code == 0);
    const auto j = json::parse(read_text(dir / "fit" / "summary.json"));
    CHECK(j.at("provenance").at("chain").at("seed") == 4);
    CHECK(j.at("provenance").at("priors").at("alpha") == 1.5);
    CHECK(fs::exists(dir / "fit" / "areas.csv"));
    const auto chk = cli({"check", "--counts", (dir / "d.csv").string(), "--beta", "0.001", "--draws",
                          (dir / "fit" / "draws.csv").string(), "--seed", "4", "--out", (dir / "chk").string()});
    CHECK(chk.code == 0);
    CHECK(read_text(dir / "chk" / "ppc.csv") == read_text(dir / "fit" / "ppc.csv"));
  }
  fs::remove_all(dir);
}

TEST_CASE("MAP report matches the frozen golden run") {
  const fs::path golden = CONCORD_GOLDEN_DIR;
  const auto dir = scratch("golden");
  const auto r = cli({"map", "--counts", (golden / "d.csv").string(), "--tau", "0.05", "--alpha", "1.5", "--beta",
                      "8e-4", "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  for (const char* f : {"map_instruments.csv", "map_sources.csv"}) {
    const auto want = parse_csv(read_text(golden / f));
    const auto got = parse_csv(read_text(dir / "out" / f));
    REQUIRE(want.size() == got.size());
    CHECK(want[0] == got[0]);
    for (std::size_t row = 1; row < want.size(); ++row) {
      REQUIRE(want[row].size() == got[row].size());
      CHECK(want[row][0] == got[row][0]);
      for (std::size_t c = 1; c < want[row].size(); ++c) {
        CHECK_MESSAGE(parse_double(got[row][c]) == doctest::Approx(parse_double(want[row][c])).epsilon(1e-9),
                      f << " row " << row << " col " << c);
      }
    }
  }
  const auto header = parse_csv(read_text(dir / "out" / "map_instruments.csv"))[0];
  CHECK(std::find(header.begin(), header.end(), "prior_influence") != header.end());
  const auto j = json::parse(read_text(dir / "out" / "map_summary.json"));
  CHECK(j.at("gof").at("df") == 8);
  CHECK(j.at("converged") == true);
  fs::remove_all(dir);
}
