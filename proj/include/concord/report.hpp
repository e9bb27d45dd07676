#pragma once

#include "concord/diagnostics.hpp"
#include "concord/map_solver.hpp"
#include "concord/samplers.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace concord {

struct ReportFormats {
  bool csv = true;
  bool json = true;
  bool svg = true;
};
ReportFormats parse_formats(const std::string& list);

/// Everything the `fit` and `check` commands write out.
struct FitReport {
  std::vector<std::string> instrument_names;
  std::vector<std::string> source_names;
  PosteriorDraws draws;
  std::vector<ParameterSummary> summaries;
  std::vector<ParameterSummary> areas;
  ResidualTable residuals;
  PpcResult ppc;
  Vector prior_influence;
  GofResult gof;
  nlohmann::json provenance;
};

/// Summaries, residuals at the posterior mean, predictive p-values (seeded
/// by ppc_seed) and the prior-influence table.
FitReport build_fit_report(const Dataset& data, const Priors& priors, PosteriorDraws draws, std::uint64_t ppc_seed,
                           nlohmann::json provenance);

/// Renders every requested file in memory first; nothing is written when
/// validation fails. Returns the paths written.
std::vector<std::filesystem::path> emit_report(const FitReport& report, const ReportFormats& formats,
                                               const std::filesystem::path& dir);

/// Draw table: chain, then every monitored parameter, then xi cells for
/// log-t draws. Parsed back by read_draws_csv.
std::string draws_csv(const PosteriorDraws& draws, const Dataset& data);
PosteriorDraws read_draws_csv(const std::string& text, const Dataset& data, const Priors& priors);

/// MAP point report (one row per instrument, one per source) and JSON with
/// the goodness-of-fit result.
struct MapReport {
  std::string instruments_csv;
  std::string sources_csv;
  nlohmann::json summary;
};
MapReport build_map_report(const Dataset& data, const Priors& priors, const MapResult& fit, VarianceRule rule,
                           nlohmann::json provenance);

/// Creates `dir` if needed and fails with ValidationError when it cannot.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace concord
