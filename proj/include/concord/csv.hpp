#pragma once

#include "concord/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace concord {

/// Shortest decimal form that parses back to the same double. NaN is
/// written as an empty string.
std::string format_double(double v);
double parse_double(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
};

/// Splits CSV text into rows of fields. Supports quoted fields with doubled
/// quotes; trailing CR is stripped; blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string read_text(const std::filesystem::path& path);
/// Writes the whole file through a temporary sibling and a rename.
void write_text(const std::filesystem::path& path, const std::string& text);

struct LoadedDataset {
  Dataset data;
  int n_zero_adjusted = 0;
  std::vector<std::string> warnings;
};

/// Counts table with header `source,<instrument-1>,...`: one row per source,
/// one column per instrument, empty cells unobserved. With `transpose` the
/// file has instruments as rows instead. An optional factors file must have
/// the same shape and the same empty cells. Zero counts are replaced by 0.5
/// and reported in `warnings`.
LoadedDataset load_dataset(const std::filesystem::path& counts_path,
                           const std::filesystem::path& factors_path = {}, bool transpose = false);
LoadedDataset load_dataset_text(const std::string& counts_csv, const std::string& factors_csv = {},
                                bool transpose = false);

/// Counts (or factors) of a dataset in the load_dataset layout.
std::string dataset_counts_csv(const Dataset& data);
std::string dataset_factors_csv(const Dataset& data);

}  // namespace concord
