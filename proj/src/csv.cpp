#include "concord/csv.hpp"

#include "concord/errors.hpp"
#include "concord/model_core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace concord {

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) throw ValidationError("empty numeric field");
  const std::string t = s.substr(b, e - b + 1);
  if (t == "inf" || t == "Inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ValidationError("not a number: '" + s + "'");
  }
  return v;
}

namespace {

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string CsvTable::to_string() const {
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << quote(row[k]);
    os << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return os.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  auto end_row = [&] {
    row.push_back(field);
    field.clear();
    const bool blank = row.size() == 1 && row[0].empty() && !any;
    if (!blank) rows.push_back(row);
    row.clear();
    any = false;
  };
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quoted CSV field");
  if (!field.empty() || !row.empty() || any) end_row();
  return rows;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ValidationError("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ValidationError("cannot write '" + path.string() + "': " + ec.message());
}

namespace {

struct Grid {
  std::vector<std::string> instruments;
  std::vector<std::string> sources;
  Matrix values;  // instruments x sources
  Mask mask;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

Grid parse_grid(const std::string& text, bool transpose, const std::string& what) {
  const auto rows = parse_csv(text);
  if (rows.size() < 2) throw ValidationError(what + " file needs a header row and at least one data row");
  const auto& header = rows.front();
  if (header.size() < 2) throw ValidationError(what + " header needs at least one value column");
  const std::size_t width = header.size();
  std::vector<std::string> col_names(header.begin() + 1, header.end());
  std::vector<std::string> row_names;
  Matrix vals(rows.size() - 1, width - 1);
  Mask m(rows.size() - 1, width - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ValidationError(what + " row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                            " fields, expected " + std::to_string(width) + " (ragged rows)");
    }
    row_names.push_back(trim(rows[r][0]));
    for (std::size_t c = 1; c < width; ++c) {
      const std::string cell = trim(rows[r][c]);
      m(r - 1, c - 1) = !cell.empty();
      vals(r - 1, c - 1) = cell.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(cell);
    }
  }
  Grid g;
  if (transpose) {  // rows are instruments
    g.instruments = row_names;
    g.sources = col_names;
    g.values = vals;
    g.mask = m;
  } else {
    g.instruments = col_names;
    g.sources = row_names;
    g.values = vals.transpose();
    g.mask = m.transpose();
  }
  return g;
}

}  // namespace

LoadedDataset load_dataset_text(const std::string& counts_csv, const std::string& factors_csv, bool transpose) {
  const Grid counts = parse_grid(counts_csv, transpose, "counts");
  for (Eigen::Index j = 0; j < counts.mask.cols(); ++j) {
    if (!counts.mask.col(j).any()) {
      throw ValidationError("source '" + counts.sources[j] +
                            "' has no observed counts; each source must be measured by at least one instrument "
                            "for the posterior to be proper");
    }
  }
  Matrix factors = Matrix::Ones(counts.values.rows(), counts.values.cols());
  if (!factors_csv.empty()) {
    const Grid f = parse_grid(factors_csv, transpose, "factors");
    if (f.values.rows() != counts.values.rows() || f.values.cols() != counts.values.cols()) {
      throw ValidationError("factors table shape does not match the counts table");
    }
    if (f.mask != counts.mask) throw ValidationError("factors and counts disagree on which cells are observed");
    factors = f.values;
  }
  LoadedDataset out;
  const auto adjusted = adjust_zero_counts(counts.values, counts.mask);
  out.n_zero_adjusted = adjusted.n_modified;
  if (adjusted.n_modified > 0) {
    out.warnings.push_back(std::to_string(adjusted.n_modified) + " zero count(s) replaced by 0.5 before taking logs");
  }
  out.data = Dataset::from_counts(adjusted.counts, factors, counts.mask, counts.instruments, counts.sources);
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& counts_path, const std::filesystem::path& factors_path,
                           bool transpose) {
  const std::string counts = read_text(counts_path);
  const std::string factors = factors_path.empty() ? std::string() : read_text(factors_path);
  if (!factors_path.empty() && factors.empty()) throw ValidationError("factors file is empty");
  return load_dataset_text(counts, factors, transpose);
}

namespace {

std::string grid_csv(const Dataset& data, const Matrix& values) {
  CsvTable t;
  t.header.push_back("source");
  for (int i = 0; i < data.n_instruments(); ++i) t.header.push_back(data.instrument_names()[i]);
  for (int j = 0; j < data.n_sources(); ++j) {
    std::vector<std::string> row{data.source_names()[j]};
    for (int i = 0; i < data.n_instruments(); ++i) {
      row.push_back(data.observed(i, j) ? format_double(values(i, j)) : "");
    }
    t.rows.push_back(std::move(row));
  }
  return t.to_string();
}

}  // namespace

std::string dataset_counts_csv(const Dataset& data) { return grid_csv(data, data.counts()); }
std::string dataset_factors_csv(const Dataset& data) { return grid_csv(data, data.factors()); }

}  // namespace concord
