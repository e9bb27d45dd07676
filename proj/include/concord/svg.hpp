#pragma once

#include <optional>
#include <string>
#include <vector>

namespace concord::svg {

struct Interval {
  std::string label;
  double center = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> truth;
};

/// Horizontal 95% interval bars with point estimates, a dashed reference
/// line at `reference` (zero by default) and optional truth markers.
std::string interval_plot(const std::vector<Interval>& rows, const std::string& title, double reference = 0.0);

/// Bar histogram from bin edges (size k + 1) and counts (size k), with an
/// optional vertical marker.
std::string histogram(const std::vector<double>& edges, const std::vector<double>& counts, const std::string& title,
                      std::optional<double> marker = std::nullopt);

/// Scatter of standardized residuals by source index, one series per
/// instrument, with dashed bands at +-band.
std::string residual_panel(const std::vector<std::vector<double>>& residuals, const std::string& title,
                           double band);

std::string escape(const std::string& text);

}  // namespace concord::svg
