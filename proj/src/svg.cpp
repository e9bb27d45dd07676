#include "concord/svg.hpp"

#include "concord/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace concord::svg {

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

// Fixed precision keeps the files small and stable.
std::string num(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

std::string open(double w, double h, const std::string& title) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">"
     << escape(title) << "</text>\n";
  return os.str();
}

std::string axis_labels(double x0, double x1, double y, const Range& r) {
  std::ostringstream os;
  os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y)
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = r.lo + (r.hi - r.lo) * k / 4.0;
    const double x = x0 + (x1 - x0) * k / 4.0;
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y + 14) << "\" text-anchor=\"middle\" font-size=\"10\" "
       << "font-family=\"sans-serif\">" << escape(format_double(std::round(v * 1e4) / 1e4)) << "</text>\n";
  }
  return os.str();
}

}  // namespace

std::string interval_plot(const std::vector<Interval>& rows, const std::string& title, double reference) {
  const double left = 140, right = 30, top = 40, row_h = 18;
  const double width = 640;
  const double height = top + row_h * std::max<std::size_t>(rows.size(), 1) + 40;
  Range r;
  r.add(reference);
  for (const auto& iv : rows) {
    r.add(iv.lo);
    r.add(iv.hi);
    if (iv.truth) r.add(*iv.truth);
  }
  r.pad();
  const double x0 = left, x1 = width - right;
  auto X = [&](double v) { return x0 + (v - r.lo) / (r.hi - r.lo) * (x1 - x0); };
  std::ostringstream os;
  os << open(width, height, title);
  const double y_end = top + row_h * rows.size();
  os << "<line x1=\"" << num(X(reference)) << "\" y1=\"" << num(top - 5) << "\" x2=\"" << num(X(reference))
     << "\" y2=\"" << num(y_end) << "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& iv = rows[k];
    const double y = top + row_h * (k + 0.5);
    os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4)
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << escape(iv.label) << "</text>\n";
    os << "<line x1=\"" << num(X(iv.lo)) << "\" y1=\"" << num(y) << "\" x2=\"" << num(X(iv.hi)) << "\" y2=\""
       << num(y) << "\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
    os << "<circle cx=\"" << num(X(iv.center)) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\"black\"/>\n";
    if (iv.truth) {
      os << "<line x1=\"" << num(X(*iv.truth)) << "\" y1=\"" << num(y - 6) << "\" x2=\"" << num(X(*iv.truth))
         << "\" y2=\"" << num(y + 6) << "\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
    }
  }
  os << axis_labels(x0, x1, y_end + 8, r);
  os << "</svg>\n";
  return os.str();
}

std::string histogram(const std::vector<double>& edges, const std::vector<double>& counts, const std::string& title,
                      std::optional<double> marker) {
  const double width = 480, height = 300, left = 40, right = 20, top = 40, bottom = 40;
  Range r;
  for (double e : edges) r.add(e);
  if (marker) r.add(*marker);
  r.pad();
  double cmax = 1.0;
  for (double c : counts) cmax = std::max(cmax, c);
  const double x0 = left, x1 = width - right, y0 = height - bottom, y1 = top;
  auto X = [&](double v) { return x0 + (v - r.lo) / (r.hi - r.lo) * (x1 - x0); };
  std::ostringstream os;
  os << open(width, height, title);
  for (std::size_t k = 0; k + 1 < edges.size() && k < counts.size(); ++k) {
    const double h = (y0 - y1) * counts[k] / cmax;
    os << "<rect x=\"" << num(X(edges[k])) << "\" y=\"" << num(y0 - h) << "\" width=\""
       << num(std::max(0.0, X(edges[k + 1]) - X(edges[k]))) << "\" height=\"" << num(h)
       << "\" fill=\"lightsteelblue\" stroke=\"steelblue\"/>\n";
  }
  if (marker) {
    os << "<line x1=\"" << num(X(*marker)) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(X(*marker)) << "\" y2=\""
       << num(y0) << "\" stroke=\"firebrick\" stroke-dasharray=\"4,3\"/>\n";
  }
  os << axis_labels(x0, x1, y0, r);
  os << "</svg>\n";
  return os.str();
}

std::string residual_panel(const std::vector<std::vector<double>>& residuals, const std::string& title,
                           double band) {
  const double width = 640, height = 320, left = 40, right = 20, top = 40, bottom = 30;
  std::size_t n_src = 0;
  Range r;
  r.add(band);
  r.add(-band);
  for (const auto& row : residuals) {
    n_src = std::max(n_src, row.size());
    for (double v : row) r.add(v);
  }
  r.pad();
  const double x0 = left, x1 = width - right, y0 = height - bottom, y1 = top;
  auto X = [&](double j) { return x0 + (j + 0.5) / std::max<std::size_t>(n_src, 1) * (x1 - x0); };
  auto Y = [&](double v) { return y0 - (v - r.lo) / (r.hi - r.lo) * (y0 - y1); };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  os << open(width, height, title);
  for (double b : {band, -band}) {
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(Y(b)) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(Y(b))
       << "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n";
  }
  os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(Y(0)) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(Y(0))
     << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    for (std::size_t j = 0; j < residuals[i].size(); ++j) {
      const double v = residuals[i][j];
      if (!std::isfinite(v)) continue;
      os << "<circle cx=\"" << num(X(static_cast<double>(j))) << "\" cy=\"" << num(Y(v)) << "\" r=\"2.5\" fill=\""
         << palette[i % 10] << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace concord::svg
