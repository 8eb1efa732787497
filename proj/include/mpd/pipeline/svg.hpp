#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mpd/core/csv.hpp"
#include "mpd/core/error.hpp"

namespace mpd::svg {

// Static SVG figures. Every writer also emits <name>.csv next to <name>.svg
// holding exactly the plotted numbers.

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional band, same length as y
};

struct Panel {
  std::string title;
  std::vector<Series> series;
};

struct Figure {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Panel> panels;
  int columns = 1;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string num_int(double v) { return std::to_string(static_cast<long>(std::lround(v))); }

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline const char* colour(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return palette[i % 8];
}

inline void range(const Panel& p, double& x0, double& x1, double& y0, double& y1) {
  x0 = y0 = INFINITY, x1 = y1 = -INFINITY;
  for (const auto& s : p.series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (const auto* v : {&s.y, &s.lo, &s.hi})
      for (double w : *v)
        if (std::isfinite(w)) y0 = std::min(y0, w), y1 = std::max(y1, w);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
}

inline void draw_panel(std::ostringstream& o, const Panel& p, double left, double top, double w, double h,
                       bool legend) {
  double x0, x1, y0, y1;
  range(p, x0, x1, y0, y1);
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * w; };
  auto sy = [&](double v) { return top + h - (v - y0) / (y1 - y0) * h; };
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  o << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(top - 6) << "\" text-anchor=\"middle\" font-size=\"12\">"
    << escape(p.title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
    o << "<text x=\"" << num(left - 4) << "\" y=\"" << num(sy(yv) + 3) << "\" text-anchor=\"end\" font-size=\"9\">"
      << tick(yv) << "</text>\n";
    o << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + h + 12) << "\" text-anchor=\"middle\" font-size=\"9\">"
      << tick(xv) << "</text>\n";
  }
  if (y0 < 0 && y1 > 0)
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(left + w) << "\" y2=\""
      << num(sy(0)) << "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
  for (std::size_t i = 0; i < p.series.size(); ++i) {
    const auto& s = p.series[i];
    if (!s.lo.empty() && s.lo.size() == s.x.size() && s.hi.size() == s.x.size()) {
      o << "<polygon fill=\"" << colour(i) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t k = 0; k < s.x.size(); ++k) o << num(sx(s.x[k])) << "," << num(sy(s.hi[k])) << " ";
      for (std::size_t k = s.x.size(); k-- > 0;) o << num(sx(s.x[k])) << "," << num(sy(s.lo[k])) << " ";
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << colour(i) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) o << num(sx(s.x[k])) << "," << num(sy(s.y[k])) << " ";
    o << "\"/>\n";
    if (legend)
      o << "<text x=\"" << num(left + w + 8) << "\" y=\"" << num(top + 12 + 14.0 * static_cast<double>(i))
        << "\" font-size=\"10\" fill=\"" << colour(i) << "\">" << escape(s.name) << "</text>\n";
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

}  // namespace detail

// Writes <base>.svg and <base>.csv; returns both paths.
inline std::vector<std::filesystem::path> write_figure(const std::filesystem::path& base, const Figure& fig) {
  if (fig.panels.empty()) throw DomainError("figure " + fig.title + " has no panels");
  const int cols = std::max(1, fig.columns);
  const int rows = (static_cast<int>(fig.panels.size()) + cols - 1) / cols;
  const double pw = 260, ph = 170, margin_l = 60, margin_t = 50, gap_x = 130, gap_y = 60;
  const double width = margin_l + cols * (pw + gap_x), height = margin_t + rows * (ph + gap_y) + 10;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num_int(width) << "\" height=\"" << detail::num_int(height)
    << "\" font-family=\"sans-serif\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << detail::num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::escape(fig.title) << "</text>\n";
  for (std::size_t i = 0; i < fig.panels.size(); ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    const double left = margin_l + c * (pw + gap_x), top = margin_t + r * (ph + gap_y);
    detail::draw_panel(o, fig.panels[i], left, top, pw, ph, true);
    o << "<text x=\"" << detail::num(left + pw / 2) << "\" y=\"" << detail::num(top + ph + 26)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::escape(fig.xlabel) << "</text>\n";
    o << "<text x=\"" << detail::num(left - 42) << "\" y=\"" << detail::num(top + ph / 2)
      << "\" text-anchor=\"middle\" font-size=\"10\" transform=\"rotate(-90 " << detail::num(left - 42) << " "
      << detail::num(top + ph / 2) << ")\">" << detail::escape(fig.ylabel) << "</text>\n";
  }
  o << "</svg>\n";

  csv::Table t;
  t.header = {"panel", "series", "x", "y", "lo", "hi"};
  for (const auto& p : fig.panels)
    for (const auto& s : p.series)
      for (std::size_t k = 0; k < s.x.size(); ++k)
        t.rows.push_back({p.title, s.name, csv::format_double(s.x[k]), csv::format_double(s.y[k]),
                          s.lo.empty() ? "" : csv::format_double(s.lo[k]), s.hi.empty() ? "" : csv::format_double(s.hi[k])});

  std::filesystem::create_directories(base.parent_path());
  auto svg_path = base, csv_path = base;
  svg_path += ".svg";
  csv_path += ".csv";
  detail::write_text(svg_path, o.str());
  csv::write(csv_path, t);
  return {svg_path, csv_path};
}

// Heatmap of a labelled matrix; `annotations` (same shape, may be empty) are
// printed in the cells. NaN cells are left blank.
inline std::vector<std::filesystem::path> write_heatmap(const std::filesystem::path& base, const std::string& title,
                                                        const std::vector<std::string>& row_labels,
                                                        const std::vector<std::string>& col_labels,
                                                        const std::vector<std::vector<double>>& values,
                                                        const std::vector<std::vector<std::string>>& annotations = {}) {
  const double cw = 90, ch = 18, left = 190, top = 150;
  const double width = left + cw * static_cast<double>(col_labels.size()) + 20;
  const double height = top + ch * static_cast<double>(row_labels.size()) + 20;
  double vmax = 0;
  for (const auto& r : values)
    for (double v : r)
      if (std::isfinite(v)) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0) vmax = 1;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num_int(width) << "\" height=\"" << detail::num_int(height)
    << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << detail::num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::escape(title) << "</text>\n";
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    const double x = left + cw * (static_cast<double>(c) + 0.5);
    o << "<text x=\"" << detail::num(x) << "\" y=\"" << detail::num(top - 6) << "\" font-size=\"9\" transform=\"rotate(-45 "
      << detail::num(x) << " " << detail::num(top - 6) << ")\">" << detail::escape(col_labels[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    const double y = top + ch * static_cast<double>(r);
    o << "<text x=\"" << detail::num(left - 6) << "\" y=\"" << detail::num(y + 13)
      << "\" text-anchor=\"end\" font-size=\"10\">" << detail::escape(row_labels[r]) << "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const double v = values[r][c];
      std::string fill = "#ffffff";
      if (std::isfinite(v)) {
        const int shade = static_cast<int>(std::lround(255 * (1 - std::min(1.0, std::abs(v) / vmax))));
        char buf[8];
        if (v >= 0)
          std::snprintf(buf, sizeof buf, "#%02x%02xff", shade, shade);
        else
          std::snprintf(buf, sizeof buf, "#ff%02x%02x", shade, shade);
        fill = buf;
      }
      const double x = left + cw * static_cast<double>(c);
      o << "<rect x=\"" << detail::num(x) << "\" y=\"" << detail::num(y) << "\" width=\"" << detail::num(cw)
        << "\" height=\"" << detail::num(ch) << "\" fill=\"" << fill << "\" stroke=\"#ddd\"/>\n";
      const std::string label = !annotations.empty() ? annotations[r][c] : std::isfinite(v) ? detail::tick(v) : "";
      o << "<text x=\"" << detail::num(x + cw / 2) << "\" y=\"" << detail::num(y + 13)
        << "\" text-anchor=\"middle\" font-size=\"9\">" << detail::escape(label) << "</text>\n";
    }
  }
  o << "</svg>\n";

  csv::Table t;
  t.header = {"row", "column", "value", "label"};
  for (std::size_t r = 0; r < row_labels.size(); ++r)
    for (std::size_t c = 0; c < col_labels.size(); ++c)
      t.rows.push_back({row_labels[r], col_labels[c], csv::format_double(values[r][c]),
                        annotations.empty() ? "" : annotations[r][c]});

  std::filesystem::create_directories(base.parent_path());
  auto svg_path = base, csv_path = base;
  svg_path += ".svg";
  csv_path += ".csv";
  detail::write_text(svg_path, o.str());
  csv::write(csv_path, t);
  return {svg_path, csv_path};
}

}  // namespace mpd::svg
