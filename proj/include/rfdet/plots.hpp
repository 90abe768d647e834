// CSV parsing and self-contained SVG emission for loss/lr curves and mAP
// bars. The charts carry their data ranges as data-* attributes so tests can
// parse them back.
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rfdet/array.hpp"

namespace rfdet {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::vector<double> numeric_column(int col) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      try {
        out.push_back(std::stod(r.at(static_cast<size_t>(col))));
      } catch (const std::exception&) {
        throw IoError("csv: non-numeric cell '" + r.at(static_cast<size_t>(col)) + "'");
      }
    }
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline CsvTable parse_csv(std::istream& in, const std::string& what) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw IoError(what + ": row width " + std::to_string(cells.size()) +
                      " does not match header width " + std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw IoError(what + ": empty CSV");
  if (t.rows.empty()) throw IoError(what + ": CSV has a header but no data rows");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot read " + path);
  return parse_csv(in, path);
}

struct Series {
  std::string name;
  std::vector<double> x, y;
};

namespace detail {

struct AxisRange {
  double lo = 0, hi = 1;
};

// Data range padded 5% on each side; degenerate ranges get a unit pad.
inline AxisRange padded_range(double mn, double mx) {
  if (mx < mn) std::swap(mn, mx);
  double pad = 0.05 * (mx - mn);
  if (pad <= 0) pad = mx == 0 ? 1.0 : std::fabs(mx) * 0.05;
  return {mn - pad, mx + pad};
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  return buf;
}

}  // namespace detail

// One SVG line chart; one polyline per series. Margins fixed, viewport
// 720x440. data-xmin/xmax/ymin/ymax record the padded axis ranges.
inline std::string svg_line_chart(const std::string& title, const std::vector<Series>& series) {
  check(!series.empty(), "plot: no series");
  double xmn = series[0].x.at(0), xmx = xmn, ymn = series[0].y.at(0), ymx = ymn;
  for (const auto& s : series) {
    check(s.x.size() == s.y.size() && !s.x.empty(), "plot: series size mismatch");
    for (const double v : s.x) {
      xmn = std::min(xmn, v);
      xmx = std::max(xmx, v);
    }
    for (const double v : s.y) {
      ymn = std::min(ymn, v);
      ymx = std::max(ymx, v);
    }
  }
  const auto xr = detail::padded_range(xmn, xmx);
  const auto yr = detail::padded_range(ymn, ymx);
  const double w = 720, h = 440, ml = 70, mr = 20, mt = 40, mb = 50;
  const auto sx = [&](double v) {
    return ml + (v - xr.lo) / (xr.hi - xr.lo) * (w - ml - mr);
  };
  const auto sy = [&](double v) {
    return h - mb - (v - yr.lo) / (yr.hi - yr.lo) * (h - mt - mb);
  };
  static const char* palette[] = {"#1f6feb", "#d93025", "#188038", "#b07400", "#7b33c4"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\" data-xmin=\"" << detail::fmt(xr.lo)
      << "\" data-xmax=\"" << detail::fmt(xr.hi) << "\" data-ymin=\"" << detail::fmt(yr.lo)
      << "\" data-ymax=\"" << detail::fmt(yr.hi) << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"" << h - mb + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
      << detail::fmt(xr.lo) << "</text>\n";
  out << "<text x=\"" << w - mr << "\" y=\"" << h - mb + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
      << detail::fmt(xr.hi) << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << h - mb
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
      << detail::fmt(yr.lo) << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
      << detail::fmt(yr.hi) << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    out << "<polyline fill=\"none\" stroke=\"" << palette[si % 5] << "\" stroke-width=\"1.5\" "
        << "data-name=\"" << series[si].name << "\" points=\"";
    for (size_t i = 0; i < series[si].x.size(); ++i) {
      if (i) out << ' ';
      out << detail::fmt(sx(series[si].x[i])) << ',' << detail::fmt(sy(series[si].y[i]));
    }
    out << "\"/>\n";
    out << "<text x=\"" << w - mr - 4 << "\" y=\"" << mt + 16 + 16 * static_cast<double>(si)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" fill=\""
        << palette[si % 5] << "\">" << series[si].name << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

// Grouped bars: one group per row label, one bar per value column.
inline std::string svg_bar_chart(const std::string& title,
                                 const std::vector<std::string>& group_labels,
                                 const std::vector<std::string>& bar_labels,
                                 const std::vector<std::vector<double>>& values) {
  check(!group_labels.empty() && !bar_labels.empty(), "plot: empty bar chart");
  check(values.size() == group_labels.size(), "plot: group count mismatch");
  double ymx = 0;
  for (const auto& row : values) {
    check(row.size() == bar_labels.size(), "plot: bar count mismatch");
    for (const double v : row) ymx = std::max(ymx, v);
  }
  const auto yr = detail::padded_range(0.0, ymx);
  const double w = 720, h = 440, ml = 70, mr = 20, mt = 40, mb = 70;
  const double span = w - ml - mr;
  const double group_w = span / static_cast<double>(group_labels.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(bar_labels.size());
  static const char* palette[] = {"#1f6feb", "#d93025", "#188038", "#b07400", "#7b33c4"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\" data-ymin=\"" << detail::fmt(yr.lo)
      << "\" data-ymax=\"" << detail::fmt(yr.hi) << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
  const auto sy = [&](double v) {
    return h - mb - (v - yr.lo) / (yr.hi - yr.lo) * (h - mt - mb);
  };
  for (size_t g = 0; g < group_labels.size(); ++g) {
    const double gx = ml + group_w * (static_cast<double>(g) + 0.1);
    for (size_t b = 0; b < bar_labels.size(); ++b) {
      const double x = gx + bar_w * static_cast<double>(b);
      const double top = sy(values[g][b]);
      out << "<rect x=\"" << detail::fmt(x) << "\" y=\"" << detail::fmt(top) << "\" width=\""
          << detail::fmt(bar_w * 0.9) << "\" height=\"" << detail::fmt(h - mb - top)
          << "\" fill=\"" << palette[b % 5] << "\" data-value=\"" << detail::fmt(values[g][b])
          << "\"/>\n";
    }
    out << "<text x=\"" << detail::fmt(ml + group_w * (static_cast<double>(g) + 0.5)) << "\" y=\""
        << h - mb + 18 << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << group_labels[g] << "</text>\n";
  }
  for (size_t b = 0; b < bar_labels.size(); ++b)
    out << "<text x=\"" << w - mr - 4 << "\" y=\"" << mt + 16 + 16 * static_cast<double>(b)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" fill=\""
        << palette[b % 5] << "\">" << bar_labels[b] << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace rfdet
