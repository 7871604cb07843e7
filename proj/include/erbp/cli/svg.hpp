#pragma once

// Line charts as hand-emitted SVG: faint per-trial polylines, a bold ensemble
// mean per input file, fixed 800x500 canvas.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "erbp/cli/csv.hpp"

namespace erbp::cli {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

struct Series {
  std::string label;
  std::vector<std::vector<std::pair<double, double>>> trials;
  std::vector<std::pair<double, double>> mean;
};

inline Series load_series(const std::string& path, const std::string& xcol, const std::string& ycol) {
  const auto t = read_csv(path);
  const int xi = t.require(xcol);
  const int yi = t.require(ycol);
  const int ti = t.column("trial");
  if (t.rows.empty()) throw ConfigError("NoData: " + path + " has a header but no rows");
  Series s;
  s.label = path;
  std::map<std::string, std::vector<std::pair<double, double>>> by_trial;
  std::map<double, std::pair<double, std::size_t>> acc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][yi].empty()) continue;
    const double x = t.number(r, xi), y = t.number(r, yi);
    by_trial[ti >= 0 ? t.rows[r][ti] : ""].push_back({x, y});
    auto& a = acc[x];
    a.first += y;
    ++a.second;
  }
  if (acc.empty()) throw ConfigError("NoData: " + path + " column '" + ycol + "' has no values");
  for (auto& [k, pts] : by_trial) s.trials.push_back(std::move(pts));
  for (const auto& [x, a] : acc) s.mean.push_back({x, a.first / static_cast<double>(a.second)});
  return s;
}

inline std::string render_svg(const std::vector<Series>& series, const std::string& xcol, const std::string& ycol) {
  constexpr double W = 800, H = 500, L = 80, R = 20, T = 30, B = 60;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (const auto& tr : s.trials) {
      for (const auto& [x, y] : tr) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  char buf[256];
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  o << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<path d=\"M%.2f %.2f L%.2f %.2f L%.2f %.2f\" stroke=\"black\" fill=\"none\"/>\n", L, T,
                L, H - B, W - R, H - B);
  o << buf;
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">%.4g</text>\n", px(xv),
                  H - B + 18, xv);
    o << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\">%.4g</text>\n",
                  L - 6, py(yv) + 4, yv);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\">", (L + W - R) / 2,
                H - 15);
  o << buf << xml_escape(xcol) << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"20\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 %.2f)\">",
                (T + H - B) / 2, (T + H - B) / 2);
  o << buf << xml_escape(ycol) << "</text>\n";
  auto polyline = [&](const std::vector<std::pair<double, double>>& pts, const char* color, double width,
                      double opacity) {
    o << "<polyline fill=\"none\" stroke=\"" << color << "\"";
    std::snprintf(buf, sizeof buf, " stroke-width=\"%.1f\" stroke-opacity=\"%.2f\" points=\"", width, opacity);
    o << buf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(pts[i].first), py(pts[i].second));
      o << buf;
    }
    o << "\"/>\n";
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = palette[k % 6];
    for (const auto& tr : series[k].trials) polyline(tr, color, 1.0, 0.15);
    polyline(series[k].mean, color, 2.5, 1.0);
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" fill=\"%s\">", W - R - 300,
                  T + 14.0 * static_cast<double>(k + 1), color);
    o << buf << xml_escape(series[k].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void plot(const std::vector<std::string>& inputs, const std::string& xcol, const std::string& ycol,
                 const std::string& out_path) {
  if (inputs.empty()) throw ConfigError("plot needs at least one CSV");
  std::vector<Series> series;
  for (const auto& p : inputs) series.push_back(load_series(p, xcol, ycol));
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError(out_path + ": cannot open for writing");
  out << render_svg(series, xcol, ycol);
}

}  // namespace erbp::cli
