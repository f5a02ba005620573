#ifndef WAVETRAIN_SVG_HPP
#define WAVETRAIN_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavetrain {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Dashed guide line with the given log-log slope, anchored where the data is.
struct SlopeGuide {
  double slope = 0.0;
  std::string label;
};

// Emits a log-log plot as a standalone SVG file. Points with non-positive
// coordinates are skipped (they have no place on log axes).
inline void write_loglog_svg(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<PlotSeries>& series,
                             const std::vector<SlopeGuide>& guides = {}) {
  const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 55;
  double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0) || !(s.y[i] > 0)) continue;
      lx0 = std::min(lx0, std::log10(s.x[i]));
      lx1 = std::max(lx1, std::log10(s.x[i]));
      ly0 = std::min(ly0, std::log10(s.y[i]));
      ly1 = std::max(ly1, std::log10(s.y[i]));
    }
  if (lx0 > lx1 || ly0 > ly1)
    throw std::runtime_error("log-log plot has no positive data: " + path);
  if (lx1 - lx0 < 1e-9) { lx0 -= 0.5; lx1 += 0.5; }
  if (ly1 - ly0 < 1e-9) { ly0 -= 0.5; ly1 += 0.5; }
  const double padx = 0.04 * (lx1 - lx0), pady = 0.06 * (ly1 - ly0);
  lx0 -= padx; lx1 += padx; ly0 -= pady; ly1 += pady;

  auto px = [&](double lx) { return ml + (lx - lx0) / (lx1 - lx0) * (W - ml - mr); };
  auto py = [&](double ly) { return H - mb - (ly - ly0) / (ly1 - ly0) * (H - mt - mb); };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };

  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' font-family='sans-serif' font-size='12'>\n";
  out << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";

  // axes box + decade gridlines/ticks
  out << "<rect x='" << ml << "' y='" << mt << "' width='" << W - ml - mr << "' height='"
      << H - mt - mb << "' fill='none' stroke='black'/>\n";
  for (int e = int(std::ceil(lx0)); e <= int(std::floor(lx1)); ++e) {
    out << "<line x1='" << px(e) << "' y1='" << mt << "' x2='" << px(e) << "' y2='" << H - mb
        << "' stroke='#dddddd'/>\n";
    out << "<text x='" << px(e) << "' y='" << H - mb + 16
        << "' text-anchor='middle'>1e" << e << "</text>\n";
  }
  for (int e = int(std::ceil(ly0)); e <= int(std::floor(ly1)); ++e) {
    out << "<line x1='" << ml << "' y1='" << py(e) << "' x2='" << W - mr << "' y2='" << py(e)
        << "' stroke='#dddddd'/>\n";
    out << "<text x='" << ml - 6 << "' y='" << py(e) + 4
        << "' text-anchor='end'>1e" << e << "</text>\n";
  }
  out << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle'>" << xlabel
      << "</text>\n";
  out << "<text x='16' y='" << H / 2 << "' text-anchor='middle' transform='rotate(-90 16 "
      << H / 2 << ")'>" << ylabel << "</text>\n";

  // slope guides anchored at the first positive point of the first series
  double ax = 0, ay = 0;
  bool anchored = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (s.x[i] > 0 && s.y[i] > 0) { ax = std::log10(s.x[i]); ay = std::log10(s.y[i]); anchored = true; break; }
    if (anchored) break;
  }
  if (anchored)
    for (const auto& g : guides) {
      double gx0 = lx0 + padx, gx1 = lx1 - padx;
      double gy0 = ay + g.slope * (gx0 - ax), gy1 = ay + g.slope * (gx1 - ax);
      out << "<line x1='" << px(gx0) << "' y1='" << py(gy0) << "' x2='" << px(gx1) << "' y2='"
          << py(gy1) << "' stroke='#888888' stroke-dasharray='6 4'/>\n";
      out << "<text x='" << px(gx1) - 4 << "' y='" << py(gy1) - 6 << "' text-anchor='end' fill='#666666'>"
          << (g.label.empty() ? ("slope " + fmt(g.slope)) : g.label) << "</text>\n";
    }

  int ci = 0;
  for (const auto& s : series) {
    const char* color = palette[ci % 6];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0) || !(s.y[i] > 0)) continue;
      out << px(std::log10(s.x[i])) << "," << py(std::log10(s.y[i])) << " ";
    }
    out << "'/>\n";
    out << "<text x='" << ml + 10 << "' y='" << mt + 18 + 16 * ci << "' fill='" << color << "'>"
        << s.label << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace wavetrain

#endif
