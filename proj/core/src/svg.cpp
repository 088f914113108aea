#include "mapid/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mapid {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void grow(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series, int width, int height) {
  const double ml = 62, mr = 18, mt = 34, mb = 46;  // margins
  const double pw = width - ml - mr, ph = height - mt - mb;

  bool any = false;
  Range rx, ry;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        rx.lo = rx.hi = s.x[i];
        ry.lo = ry.hi = s.y[i];
        any = true;
      } else {
        rx.grow(s.x[i]);
        ry.grow(s.y[i]);
      }
    }
  if (!any) {
    rx = {0.0, 1.0};
    ry = {0.0, 1.0};
  }
  auto pad = [](Range& r) {
    const double span = r.hi - r.lo;
    const double p = span > 0 ? 0.05 * span : std::max(1.0, std::fabs(r.hi)) * 0.05;
    r.lo -= p;
    r.hi += p;
  };
  pad(rx);
  pad(ry);

  auto px = [&](double v) { return ml + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double v) { return mt + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
    << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";

  // Axes and ticks.
  f << "<g stroke=\"#444\" stroke-width=\"1\" font-family=\"sans-serif\" "
       "font-size=\"10\">\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
    << "\" y2=\"" << mt + ph << "\"/>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
    << mt + ph << "\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double tx = rx.lo + (rx.hi - rx.lo) * i / 5.0;
    const double ty = ry.lo + (ry.hi - ry.lo) * i / 5.0;
    f << "<line x1=\"" << px(tx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(tx)
      << "\" y2=\"" << mt + ph + 4 << "\"/>\n";
    f << "<text x=\"" << px(tx) << "\" y=\"" << mt + ph + 16
      << "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#222\">" << num(tx)
      << "</text>\n";
    f << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(ty) << "\" x2=\"" << ml
      << "\" y2=\"" << py(ty) << "\"/>\n";
    f << "<text x=\"" << ml - 7 << "\" y=\"" << py(ty) + 3
      << "\" text-anchor=\"end\" stroke=\"none\" fill=\"#222\">" << num(ty)
      << "</text>\n";
  }
  f << "</g>\n";
  f << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << x_label << "</text>\n";
  f << "<text x=\"14\" y=\"" << mt + ph / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << y_label
    << "</text>\n";

  for (const auto& s : series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.line) {
      bool open = false;
      for (std::size_t i = 0; i < n; ++i) {
        const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]);
        if (ok && !open) {
          f << "<polyline fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.5\" points=\"";
          open = true;
        }
        if (ok) f << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
        if (!ok && open) {
          f << "\"/>\n";
          open = false;
        }
      }
      if (open) f << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        f << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
          << "\" r=\"2.2\" fill=\"" << s.color << "\"/>\n";
      }
    }
  }

  // Legend.
  double ly = mt + 8;
  for (const auto& s : series) {
    if (s.label.empty()) continue;
    f << "<rect x=\"" << ml + pw - 130 << "\" y=\"" << ly - 8
      << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
    f << "<text x=\"" << ml + pw - 115 << "\" y=\"" << ly + 1
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
      << "</text>\n";
    ly += 16;
  }
  f << "</svg>\n";
}

}  // namespace mapid
