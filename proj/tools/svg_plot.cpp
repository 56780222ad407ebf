#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "imo/errors.hpp"

namespace imo::plot {
namespace {

constexpr double kMarginLeft = 70.0;
constexpr double kMarginTop = 40.0;
constexpr double kGapX = 90.0;
constexpr double kGapY = 45.0;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Bounds {
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -std::numeric_limits<double>::infinity();
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
};

Bounds bounds_of(const Panel& panel) {
  Bounds b;
  for (const auto& s : panel.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      b.x_min = std::min(b.x_min, s.x[i]);
      b.x_max = std::max(b.x_max, s.x[i]);
      b.y_min = std::min(b.y_min, s.y[i]);
      b.y_max = std::max(b.y_max, s.y[i]);
    }
  }
  if (!std::isfinite(b.x_min)) b = {0.0, 1.0, 0.0, 1.0};
  if (panel.zero_line) {
    b.y_min = std::min(b.y_min, 0.0);
    b.y_max = std::max(b.y_max, 0.0);
  }
  if (b.x_max <= b.x_min) b.x_max = b.x_min + 1.0;
  if (b.y_max <= b.y_min) {
    const double pad = std::max(1e-12, std::abs(b.y_min) * 0.1);
    b.y_min -= pad;
    b.y_max += pad;
  }
  const double pad = 0.05 * (b.y_max - b.y_min);
  b.y_min -= pad;
  b.y_max += pad;
  return b;
}

}  // namespace

Figure::Figure(std::string title, double panel_width, double panel_height)
    : title_(std::move(title)), panel_width_(panel_width), panel_height_(panel_height) {}

void Figure::place(int row, int column, Panel panel) {
  panels_.push_back({row, column, std::move(panel)});
}

std::string Figure::render() const {
  int rows = 1;
  int cols = 1;
  for (const auto& p : panels_) {
    rows = std::max(rows, p.row + 1);
    cols = std::max(cols, p.column + 1);
  }
  const double width = kMarginLeft + cols * panel_width_ + (cols - 1) * kGapX + 30.0;
  const double height = kMarginTop + rows * panel_height_ + rows * kGapY;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width) << "\" height=\"" << fixed(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title_)
      << "</text>\n";

  for (const auto& placed : panels_) {
    const double x0 = kMarginLeft + placed.column * (panel_width_ + kGapX);
    const double y0 = kMarginTop + placed.row * (panel_height_ + kGapY);
    const Bounds b = bounds_of(placed.panel);
    auto map_x = [&](double x) { return x0 + (x - b.x_min) / (b.x_max - b.x_min) * panel_width_; };
    auto map_y = [&](double y) { return y0 + panel_height_ - (y - b.y_min) / (b.y_max - b.y_min) * panel_height_; };

    svg << "<g class=\"panel\">\n";
    svg << "<text x=\"" << fixed(x0) << "\" y=\"" << fixed(y0 - 6) << "\">" << escape(placed.panel.title) << "</text>\n";
    svg << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(y0) << "\" width=\"" << fixed(panel_width_)
        << "\" height=\"" << fixed(panel_height_) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>\n";
    for (double v : {b.y_min, b.y_max}) {
      svg << "<text x=\"" << fixed(x0 - 4) << "\" y=\"" << fixed(map_y(v) + 4) << "\" text-anchor=\"end\">" << tick(v)
          << "</text>\n";
    }
    for (double v : {b.x_min, b.x_max}) {
      svg << "<text x=\"" << fixed(map_x(v)) << "\" y=\"" << fixed(y0 + panel_height_ + 13)
          << "\" text-anchor=\"middle\">" << tick(v) << "</text>\n";
    }
    if (placed.panel.zero_line && b.y_min < 0.0 && b.y_max > 0.0) {
      svg << "<line x1=\"" << fixed(x0) << "\" y1=\"" << fixed(map_y(0.0)) << "\" x2=\"" << fixed(x0 + panel_width_)
          << "\" y2=\"" << fixed(map_y(0.0)) << "\" stroke=\"#999\" stroke-dasharray=\"3,3\" stroke-width=\"0.6\"/>\n";
    }
    for (const auto& s : placed.panel.series) {
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << fixed(s.stroke_width)
          << "\" stroke-opacity=\"" << fixed(s.opacity) << "\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (i > 0) svg << ' ';
        svg << fixed(map_x(s.x[i])) << ',' << fixed(map_y(s.y[i]));
      }
      svg << "\"/>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void Figure::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << render();
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

}  // namespace imo::plot
