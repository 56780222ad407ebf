#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace imo::plot {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  double stroke_width = 1.0;
  double opacity = 1.0;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  bool zero_line = false;
};

// Grid of line-plot panels rendered as a standalone SVG. Coordinates are
// written with two decimals so output is stable across runs.
class Figure {
 public:
  Figure(std::string title, double panel_width = 520.0, double panel_height = 150.0);

  void place(int row, int column, Panel panel);
  std::string render() const;
  void save(const std::filesystem::path& path) const;

 private:
  struct Placed {
    int row;
    int column;
    Panel panel;
  };

  std::string title_;
  double panel_width_;
  double panel_height_;
  std::vector<Placed> panels_;
};

}  // namespace imo::plot
