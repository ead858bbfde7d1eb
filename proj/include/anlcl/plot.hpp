#pragma once

#include <string>
#include <vector>

#include "anlcl/tensor.hpp"

namespace anlcl {

struct Rgb {
  float r = 0, g = 0, b = 0;
};

// Fixed palette cycled by series/category index.
Rgb palette_color(int index);

// Minimal raster canvas for diagnostic plots: filled rectangles, lines,
// markers and a 5x7 uppercase bitmap font.
class Canvas {
 public:
  Canvas(int height, int width, Rgb background = {1, 1, 1});

  Image& image() { return img_; }
  int height() const { return img_.height(); }
  int width() const { return img_.width(); }

  void fill_rect(int top, int left, int h, int w, Rgb c);
  void line(int y0, int x0, int y1, int x1, Rgb c);
  void marker(int y, int x, Rgb c, int radius = 2);
  void text(int top, int left, const std::string& s, Rgb c, int scale = 1);

 private:
  void put(int y, int x, Rgb c);
  Image img_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Polyline chart with axes, tick labels and a legend.
Image plot_curves(const std::vector<Series>& series, const std::string& title);

// 2-D scatter with one color per group.
struct ScatterGroup {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
Image plot_scatter(const std::vector<ScatterGroup>& groups, const std::string& title);

// Labeled horizontal bars (used for per-category entropy).
Image plot_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                const std::string& title);

}  // namespace anlcl
