#include "anlcl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace anlcl {

namespace {

// 5x7 glyphs, 5 LSBs per row, bit 4 leftmost.
struct Glyph {
  char ch;
  unsigned char rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = char(c - 'a' + 'A');
  for (const auto& g : kFont)
    if (g.ch == c) return &g;
  return nullptr;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

Rgb palette_color(int index) {
  static const Rgb palette[] = {{0.12f, 0.38f, 0.80f}, {0.85f, 0.28f, 0.15f}, {0.16f, 0.62f, 0.28f},
                                {0.60f, 0.25f, 0.72f}, {0.90f, 0.62f, 0.05f}, {0.10f, 0.64f, 0.66f},
                                {0.55f, 0.35f, 0.20f}, {0.45f, 0.45f, 0.45f}};
  return palette[index % 8];
}

Canvas::Canvas(int height, int width, Rgb bg) : img_(3, height, width) {
  img_.channel(0).setConstant(bg.r);
  img_.channel(1).setConstant(bg.g);
  img_.channel(2).setConstant(bg.b);
}

void Canvas::put(int y, int x, Rgb c) {
  if (y < 0 || y >= img_.height() || x < 0 || x >= img_.width()) return;
  img_(0, y, x) = c.r;
  img_(1, y, x) = c.g;
  img_(2, y, x) = c.b;
}

void Canvas::fill_rect(int top, int left, int h, int w, Rgb c) {
  for (int y = top; y < top + h; ++y)
    for (int x = left; x < left + w; ++x) put(y, x, c);
}

void Canvas::line(int y0, int x0, int y1, int x1, Rgb c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(y0, x0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::marker(int y, int x, Rgb c, int radius) {
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) put(y + dy, x + dx, c);
}

void Canvas::text(int top, int left, const std::string& s, Rgb c, int scale) {
  int x = left;
  for (char ch : s) {
    if (const Glyph* g = find_glyph(ch)) {
      for (int r = 0; r < 7; ++r)
        for (int b = 0; b < 5; ++b)
          if (g->rows[r] & (1 << (4 - b)))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx) put(top + r * scale + sy, x + b * scale + sx, c);
    }
    x += 6 * scale;
  }
}

namespace {

struct Frame {
  int top = 28, left = 52, bottom = 24, right = 12;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  int h = 0, w = 0;

  int px(double x) const {
    const double t = (x - xmin) / (xmax - xmin + 1e-300);
    return left + int(std::lround(t * (w - left - right - 1)));
  }
  int py(double y) const {
    const double t = (y - ymin) / (ymax - ymin + 1e-300);
    return (h - bottom - 1) - int(std::lround(t * (h - top - bottom - 1)));
  }
};

Frame make_frame(Canvas& cv, double xmin, double xmax, double ymin, double ymax,
                 const std::string& title) {
  Frame f;
  f.h = cv.height();
  f.w = cv.width();
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  f.xmin = xmin;
  f.xmax = xmax;
  f.ymin = ymin - ypad;
  f.ymax = ymax + ypad;
  const Rgb axis{0.2f, 0.2f, 0.2f};
  cv.text(8, f.left, title, axis);
  cv.line(f.py(f.ymin), f.left, f.py(f.ymax), f.left, axis);
  cv.line(f.py(f.ymin), f.left, f.py(f.ymin), f.w - f.right, axis);
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.ymin + (f.ymax - f.ymin) * i / 4.0;
    const double xv = f.xmin + (f.xmax - f.xmin) * i / 4.0;
    cv.line(f.py(yv), f.left - 3, f.py(yv), f.left, axis);
    cv.text(f.py(yv) - 3, 2, short_num(yv), axis);
    cv.line(f.py(f.ymin), f.px(xv), f.py(f.ymin) + 3, f.px(xv), axis);
    cv.text(f.py(f.ymin) + 6, f.px(xv) - 8, short_num(xv), axis);
  }
  return f;
}

}  // namespace

Image plot_curves(const std::vector<Series>& series, const std::string& title) {
  Canvas cv(320, 480);
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (series.empty() || xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  Frame f = make_frame(cv, xmin, xmax, ymin, ymax, title);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Rgb c = palette_color(int(si));
    const auto& s = series[si];
    for (std::size_t i = 1; i < s.x.size(); ++i)
      cv.line(f.py(s.y[i - 1]), f.px(s.x[i - 1]), f.py(s.y[i]), f.px(s.x[i]), c);
    cv.fill_rect(18 + 10 * int(si), cv.width() - 150, 7, 7, c);
    cv.text(18 + 10 * int(si), cv.width() - 140, s.label, {0.2f, 0.2f, 0.2f});
  }
  return cv.image();
}

Image plot_scatter(const std::vector<ScatterGroup>& groups, const std::string& title) {
  Canvas cv(360, 480);
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& g : groups)
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      xmin = std::min(xmin, g.x[i]);
      xmax = std::max(xmax, g.x[i]);
      ymin = std::min(ymin, g.y[i]);
      ymax = std::max(ymax, g.y[i]);
    }
  if (groups.empty() || xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  Frame f = make_frame(cv, xmin, xmax, ymin, ymax, title);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Rgb c = palette_color(int(gi));
    for (std::size_t i = 0; i < groups[gi].x.size(); ++i)
      cv.marker(f.py(groups[gi].y[i]), f.px(groups[gi].x[i]), c, 2);
    cv.fill_rect(18 + 10 * int(gi), cv.width() - 150, 7, 7, c);
    cv.text(18 + 10 * int(gi), cv.width() - 140, groups[gi].label, {0.2f, 0.2f, 0.2f});
  }
  return cv.image();
}

Image plot_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                const std::string& title) {
  const int n = int(values.size());
  Canvas cv(60 + 26 * std::max(1, n), 480);
  const Rgb axis{0.2f, 0.2f, 0.2f};
  cv.text(8, 12, title, axis);
  double vmax = 1e-12;
  for (double v : values) vmax = std::max(vmax, v);
  for (int i = 0; i < n; ++i) {
    const int top = 30 + 26 * i;
    const int len = int(std::lround((values[i] / vmax) * (cv.width() - 220)));
    cv.fill_rect(top, 160, 18, std::max(1, len), palette_color(i));
    cv.text(top + 5, 12, labels[i], axis);
    cv.text(top + 5, 170 + len, short_num(values[i]), axis);
  }
  return cv.image();
}

}  // namespace anlcl
