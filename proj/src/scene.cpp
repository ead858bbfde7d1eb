#include "anlcl/scene.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace anlcl {

namespace {

// Bilinearly interpolated value noise from a coarse random grid.
void add_value_noise(Image& img, int cell, float amplitude, Rng& rng) {
  const int h = img.height(), w = img.width();
  const int gh = h / cell + 2, gw = w / cell + 2;
  std::vector<float> grid(std::size_t(gh) * gw);
  for (auto& g : grid) g = float(rng.uniform(-1.0, 1.0));
  for (int y = 0; y < h; ++y) {
    const float fy = float(y) / cell;
    const int iy = int(fy);
    const float ty = fy - iy;
    for (int x = 0; x < w; ++x) {
      const float fx = float(x) / cell;
      const int ix = int(fx);
      const float tx = fx - ix;
      const float v00 = grid[iy * gw + ix], v01 = grid[iy * gw + ix + 1];
      const float v10 = grid[(iy + 1) * gw + ix], v11 = grid[(iy + 1) * gw + ix + 1];
      const float v = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
      for (int c = 0; c < img.channels(); ++c) img(c, y, x) += amplitude * v;
    }
  }
}

void add_grating(Image& img, Rng& rng) {
  const float freq = float(rng.uniform(0.15, 0.45));
  const float theta = float(rng.uniform(0.0, std::numbers::pi));
  const float amp = float(rng.uniform(0.08, 0.2));
  const float kx = freq * std::cos(theta), ky = freq * std::sin(theta);
  const int top = rng.uniform_int(std::max(1, img.height() / 2));
  const int left = rng.uniform_int(std::max(1, img.width() / 2));
  const int hh = img.height() / 2, ww = img.width() / 2;
  for (int y = top; y < std::min(img.height(), top + hh); ++y)
    for (int x = left; x < std::min(img.width(), left + ww); ++x) {
      const float v = amp * std::sin(kx * x + ky * y);
      for (int c = 0; c < img.channels(); ++c) img(c, y, x) += v;
    }
}

void add_rects(Image& img, int count, Rng& rng) {
  for (int i = 0; i < count; ++i) {
    const int rh = 4 + rng.uniform_int(std::max(1, img.height() / 3));
    const int rw = 4 + rng.uniform_int(std::max(1, img.width() / 3));
    const int top = rng.uniform_int(std::max(1, img.height() - rh));
    const int left = rng.uniform_int(std::max(1, img.width() - rw));
    for (int c = 0; c < img.channels(); ++c) {
      const float delta = float(rng.uniform(-0.35, 0.35));
      img.channel(c).block(top, left, std::min(rh, img.height() - top),
                           std::min(rw, img.width() - left)) += delta;
    }
  }
}

}  // namespace

Image make_clean_scene(int height, int width, int channels, Rng& rng) {
  Image img(channels, height, width);
  // Base linear ramp per channel.
  for (int c = 0; c < channels; ++c) {
    const float base = float(rng.uniform(0.25, 0.65));
    const float gx = float(rng.uniform(-0.3, 0.3)) / std::max(1, width);
    const float gy = float(rng.uniform(-0.3, 0.3)) / std::max(1, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) img(c, y, x) = base + gx * x + gy * y;
  }
  add_value_noise(img, std::max(8, height / 8), 0.12f, rng);
  add_grating(img, rng);
  add_rects(img, 3 + rng.uniform_int(3), rng);
  clip01_inplace(img);
  // Keep a little headroom so added rain does not saturate everywhere.
  img.flat() = img.flat() * 0.85f + 0.05f;
  return img;
}

Image make_gradient_field(int height, int width, Rng& rng) {
  Image img(1, height, width);
  const float base = float(rng.uniform(0.3, 0.6));
  const float gx = float(rng.uniform(-0.25, 0.25)) / std::max(1, width);
  const float gy = float(rng.uniform(-0.25, 0.25)) / std::max(1, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img(0, y, x) = base + gx * x + gy * y;
  clip01_inplace(img);
  return img;
}

Image make_texture_field(int height, int width, Rng& rng) {
  Image img = Image::constant(1, height, width, 0.5f);
  const float freq = float(rng.uniform(0.5, 1.3));
  const float theta = float(rng.uniform(0.0, std::numbers::pi));
  const float kx = freq * std::cos(theta), ky = freq * std::sin(theta);
  const float phase = float(rng.uniform(0.0, 2.0 * std::numbers::pi));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img(0, y, x) += 0.2f * std::sin(kx * x + ky * y + phase);
  add_value_noise(img, 2, 0.2f, rng);
  clip01_inplace(img);
  return img;
}

Image make_edge_field(int height, int width, Rng& rng) {
  Image img = Image::constant(1, height, width, float(rng.uniform(0.2, 0.4)));
  add_rects(img, 6, rng);
  // Real edges sit on mildly varying surfaces, not perfect plateaus.
  add_value_noise(img, 6, 0.05f, rng);
  clip01_inplace(img);
  return img;
}

}  // namespace anlcl
