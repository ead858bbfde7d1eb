#include "anlcl/rain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace anlcl {

void validate(const RainParams& p) {
  if (p.streak_count < 0) throw Error(ErrorKind::parameter, "streak_count must be >= 0");
  if (p.length_min > p.length_max || p.length_min < 1)
    throw Error(ErrorKind::parameter, "invalid streak length range");
  if (p.width_min > p.width_max || p.width_min < 1)
    throw Error(ErrorKind::parameter, "invalid streak width range");
  if (p.angle_min_deg > p.angle_max_deg) throw Error(ErrorKind::parameter, "invalid angle range");
  if (p.intensity_min > p.intensity_max || p.intensity_min <= 0 || p.intensity_max > 1)
    throw Error(ErrorKind::parameter, "intensity range must lie in (0,1]");
  if (p.veiling_strength < 0 || p.veiling_strength >= 1)
    throw Error(ErrorKind::parameter, "veiling_strength must lie in [0,1)");
}

std::vector<StreakGeom> rain_streak_geoms(int height, int width, const RainParams& params, Rng& rng) {
  std::vector<StreakGeom> geoms;
  geoms.reserve(params.streak_count);
  for (int i = 0; i < params.streak_count; ++i) {
    StreakGeom g;
    g.cx = float(rng.uniform(0.0, width));
    g.cy = float(rng.uniform(0.0, height));
    g.angle_rad = float(rng.uniform(params.angle_min_deg, params.angle_max_deg) *
                        std::numbers::pi / 180.0);
    g.length = float(rng.uniform(params.length_min, params.length_max));
    g.sigma = float(rng.uniform(params.width_min, params.width_max)) * 0.5f;
    g.intensity = float(rng.uniform(params.intensity_min, params.intensity_max));
    geoms.push_back(g);
  }
  return geoms;
}

void rasterize_streak(Image& rain, const StreakGeom& g) {
  const int h = rain.height(), w = rain.width();
  // Direction of fall: angle measured clockwise from the +y (down) axis.
  const float dx = std::sin(g.angle_rad), dy = std::cos(g.angle_rad);
  const float half = g.length * 0.5f;
  const float x0 = g.cx - dx * half, y0 = g.cy - dy * half;
  const float x1 = g.cx + dx * half, y1 = g.cy + dy * half;
  const float cutoff = 3.0f * g.sigma;

  const int ymin = std::max(0, int(std::floor(std::min(y0, y1) - cutoff)));
  const int ymax = std::min(h - 1, int(std::ceil(std::max(y0, y1) + cutoff)));
  const int xmin = std::max(0, int(std::floor(std::min(x0, x1) - cutoff)));
  const int xmax = std::min(w - 1, int(std::ceil(std::max(x0, x1) + cutoff)));

  const float seg_x = x1 - x0, seg_y = y1 - y0;
  const float seg_len2 = std::max(seg_x * seg_x + seg_y * seg_y, 1e-12f);
  const float inv_2s2 = 1.0f / (2.0f * g.sigma * g.sigma);

  for (int y = ymin; y <= ymax; ++y)
    for (int x = xmin; x <= xmax; ++x) {
      const float px = float(x) + 0.5f, py = float(y) + 0.5f;
      float t = ((px - x0) * seg_x + (py - y0) * seg_y) / seg_len2;
      t = std::clamp(t, 0.0f, 1.0f);
      const float ddx = px - (x0 + t * seg_x), ddy = py - (y0 + t * seg_y);
      const float d2 = ddx * ddx + ddy * ddy;
      if (d2 > cutoff * cutoff) continue;
      const float v = g.intensity * std::exp(-d2 * inv_2s2);
      for (int c = 0; c < rain.channels(); ++c) rain(c, y, x) += v;
    }
}

RainPair synth_rain(const Image& clean, const RainParams& params, Rng& rng) {
  validate(params);
  if (clean.height() < 16 || clean.width() < 16)
    throw Error(ErrorKind::dimension, "image too small for the pipeline");

  Image rain(clean.channels(), clean.height(), clean.width());
  for (const StreakGeom& g : rain_streak_geoms(clean.height(), clean.width(), params, rng))
    rasterize_streak(rain, g);
  if (params.veiling_strength > 0) rain.flat() += params.veiling_strength;
  clip01_inplace(rain);

  Image rainy = clean;
  rainy.flat() += rain.flat();
  clip01_inplace(rainy);
  return {std::move(rainy), std::move(rain)};
}

RainPair synth_rain(const Image& clean, const RainParams& params, std::uint64_t seed) {
  Rng rng(seed);
  return synth_rain(clean, params, rng);
}

}  // namespace anlcl
