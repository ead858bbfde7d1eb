#pragma once

#include <utility>
#include <vector>

#include "anlcl/rng.hpp"
#include "anlcl/tensor.hpp"

namespace anlcl {

// Additive rain model: streaks rendered as anti-aliased line segments with a
// Gaussian cross profile, plus a constant veiling offset.
struct RainParams {
  int streak_count = 80;
  int length_min = 8, length_max = 24;        // px
  int width_min = 1, width_max = 2;           // px, Gaussian sigma = width/2
  float angle_min_deg = -20.0f, angle_max_deg = 20.0f;  // clockwise from vertical
  float intensity_min = 0.2f, intensity_max = 0.6f;     // (0,1]
  float veiling_strength = 0.1f;              // [0,1)
};

void validate(const RainParams& p);

// One rasterizable streak. cx/cy is the segment midpoint.
struct StreakGeom {
  float cx = 0, cy = 0;
  float angle_rad = 0;
  float length = 0;
  float sigma = 0;
  float intensity = 0;
};

// The per-streak draws behind synth_rain, in generation order.
std::vector<StreakGeom> rain_streak_geoms(int height, int width, const RainParams& params, Rng& rng);

// Renders one streak additively into `rain`. Contributions are cut off at a
// perpendicular distance of 3 sigma so streaks have finite support.
void rasterize_streak(Image& rain, const StreakGeom& g);

struct RainPair {
  Image rainy;
  Image rain;
};

// rainy = clip(clean + rain, 0, 1); rain = clip(streaks + veiling, 0, 1).
RainPair synth_rain(const Image& clean, const RainParams& params, Rng& rng);
RainPair synth_rain(const Image& clean, const RainParams& params, std::uint64_t seed);

}  // namespace anlcl
