#pragma once

#include "anlcl/patch.hpp"
#include "anlcl/rng.hpp"

namespace anlcl {

// Constructed patch stacks for the image/rain asymmetry diagnostics: texture
// and edge patches on the image side, thin streaks and flat veiling on the
// rain side, plus smooth image patches for reference.
struct AsymmetryFixtures {
  PatchStack<float> smooth;
  PatchStack<float> texture;
  PatchStack<float> edge;
  PatchStack<float> streak;
  PatchStack<float> veiling;
};

AsymmetryFixtures make_asymmetry_fixtures(int patch_size, int per_category, std::uint64_t seed);

}  // namespace anlcl
