#pragma once

#include "anlcl/rng.hpp"
#include "anlcl/tensor.hpp"

namespace anlcl {

// Procedural clean scenes for the synthetic dataset: smooth gradients, value
// noise, a repeated grating texture, and a few sharp-edged rectangles. These
// give block matching real structure to work with (flat areas, repeating
// texture, edges) without any external data.
Image make_clean_scene(int height, int width, int channels, Rng& rng);

// Single-purpose fixture generators for the asymmetry analysis.
Image make_gradient_field(int height, int width, Rng& rng);   // smooth, 1ch
Image make_texture_field(int height, int width, Rng& rng);    // grating + noise, 1ch
Image make_edge_field(int height, int width, Rng& rng);       // step edges, 1ch

}  // namespace anlcl
