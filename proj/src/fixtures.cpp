#include "anlcl/fixtures.hpp"

#include "anlcl/rain.hpp"
#include "anlcl/scene.hpp"

namespace anlcl {

namespace {

// One field per patch so each category spans many distinct pattern draws
// (frequencies, orientations, layouts) instead of a handful of canvases.
template <typename MakeField>
void fill_from_fields(PatchStack<float>& out, int patch, int want, Rng& base, std::uint64_t stream,
                      MakeField&& make_field) {
  for (int i = 0; int(out.size()) < want; ++i) {
    Rng r = base.fork(stream).fork(i);
    const Image field = make_field(r);
    const PatchRef center{i, (field.height() - patch) / 2, (field.width() - patch) / 2, patch};
    out.push(read_patch(field, center), center);
  }
}

}  // namespace

AsymmetryFixtures make_asymmetry_fixtures(int patch_size, int per_category, std::uint64_t seed) {
  if (patch_size < 4) throw Error(ErrorKind::parameter, "patch_size too small");
  if (per_category < 1) throw Error(ErrorKind::parameter, "per_category must be >= 1");
  const int canvas = std::max(32, 2 * patch_size);
  Rng base(seed);
  AsymmetryFixtures fx;

  fill_from_fields(fx.smooth, patch_size, per_category, base, 0,
                   [&](Rng& r) { return make_gradient_field(canvas, canvas, r); });
  fill_from_fields(fx.texture, patch_size, per_category, base, 1,
                   [&](Rng& r) { return make_texture_field(canvas, canvas, r); });
  fill_from_fields(fx.edge, patch_size, per_category, base, 2,
                   [&](Rng& r) { return make_edge_field(canvas, canvas, r); });

  // Thin streaks on an empty background, sharing a near-vertical fall
  // direction the way streaks within one rainy exposure do. Keep patches that
  // contain a streak but are not saturated by it.
  RainParams sp;
  sp.streak_count = 10;
  sp.length_min = 2 * patch_size;  // streaks cross the whole patch
  sp.length_max = 3 * patch_size;
  sp.width_min = 1;
  sp.width_max = 1;
  sp.angle_min_deg = -4.0f;
  sp.angle_max_deg = 4.0f;
  sp.intensity_min = 0.4f;
  sp.intensity_max = 0.9f;
  sp.veiling_strength = 0.0f;
  int canvas_id = 0;
  const Image black(1, canvas, canvas);
  while (int(fx.streak.size()) < per_category) {
    Rng r = base.fork(3).fork(canvas_id++);
    const Image rain = synth_rain(black, sp, r).rain;
    for (const auto& ref : patch_grid(canvas, canvas, patch_size, patch_size)) {
      if (int(fx.streak.size()) >= per_category) break;
      Tensor<float> p = read_patch(rain, ref);
      const float covered = float((p.flat() > 0.01f).count()) / float(p.size());
      if (covered > 0.05f && covered < 0.6f) fx.streak.push(std::move(p), ref);
    }
  }

  // Veiling: constant offsets, one level per patch.
  for (int i = 0; i < per_category; ++i) {
    Rng r = base.fork(4).fork(i);
    const float level = float(r.uniform(0.05, 0.3));
    fx.veiling.push(Tensor<float>::constant(1, patch_size, patch_size, level),
                    PatchRef{i, 0, 0, patch_size});
  }
  return fx;
}

}  // namespace anlcl
