#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "anlcl/dataset.hpp"
#include "anlcl/image_io.hpp"
#include "anlcl/image_ops.hpp"
#include "anlcl/rain.hpp"
#include "anlcl/scene.hpp"
#include "oracles.hpp"

using namespace anlcl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("anlcl_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Image random_image(int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(c, h, w);
  for (std::int64_t i = 0; i < img.size(); ++i) img.data()[i] = float(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("image io round trip") {
  const fs::path dir = temp_dir("io");
  Rng rng(17);
  const Image original = make_clean_scene(48, 64, 3, rng);
  save_image(dir / "a.png", original);
  const Image back = load_image(dir / "a.png");

  REQUIRE(back.channels() == 3);
  REQUIRE(back.height() == 48);
  REQUIRE(back.width() == 64);
  // 8-bit quantization bound per pixel
  CHECK(double((original.flat() - back.flat()).abs().maxCoeff()) <= 1.0 / 255.0 + 1e-6);

  // saving the loaded image again reproduces identical pixels
  save_image(dir / "b.png", back);
  const Image back2 = load_image(dir / "b.png");
  CHECK(double((back.flat() - back2.flat()).abs().maxCoeff()) == 0.0);
}

TEST_CASE("load_image endpoint normalization") {
  const fs::path dir = temp_dir("io_norm");
  Image img(1, 16, 16);
  img.flat().setZero();
  img(0, 0, 0) = 1.0f;
  save_image(dir / "x.png", img);
  const Image back = load_image(dir / "x.png");
  CHECK(back(0, 0, 0) == 1.0f);  // 255 -> 1.0 exactly
  CHECK(back(0, 5, 5) == 0.0f);  // 0 -> 0.0 exactly
}

TEST_CASE("load_image error categories") {
  const fs::path dir = temp_dir("io_err");
  CHECK_THROWS_AS(load_image(dir / "missing.png"), Error);
  try {
    load_image(dir / "missing.png");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
  {
    std::ofstream out(dir / "junk.png", std::ios::binary);
    out << "not an image at all";
  }
  try {
    load_image(dir / "junk.png");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
  }
}

TEST_CASE("random_crop determinism and window equality") {
  const Image img = random_image(3, 512, 512, 5);
  const Image a = random_crop(img, 64, std::uint64_t(7));
  const Image b = random_crop(img, 64, std::uint64_t(7));
  CHECK(double((a.flat() - b.flat()).abs().maxCoeff()) == 0.0);

  // identity crop
  const Image full = random_crop(img, 512, std::uint64_t(3));
  CHECK(double((full.flat() - img.flat()).abs().maxCoeff()) == 0.0);

  // window contents match the source at the reported offset
  Rng rng(11);
  const CropWindow w = pick_crop_window(img.height(), img.width(), 48, rng);
  const Image c = crop(img, w);
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) REQUIRE(c(ch, y, x) == img(ch, w.top + y, w.left + x));

  CHECK_THROWS_AS(random_crop(img, 1024, std::uint64_t(1)), Error);
}

TEST_CASE("downsample") {
  const Image img = random_image(3, 64, 64, 9);
  const Image same = downsample(img, 1);
  CHECK(double((same.flat() - img.flat()).abs().maxCoeff()) == 0.0);

  const Image constant = Image::constant(1, 32, 32, 0.37f);
  const Image down = downsample(constant, 4);
  CHECK(down.height() == 8);
  CHECK(double((down.flat() - 0.37f).abs().maxCoeff()) < 1e-6);

  Image checker(1, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) checker(0, y, x) = float((x + y) % 2);
  const Image half = downsample(checker, 2);
  for (std::int64_t i = 0; i < half.size(); ++i) CHECK(half.data()[i] == doctest::Approx(0.5));

  CHECK_THROWS_AS(downsample(img, 0), Error);

  // non-multiple extents survive via reflection padding
  const Image odd = random_image(1, 33, 35, 4);
  const Image d = downsample(odd, 4);
  CHECK(d.height() == 9);
  CHECK(d.width() == 9);
}

TEST_CASE("extract_patches grid enumeration") {
  const Image tiny = random_image(1, 16, 16, 2);
  CHECK(extract_patches(tiny, 16, 1).size() == 1);

  const Image img32 = random_image(1, 32, 32, 3);
  CHECK(extract_patches(img32, 16, 16).size() == 4);

  // count oracle: explicit loop
  const Image img64 = random_image(3, 64, 64, 4);
  const auto stack = extract_patches(img64, 16, 8);
  int count = 0;
  for (int top = 0; top + 16 <= 64; top += 8)
    for (int left = 0; left + 16 <= 64; left += 8) ++count;
  CHECK(int(stack.size()) == count);
  CHECK(count == 49);

  // re-reading each ref reproduces the stored block bit-exactly
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto again = read_patch(img64, stack.refs[i]);
    REQUIRE(double((again.flat() - stack.patches[i].flat()).abs().maxCoeff()) == 0.0);
  }

  CHECK_THROWS_AS(extract_patches(img64, 128, 8), Error);
  CHECK_THROWS_AS(extract_patches(img64, 16, 0), Error);
}

TEST_CASE("synth_rain basic contracts") {
  Rng rng(21);
  const Image clean = make_clean_scene(96, 96, 3, rng);

  RainParams none;
  none.streak_count = 0;
  none.veiling_strength = 0.0f;
  const RainPair p0 = synth_rain(clean, none, std::uint64_t(1));
  CHECK(double(p0.rain.flat().abs().maxCoeff()) == 0.0);
  CHECK(double((p0.rainy.flat() - clean.flat()).abs().maxCoeff()) == 0.0);

  RainParams veil = none;
  veil.veiling_strength = 0.2f;
  const RainPair pv = synth_rain(clean, veil, std::uint64_t(1));
  CHECK(double((pv.rain.flat() - 0.2f).abs().maxCoeff()) < 1e-6);

  RainParams full;
  const RainPair pf = synth_rain(clean, full, std::uint64_t(5));
  CHECK(double(pf.rain.flat().minCoeff()) >= 0.0);
  CHECK(double(pf.rainy.flat().maxCoeff()) <= 1.0);
  CHECK(double(pf.rainy.flat().minCoeff()) >= 0.0);
  // where clean + rain stays below 1, rainy - clean == rain exactly
  for (std::int64_t i = 0; i < clean.size(); ++i)
    if (clean.data()[i] + pf.rain.data()[i] <= 1.0f)
      REQUIRE(std::abs(pf.rainy.data()[i] - clean.data()[i] - pf.rain.data()[i]) <= 1e-6f);

  // determinism per seed
  const RainPair pf2 = synth_rain(clean, full, std::uint64_t(5));
  CHECK(double((pf.rain.flat() - pf2.rain.flat()).abs().maxCoeff()) == 0.0);

  RainParams bad;
  bad.intensity_max = 1.5f;
  CHECK_THROWS_AS(synth_rain(clean, bad, std::uint64_t(1)), Error);
}

TEST_CASE("synth_rain streak count equals connected components when disjoint") {
  const Image clean(3, 384, 384);  // black canvas

  RainParams p;
  p.streak_count = 20;
  p.length_min = 8;
  p.length_max = 14;
  p.width_min = 1;
  p.width_max = 1;
  p.veiling_strength = 0.0f;

  // Pick a seed whose 20 streak supports are pairwise disjoint, verified
  // geometrically from the published per-streak draws, then assert the
  // pixel-level component count with an independent flood fill.
  std::uint64_t chosen_seed = 0;
  bool found = false;
  for (std::uint64_t seed = 1; seed < 200 && !found; ++seed) {
    Rng rng(seed);
    const auto geoms = rain_streak_geoms(clean.height(), clean.width(), p, rng);
    bool disjoint = true;
    for (std::size_t i = 0; i < geoms.size() && disjoint; ++i)
      for (std::size_t j = i + 1; j < geoms.size() && disjoint; ++j) {
        // conservative capsule distance: centers closer than the sum of
        // half-lengths plus both cutoffs could touch
        const double dx = geoms[i].cx - geoms[j].cx, dy = geoms[i].cy - geoms[j].cy;
        const double reach_i = geoms[i].length / 2.0 + 3 * geoms[i].sigma + 1.5;
        const double reach_j = geoms[j].length / 2.0 + 3 * geoms[j].sigma + 1.5;
        if (std::sqrt(dx * dx + dy * dy) < reach_i + reach_j) disjoint = false;
      }
    // all supports must also stay inside the canvas
    for (const auto& g : geoms) {
      const double reach = g.length / 2.0 + 3 * g.sigma + 1.5;
      if (g.cx < reach || g.cy < reach || g.cx > clean.width() - reach ||
          g.cy > clean.height() - reach)
        disjoint = false;
    }
    if (disjoint) {
      chosen_seed = seed;
      found = true;
    }
  }
  REQUIRE(found);
  const RainPair pair = synth_rain(clean, p, chosen_seed);
  CHECK(oracle::connected_components(pair.rain, 0.0f) == 20);
}

TEST_CASE("dataset writer and iterator") {
  const fs::path dir = temp_dir("dataset");
  SynthDatasetSpec spec;
  spec.count = 3;
  spec.height = 96;
  spec.width = 96;
  spec.seed = 9;
  write_synth_dataset(dir, spec);

  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(list_images(dir / "clean").size() == 3);
  CHECK(list_images(dir / "rainy").size() == 3);
  CHECK(list_images(dir / "rain").size() == 3);

  const SynthDatasetSpec back = read_synth_manifest(dir);
  CHECK(back.count == 3);
  CHECK(back.seed == 9);

  // one epoch yields exactly count crops, each crop x crop
  DatasetIter it(dir / "rainy", 64, 1, 42);
  CHECK(it.epoch_size() == 3);
  for (int i = 0; i < 3; ++i) {
    const Image img = it.next();
    REQUIRE(img.height() == 64);
    REQUIRE(img.width() == 64);
  }

  // identical seeds give identical sequences, including across epochs
  DatasetIter a(dir / "rainy", 64, 1, 4242), b(dir / "rainy", 64, 1, 4242);
  for (int i = 0; i < 7; ++i) {
    const Image ia = a.next(), ib = b.next();
    REQUIRE(double((ia.flat() - ib.flat()).abs().maxCoeff()) == 0.0);
  }

  // paired iteration crops all three layers at the same window (each layer is
  // quantized separately on disk, hence the tolerance)
  PairedDatasetIter pit(dir, 64, 1, 7);
  const PairedSample s = pit.next();
  for (std::int64_t i = 0; i < s.rainy.size(); ++i)
    if (s.clean.data()[i] + s.rain.data()[i] <= 1.0f)
      REQUIRE(std::abs(s.rainy.data()[i] - std::min(1.0f, s.clean.data()[i] + s.rain.data()[i])) <=
            0.02f);

  const fs::path empty = temp_dir("dataset_empty");
  CHECK_THROWS_AS(DatasetIter(empty, 64, 1, 1), Error);
}
