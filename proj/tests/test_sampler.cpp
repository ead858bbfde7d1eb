#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "anlcl/sampler.hpp"
#include "anlcl/scene.hpp"
#include "oracles.hpp"

using namespace anlcl;

namespace {

Image random_image(int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(c, h, w);
  for (std::int64_t i = 0; i < img.size(); ++i) img.data()[i] = float(rng.uniform());
  return img;
}

std::uint64_t cell_key(const PatchRef& r) {
  return (std::uint64_t(std::uint32_t(r.top)) << 32) | std::uint32_t(r.left);
}

}  // namespace

TEST_CASE("patch_distance") {
  const Image a = random_image(3, 16, 16, 1);
  const Image b = random_image(3, 16, 16, 2);
  CHECK(patch_distance(a, a) == 0.0);
  CHECK(patch_distance(a, b) == doctest::Approx(oracle::patch_distance(a, b)).epsilon(1e-12));
  CHECK(patch_distance(a, b) == patch_distance(b, a));

  const Image zeros(1, 16, 16);
  const Image ones = Image::constant(1, 16, 16, 1.0f);
  CHECK(patch_distance(zeros, ones) == doctest::Approx(256.0));

  const Image wrong(1, 8, 8);
  CHECK_THROWS_AS(patch_distance(a, wrong), Error);
}

TEST_CASE("nonlocal_topk matches exhaustive sort on a 64x64 image") {
  Rng rng(5);
  const Image img = make_clean_scene(64, 64, 1, rng);
  const auto stack = extract_patches(img, 16, 4);
  const int qi = 37;

  // oracle: full sort of all pairwise distances with index tie-break
  std::vector<std::pair<double, int>> dist;
  for (std::size_t i = 0; i < stack.size(); ++i)
    dist.push_back({oracle::patch_distance(stack.patches[qi], stack.patches[i]), int(i)});
  auto nearest = dist;
  std::sort(nearest.begin(), nearest.end());
  auto farthest = dist;
  std::sort(farthest.begin(), farthest.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  for (int k : {1, 5, int(stack.size())}) {
    const auto near = nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, k, false);
    const auto far = nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, k, true);
    REQUIRE(int(near.matches.size()) == k);
    for (int i = 0; i < k; ++i) {
      REQUIRE(near.matches[i] == stack.refs[nearest[i].second]);
      REQUIRE(near.distances[i] == doctest::Approx(nearest[i].first).epsilon(1e-9));
      REQUIRE(far.matches[i] == stack.refs[farthest[i].second]);
    }
  }

  // query present among candidates: rank 0 is the query itself at distance 0
  const auto self = nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, 1, false);
  CHECK(self.matches[0] == stack.refs[qi]);
  CHECK(self.distances[0] == 0.0);

  // ordering contracts
  const auto near8 = nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, 8, false);
  CHECK(std::is_sorted(near8.distances.begin(), near8.distances.end()));
  const auto far8 = nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, 8, true);
  CHECK(std::is_sorted(far8.distances.rbegin(), far8.distances.rend()));

  CHECK_THROWS_AS(nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, int(stack.size()) + 1, false),
                  Error);
}

TEST_CASE("nonlocal_topk properties: disjointness and prefix monotonicity") {
  Rng rng(6);
  const Image img = make_clean_scene(64, 64, 1, rng);
  const auto stack = extract_patches(img, 16, 8);
  const int k = 10;  // 2k <= 49 fails; use k with 2k <= grid size
  const auto near = nonlocal_topk(stack.patches[3], stack.refs[3], stack, k, false);
  const auto far = nonlocal_topk(stack.patches[3], stack.refs[3], stack, k, true);
  std::set<std::uint64_t> seen;
  for (const auto& r : near.matches) seen.insert(cell_key(r));
  for (const auto& r : far.matches) CHECK(!seen.count(cell_key(r)));

  const auto near_more = nonlocal_topk(stack.patches[3], stack.refs[3], stack, k + 5, false);
  for (int i = 0; i < k; ++i) REQUIRE(near_more.matches[i] == near.matches[i]);
}

TEST_CASE("sample_layer_patches nonlocal mode") {
  Rng rng(7);
  const Image b_hat = make_clean_scene(96, 96, 3, rng);
  const Image r_hat = random_image(3, 96, 96, 8);

  SamplerConfig cfg;
  cfg.patch_size = 16;
  cfg.stride = 8;
  cfg.num_pos = 6;
  cfg.num_neg = 12;
  cfg.num_loc = 8;

  const auto s = sample_layer_patches(b_hat, r_hat, cfg, std::uint64_t(3));
  REQUIRE(s.pos_b.size() == 6);
  REQUIRE(s.pos_r.size() == 12);
  REQUIRE(s.neg_r.size() == 12);
  REQUIRE(s.neg_b.size() == 6);

  // every selected positive is at least as close as every excluded grid patch
  const auto grid = extract_patches(b_hat, 16, 8);
  const auto anchor_patch = read_patch(b_hat, s.anchor_b);
  double worst_selected = 0;
  std::set<std::uint64_t> selected;
  for (std::size_t i = 0; i < s.pos_b.size(); ++i) {
    worst_selected = std::max(worst_selected, oracle::patch_distance(anchor_patch, s.pos_b.patches[i]));
    selected.insert(cell_key(s.pos_b.refs[i]));
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!selected.count(cell_key(grid.refs[i])))
      REQUIRE(oracle::patch_distance(anchor_patch, grid.patches[i]) >= worst_selected - 1e-9);

  // determinism
  const auto s2 = sample_layer_patches(b_hat, r_hat, cfg, std::uint64_t(3));
  CHECK(s2.anchor_b == s.anchor_b);
  for (std::size_t i = 0; i < s.pos_b.size(); ++i) REQUIRE(s2.pos_b.refs[i] == s.pos_b.refs[i]);

  // constant layer: tie-break picks the first cells in grid order
  const Image flat = Image::constant(3, 96, 96, 0.5f);
  const auto sf = sample_layer_patches(flat, r_hat, cfg, std::uint64_t(4));
  const auto flat_grid = patch_grid(96, 96, 16, 8);
  for (std::size_t i = 0; i < sf.pos_b.size(); ++i) REQUIRE(sf.pos_b.refs[i] == flat_grid[i]);

  // insufficient candidates
  SamplerConfig big = cfg;
  big.num_neg = 10000;
  CHECK_THROWS_AS(sample_layer_patches(b_hat, r_hat, big, std::uint64_t(1)), Error);
}

TEST_CASE("sample_layer_patches neighbour mode stays within one stride") {
  Rng rng(9);
  const Image b_hat = make_clean_scene(96, 96, 3, rng);
  const Image r_hat = random_image(3, 96, 96, 10);
  SamplerConfig cfg;
  cfg.patch_size = 16;
  cfg.stride = 8;
  cfg.num_pos = 8;
  cfg.num_neg = 9;
  cfg.num_loc = 4;
  cfg.mode = SampleMode::neighbour;
  const auto s = sample_layer_patches(b_hat, r_hat, cfg, std::uint64_t(11));
  for (const auto& r : s.pos_b.refs) {
    CHECK(std::abs(r.top - s.anchor_b.top) <= cfg.stride);
    CHECK(std::abs(r.left - s.anchor_b.left) <= cfg.stride);
  }
}

TEST_CASE("sample_location_pairs") {
  Rng rng(12);
  const Image o = make_clean_scene(96, 96, 3, rng);
  const Image b_hat = random_image(3, 96, 96, 13);
  SamplerConfig cfg;
  cfg.patch_size = 16;
  cfg.stride = 8;
  cfg.num_pos = 4;
  cfg.num_neg = 8;
  cfg.num_loc = 6;

  const auto pairs = sample_location_pairs(o, b_hat, cfg, std::uint64_t(2));
  REQUIRE(pairs.size() == 6);
  for (const auto& p : pairs) {
    CHECK(p.pos_o.top == p.pos_b.top);
    CHECK(p.pos_o.left == p.pos_b.left);
    REQUIRE(p.negative_refs.size() == 6);
  }

  // reverse mode: selected negatives are at least as far as every excluded patch
  const auto grid = extract_patches(o, 16, 8);
  for (const auto& p : pairs) {
    const auto anchor_patch = read_patch(o, p.pos_o);
    double nearest_selected = 1e300;
    std::set<std::uint64_t> selected;
    for (const auto& r : p.negative_refs) {
      nearest_selected =
          std::min(nearest_selected, oracle::patch_distance(anchor_patch, read_patch(o, r)));
      selected.insert(cell_key(r));
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!selected.count(cell_key(grid.refs[i])))
        REQUIRE(oracle::patch_distance(anchor_patch, grid.patches[i]) <= nearest_selected + 1e-9);
  }

  // constant image: tie-break yields grid order
  const Image flat = Image::constant(3, 96, 96, 0.25f);
  const auto flat_pairs = sample_location_pairs(flat, b_hat, cfg, std::uint64_t(5));
  const auto flat_grid = patch_grid(96, 96, 16, 8);
  for (const auto& p : flat_pairs)
    for (std::size_t i = 0; i < p.negative_refs.size(); ++i)
      REQUIRE(p.negative_refs[i] == flat_grid[i]);

  // random mode produces uniform refs, still on the grid
  SamplerConfig rnd = cfg;
  rnd.mode = SampleMode::random;
  const auto rpairs = sample_location_pairs(o, b_hat, rnd, std::uint64_t(3));
  std::set<std::uint64_t> grid_cells;
  for (const auto& r : grid.refs) grid_cells.insert(cell_key(r));
  for (const auto& p : rpairs)
    for (const auto& r : p.negative_refs) CHECK(grid_cells.count(cell_key(r)) == 1);
}
