#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "anlcl/patch.hpp"
#include "anlcl/rng.hpp"

namespace anlcl {

enum class SampleMode { nonlocal, reverse_nonlocal, random, neighbour };

const char* to_string(SampleMode m);
SampleMode sample_mode_from_string(const std::string& s);

struct SamplerConfig {
  int patch_size = 16;
  int stride = 8;
  int num_pos = 8;    // positives per layer anchor on the image side
  int num_neg = 256;  // rain-side group size
  int num_loc = 256;  // location pairs and negatives per pair
  SampleMode mode = SampleMode::nonlocal;
};

inline void validate(const SamplerConfig& c) {
  if (c.patch_size < 1 || c.stride < 1) throw Error(ErrorKind::parameter, "invalid patch size/stride");
  if (c.num_pos < 1 || c.num_neg < 1 || c.num_loc < 1)
    throw Error(ErrorKind::parameter, "sample counts must be >= 1");
}

// Sum of squared differences over all pixels and channels.
template <typename T>
double patch_distance(const Tensor<T>& p, const Tensor<T>& q) {
  require_same_shape(p, q, "patch_distance");
  return double((p.flat().template cast<double>() - q.flat().template cast<double>()).square().sum());
}

struct NonLocalSet {
  PatchRef query;
  std::vector<PatchRef> matches;
  std::vector<double> distances;  // ascending for nearest, descending for farthest
};

// Exact exhaustive top-k by patch_distance. Ties break by candidate index.
template <typename T>
NonLocalSet nonlocal_topk(const Tensor<T>& query_patch, const PatchRef& query_ref,
                          const PatchStack<T>& candidates, int k, bool farthest) {
  if (k < 1 || std::size_t(k) > candidates.size())
    throw Error(ErrorKind::parameter, "k out of range for candidate set");
  const std::size_t n = candidates.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = patch_distance(query_patch, candidates.patches[i]);

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto cmp = [&](int a, int b) {
    if (dist[a] != dist[b]) return farthest ? dist[a] > dist[b] : dist[a] < dist[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);

  NonLocalSet out;
  out.query = query_ref;
  out.matches.reserve(k);
  out.distances.reserve(k);
  for (int i = 0; i < k; ++i) {
    out.matches.push_back(candidates.refs[idx[i]]);
    out.distances.push_back(dist[idx[i]]);
  }
  return out;
}

template <typename T>
struct LayerSamples {
  PatchRef anchor_b;
  PatchStack<T> pos_b;  // num_pos patches of the clean layer
  PatchRef anchor_r;
  PatchStack<T> pos_r;  // num_neg patches of the rain layer
  PatchStack<T> neg_r;  // rain-layer negatives for the clean anchor (num_neg)
  PatchStack<T> neg_b;  // clean-layer negatives for the rain anchor (num_pos)
};

struct LocationPair {
  PatchRef pos_o;
  PatchRef pos_b;
  std::vector<PatchRef> negative_refs;  // num_loc refs into O
};

namespace detail {

template <typename T>
PatchStack<T> gather(const Tensor<T>& img, const std::vector<PatchRef>& refs) {
  PatchStack<T> s;
  for (const auto& r : refs) s.push(read_patch(img, r), r);
  return s;
}

// Grid cells within one stride of the anchor (both axes), by candidate index.
inline std::vector<int> neighbour_indices(const std::vector<PatchRef>& grid, const PatchRef& anchor,
                                          int stride) {
  std::vector<int> out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(grid[i].top - anchor.top) <= stride && std::abs(grid[i].left - anchor.left) <= stride)
      out.push_back(int(i));
  return out;
}

inline std::vector<int> random_indices(int grid_size, int count, Rng& rng) {
  if (count > grid_size) throw Error(ErrorKind::parameter, "not enough candidates");
  std::vector<int> all(grid_size);
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(count);
  return all;
}

// Mode-dependent group selection around one anchor within a single layer.
template <typename T>
std::vector<PatchRef> select_group(const Tensor<T>& layer, const std::vector<PatchRef>& grid,
                                   const PatchStack<T>& grid_stack, const PatchRef& anchor, int count,
                                   SampleMode mode, int stride, Rng& rng) {
  if (count > int(grid.size())) throw Error(ErrorKind::parameter, "not enough candidates");
  switch (mode) {
    case SampleMode::nonlocal:
    case SampleMode::reverse_nonlocal: {
      const bool farthest = mode == SampleMode::reverse_nonlocal;
      return nonlocal_topk(read_patch(layer, anchor), anchor, grid_stack, count, farthest).matches;
    }
    case SampleMode::random: {
      std::vector<PatchRef> out;
      for (int i : random_indices(int(grid.size()), count, rng)) out.push_back(grid[i]);
      return out;
    }
    case SampleMode::neighbour: {
      const auto near = neighbour_indices(grid, anchor, stride);
      if (int(near.size()) < count)
        throw Error(ErrorKind::parameter, "not enough neighbour candidates");
      std::vector<PatchRef> out;
      for (int i = 0; i < count; ++i) out.push_back(grid[near[i]]);
      return out;
    }
  }
  throw Error(ErrorKind::parameter, "bad sample mode");
}

// Anchor cell drawn uniformly; neighbour mode restricts to cells whose
// one-stride neighbourhood is complete so the requested count stays reachable.
inline PatchRef pick_anchor(const std::vector<PatchRef>& grid, SampleMode mode, int stride,
                            int needed, Rng& rng) {
  if (mode == SampleMode::neighbour && needed <= 9) {
    std::vector<int> ok;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (int(neighbour_indices(grid, grid[i], stride).size()) >= needed) ok.push_back(int(i));
    if (!ok.empty()) return grid[ok[rng.uniform_int(int(ok.size()))]];
  }
  return grid[rng.uniform_int(int(grid.size()))];
}

}  // namespace detail

// Draws one anchor per layer plus the mode's positive/negative groups.
// Patches are compared in pixel space on the estimated layers.
template <typename T>
LayerSamples<T> sample_layer_patches(const Tensor<T>& b_hat, const Tensor<T>& r_hat,
                                     const SamplerConfig& cfg, Rng& rng) {
  validate(cfg);
  require_same_shape(b_hat, r_hat, "sample_layer_patches");
  const auto grid = patch_grid(b_hat.height(), b_hat.width(), cfg.patch_size, cfg.stride);
  if (int(grid.size()) < std::max(cfg.num_pos, cfg.num_neg))
    throw Error(ErrorKind::parameter, "candidate grid smaller than requested counts");

  const PatchStack<T> grid_b = detail::gather(b_hat, grid);
  const PatchStack<T> grid_r = detail::gather(r_hat, grid);

  LayerSamples<T> out;
  out.anchor_b = detail::pick_anchor(grid, cfg.mode, cfg.stride, cfg.num_pos, rng);
  out.anchor_r = detail::pick_anchor(grid, cfg.mode, cfg.stride, cfg.num_neg, rng);

  const auto pos_b_refs =
      detail::select_group(b_hat, grid, grid_b, out.anchor_b, cfg.num_pos, cfg.mode, cfg.stride, rng);
  const auto pos_r_refs =
      detail::select_group(r_hat, grid, grid_r, out.anchor_r, cfg.num_neg, cfg.mode, cfg.stride, rng);

  out.pos_b = detail::gather(b_hat, pos_b_refs);
  out.pos_r = detail::gather(r_hat, pos_r_refs);
  // Cross-layer negatives reuse each layer's sampled group: the clean anchor
  // contrasts against the rain cluster and vice versa.
  out.neg_r = detail::gather(r_hat, pos_r_refs);
  out.neg_b = detail::gather(b_hat, pos_b_refs);
  return out;
}

template <typename T>
LayerSamples<T> sample_layer_patches(const Tensor<T>& b_hat, const Tensor<T>& r_hat,
                                     const SamplerConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_layer_patches(b_hat, r_hat, cfg, rng);
}

// Same-location positive pairs between O and the estimated clean layer, with
// farthest-first (reverse non-local) negatives drawn from O. Negatives fall
// back to uniform random refs in random mode and to one-stride neighbours in
// neighbour mode.
template <typename T>
std::vector<LocationPair> sample_location_pairs(const Tensor<T>& observed, const Tensor<T>& b_hat,
                                                const SamplerConfig& cfg, Rng& rng) {
  validate(cfg);
  require_same_shape(observed, b_hat, "sample_location_pairs");
  const auto grid = patch_grid(observed.height(), observed.width(), cfg.patch_size, cfg.stride);
  if (int(grid.size()) < cfg.num_loc)
    throw Error(ErrorKind::parameter, "candidate grid smaller than num_loc");

  const PatchStack<T> grid_o = detail::gather(observed, grid);

  std::vector<int> anchor_cells;
  if (cfg.mode == SampleMode::neighbour) {
    // keep anchors whose one-stride neighbourhood can satisfy the count
    std::vector<int> eligible;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (int(detail::neighbour_indices(grid, grid[i], cfg.stride).size()) >= cfg.num_loc)
        eligible.push_back(int(i));
    if (int(eligible.size()) < cfg.num_loc)
      throw Error(ErrorKind::parameter, "not enough neighbour candidates");
    rng.shuffle(eligible);
    anchor_cells.assign(eligible.begin(), eligible.begin() + cfg.num_loc);
  } else {
    anchor_cells = detail::random_indices(int(grid.size()), cfg.num_loc, rng);
  }
  std::vector<LocationPair> pairs;
  pairs.reserve(anchor_cells.size());
  for (int cell : anchor_cells) {
    LocationPair p;
    p.pos_o = grid[cell];
    p.pos_b = grid[cell];
    switch (cfg.mode) {
      case SampleMode::random:
        for (int i : detail::random_indices(int(grid.size()), cfg.num_loc, rng))
          p.negative_refs.push_back(grid[i]);
        break;
      case SampleMode::neighbour:
        p.negative_refs = detail::select_group(observed, grid, grid_o, p.pos_o, cfg.num_loc,
                                               SampleMode::neighbour, cfg.stride, rng);
        break;
      default:
        p.negative_refs =
            nonlocal_topk(grid_o.patches[cell], p.pos_o, grid_o, cfg.num_loc, /*farthest=*/true).matches;
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

template <typename T>
std::vector<LocationPair> sample_location_pairs(const Tensor<T>& observed, const Tensor<T>& b_hat,
                                                const SamplerConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_location_pairs(observed, b_hat, cfg, rng);
}

}  // namespace anlcl
