#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "anlcl/image_ops.hpp"
#include "anlcl/rain.hpp"
#include "anlcl/rng.hpp"

namespace anlcl {

struct SynthDatasetSpec {
  int count = 32;
  int height = 128;
  int width = 128;
  int channels = 3;
  RainParams rain;
  std::uint64_t seed = 1;
};

// Writes clean/NNNN.png, rainy/NNNN.png, rain/NNNN.png plus manifest.json.
void write_synth_dataset(const std::filesystem::path& dir, const SynthDatasetSpec& spec);

SynthDatasetSpec read_synth_manifest(const std::filesystem::path& dir);

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Cycling shuffled stream of downsample-then-crop views over one directory.
// Deterministic per seed; each instance owns its generator.
class DatasetIter {
 public:
  DatasetIter(const std::filesystem::path& dir, int crop, int downsample_factor, std::uint64_t seed);

  Image next();
  std::size_t epoch_size() const { return images_.size(); }

 private:
  void reshuffle();

  std::vector<Image> images_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  int crop_;
  Rng rng_;
};

struct PairedSample {
  Image rainy;
  Image clean;
  Image rain;
};

// Aligned crops over a synthetic dataset root (rainy/ clean/ rain/ with
// matching filenames). Used by supervised pretraining.
class PairedDatasetIter {
 public:
  PairedDatasetIter(const std::filesystem::path& root, int crop, int downsample_factor,
                    std::uint64_t seed);

  PairedSample next();
  std::size_t epoch_size() const { return triples_.size(); }

 private:
  void reshuffle();

  std::vector<PairedSample> triples_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  int crop_;
  Rng rng_;
};

// Optional cache root for intermediate artifacts (ANLCL_CACHE).
std::optional<std::filesystem::path> cache_root();

}  // namespace anlcl
