#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "anlcl/losses.hpp"
#include "anlcl/networks.hpp"
#include "anlcl/rain.hpp"
#include "anlcl/sampler.hpp"

namespace anlcl {

struct TrainConfig {
  std::string train_dir;           // synthetic dataset root (clean/ rainy/ rain/)
  std::string eval_dir;            // optional held-out root; empty = none
  int downsample_factor = 1;

  double lr = 1e-4;
  int batch_size = 4;
  int crop = 256;
  int pretrain_iters = 0;
  int finetune_iters = 0;
  std::uint64_t seed = 1;
  int probe_images = 4;            // distance-curve probes

  LossWeights weights;
  SamplerConfig sampler;
  ContrastiveConfig contrastive;
  MomentumConfig momentum;
  NetworkSpec network;
  EncoderChoice encoder = EncoderChoice::discriminator;
};

void validate(const TrainConfig& cfg);

// Strict parsing: unknown keys are configuration errors naming the field.
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

// Dotted-path override ("train.lr": 0.001) used by sweep runs.
void apply_override(nlohmann::ordered_json& config, const std::string& dotted_key,
                    const nlohmann::ordered_json& value);

RainParams rain_params_from_json_strict(const nlohmann::ordered_json& j);
nlohmann::ordered_json rain_params_to_json(const RainParams& p);

}  // namespace anlcl
