#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "anlcl/nn/layers.hpp"

namespace anlcl {

// Single-archive parameter snapshot: magic line, JSON header (iteration,
// stage, config snapshot, tensor index), then raw little-endian float32
// blocks in index order. Byte-stable across save/load/save.
inline constexpr const char* kCheckpointMagic = "ANLCL-CKPT-1\n";

struct CheckpointData {
  long iteration = 0;
  std::string stage = "init";  // init | pretrain | finetune
  std::string config_json;     // opaque snapshot of the training config
  std::vector<std::pair<std::string, MatX<float>>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Registry bridge: snapshot copies values out; restore matches strictly by
// name, count and shape.
CheckpointData snapshot_params(const nn::ParamSet<float>& params, long iteration,
                               const std::string& stage, const std::string& config_json);
void restore_params(const CheckpointData& data, const nn::ParamSet<float>& params);

}  // namespace anlcl
