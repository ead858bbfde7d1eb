#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "anlcl/checkpoint.hpp"
#include "anlcl/config.hpp"
#include "anlcl/dataset.hpp"
#include "anlcl/nn/adam.hpp"

namespace anlcl {

struct LossLogRow {
  long iter = 0;
  double l_mse = 0, l_sparse = 0, l_adv = 0, l_loc = 0, l_layer = 0, l_asy = 0;
  int eta = 0;
};

struct DistanceRecord {
  long epoch = 0;
  double intra_b = 0, intra_r = 0, inter = 0;
};

std::string loss_log_csv(const std::vector<LossLogRow>& rows);
std::string distance_curve_csv(const std::vector<DistanceRecord>& rows);

// All parameter-carrying networks, online and momentum-key copies.
struct Models {
  NetworkSpec spec;
  EncoderChoice encoder = EncoderChoice::discriminator;

  Generator<float> g_b, g_r;
  Discriminator<float> disc;
  std::unique_ptr<Discriminator<float>> disc_cl;  // detached contrastive encoder (share_encoder=false)
  ProjectionHead<float> proj_layer, proj_loc;

  Generator<float> g_b_key, g_r_key;
  Discriminator<float> disc_key;
  ProjectionHead<float> proj_layer_key, proj_loc_key;

  static Models make(const NetworkSpec& spec, EncoderChoice encoder, std::uint64_t seed);

  nn::ParamSet<float> gen_step_params();   // updated by the generator step
  nn::ParamSet<float> disc_step_params();  // updated by the discriminator step
  nn::ParamSet<float> key_source_params();
  nn::ParamSet<float> key_params();
  nn::ParamSet<float> all_params();  // checkpoint registry, fixed order
  void sync_keys() { copy_params(key_source_params(), key_params()); }

  // The online encoder used for layer-contrastive queries of one layer.
  const Discriminator<float>& layer_encoder_disc() const {
    return disc_cl ? *disc_cl : disc;
  }
};

// Two-stage optimization driver. Deterministic given the config (seed included).
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  Models& models() { return models_; }
  long iteration() const { return iter_; }

  void run_pretrain();
  void run_finetune();

  const std::vector<LossLogRow>& loss_log() const { return log_; }
  const std::vector<DistanceRecord>& distance_curve() const { return curve_; }

  DistanceRecord measure_distances(long epoch_label);

  CheckpointData make_checkpoint(const std::string& stage);
  void restore(const CheckpointData& data);

 private:
  LossLogRow train_step(long iter, bool finetune_stage);

  TrainConfig cfg_;
  Models models_;
  std::optional<nn::Adam<float>> gen_opt_, disc_opt_;
  std::optional<PairedDatasetIter> paired_;
  std::optional<DatasetIter> rainy_, clean_;
  std::vector<Image> probes_;
  std::vector<LossLogRow> log_;
  std::vector<DistanceRecord> curve_;
  long iter_ = 0;
  Rng sampler_base_;
  long steps_per_epoch_ = 1;
};

// Round-trips the full model registry plus config through CheckpointData.
CheckpointData models_checkpoint(Models& models, long iteration, const std::string& stage,
                                 const TrainConfig& cfg);

// Rebuilds models from the config stored inside a checkpoint.
std::pair<TrainConfig, Models> models_from_checkpoint(const CheckpointData& data);

struct DerainResult {
  Image b;      // estimated clean layer
  Image r;      // estimated rain layer
  Image recon;  // clip(b + r)
};

// Reflect-pads to a multiple of 4, decomposes, and un-pads back to the input size.
DerainResult derain_image(Models& models, const Image& observed);

struct EvalReport {
  double mean_psnr_derained = 0;
  double mean_psnr_rainy = 0;
  double mean_ssim_derained = 0;
  double mean_abs_residual = 0;  // mean |O - (B+R)|
  int count = 0;
};

// Runs the decomposition over a synthetic dataset root and scores against its
// clean layers.
EvalReport evaluate_on_dataset(Models& models, const std::filesystem::path& root,
                               int downsample_factor);

}  // namespace anlcl
