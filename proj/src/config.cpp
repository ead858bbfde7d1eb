#include "anlcl/config.hpp"

#include <fstream>
#include <set>

namespace anlcl {

using nlohmann::ordered_json;

namespace {

// Pulls typed values out of one JSON object level; the allowed-key list is
// declared up front and anything else is a configuration error.
class StrictObj {
 public:
  StrictObj(const ordered_json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorKind::config, path_ + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j_.items())
      if (!ok.count(key)) throw Error(ErrorKind::config, "unknown config field " + path_ + "." + key);
  }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::config, "bad value for " + path_ + "." + key);
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const ordered_json& sub(const char* key) const { return j_.at(key); }

 private:
  const ordered_json& j_;
  std::string path_;
};

}  // namespace

RainParams rain_params_from_json_strict(const ordered_json& j) {
  RainParams p;
  StrictObj o(j, "rain",
              {"streak_count", "length_min", "length_max", "width_min", "width_max", "angle_min_deg",
               "angle_max_deg", "intensity_min", "intensity_max", "veiling_strength"});
  o.get("streak_count", p.streak_count);
  o.get("length_min", p.length_min);
  o.get("length_max", p.length_max);
  o.get("width_min", p.width_min);
  o.get("width_max", p.width_max);
  o.get("angle_min_deg", p.angle_min_deg);
  o.get("angle_max_deg", p.angle_max_deg);
  o.get("intensity_min", p.intensity_min);
  o.get("intensity_max", p.intensity_max);
  o.get("veiling_strength", p.veiling_strength);
  return p;
}

ordered_json rain_params_to_json(const RainParams& p) {
  return ordered_json{{"streak_count", p.streak_count},
                      {"length_min", p.length_min},
                      {"length_max", p.length_max},
                      {"width_min", p.width_min},
                      {"width_max", p.width_max},
                      {"angle_min_deg", p.angle_min_deg},
                      {"angle_max_deg", p.angle_max_deg},
                      {"intensity_min", p.intensity_min},
                      {"intensity_max", p.intensity_max},
                      {"veiling_strength", p.veiling_strength}};
}

void validate(const TrainConfig& cfg) {
  if (cfg.lr <= 0) throw Error(ErrorKind::config, "train.lr must be > 0");
  if (cfg.batch_size < 1) throw Error(ErrorKind::config, "train.batch_size must be >= 1");
  if (cfg.pretrain_iters < 0 || cfg.finetune_iters < 0)
    throw Error(ErrorKind::config, "iteration counts must be >= 0");
  if (cfg.crop < 70) throw Error(ErrorKind::config, "train.crop must be >= 70 (discriminator field)");
  if (cfg.crop % 4 != 0) throw Error(ErrorKind::config, "train.crop must be divisible by 4");
  if (cfg.downsample_factor < 1) throw Error(ErrorKind::config, "data.downsample_factor must be >= 1");
  if (cfg.probe_images < 1) throw Error(ErrorKind::config, "train.probe_images must be >= 1");
  validate(cfg.weights);
  validate(cfg.sampler);
  validate(cfg.contrastive);
  validate(cfg.momentum);
  validate(cfg.network);
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig cfg;
  StrictObj root(j, "config",
                 {"data", "train", "weights", "sampler", "contrastive", "momentum", "network",
                  "encoder"});

  if (root.has("data")) {
    StrictObj o(root.sub("data"), "data", {"train_dir", "eval_dir", "downsample_factor"});
    o.get("train_dir", cfg.train_dir);
    o.get("eval_dir", cfg.eval_dir);
    o.get("downsample_factor", cfg.downsample_factor);
  }
  if (root.has("train")) {
    StrictObj o(root.sub("train"), "train",
                {"lr", "batch_size", "crop", "pretrain_iters", "finetune_iters", "seed",
                 "probe_images"});
    o.get("lr", cfg.lr);
    o.get("batch_size", cfg.batch_size);
    o.get("crop", cfg.crop);
    o.get("pretrain_iters", cfg.pretrain_iters);
    o.get("finetune_iters", cfg.finetune_iters);
    o.get("seed", cfg.seed);
    o.get("probe_images", cfg.probe_images);
  }
  if (root.has("weights")) {
    StrictObj o(root.sub("weights"), "weights",
                {"w_mse", "w_sparse", "w_adv", "w_loc", "w_layer", "w_asy"});
    o.get("w_mse", cfg.weights.w_mse);
    o.get("w_sparse", cfg.weights.w_sparse);
    o.get("w_adv", cfg.weights.w_adv);
    o.get("w_loc", cfg.weights.w_loc);
    o.get("w_layer", cfg.weights.w_layer);
    o.get("w_asy", cfg.weights.w_asy);
  }
  if (root.has("sampler")) {
    StrictObj o(root.sub("sampler"), "sampler",
                {"patch_size", "stride", "num_pos", "num_neg", "num_loc", "mode"});
    o.get("patch_size", cfg.sampler.patch_size);
    o.get("stride", cfg.sampler.stride);
    o.get("num_pos", cfg.sampler.num_pos);
    o.get("num_neg", cfg.sampler.num_neg);
    o.get("num_loc", cfg.sampler.num_loc);
    if (o.has("mode")) cfg.sampler.mode = sample_mode_from_string(o.sub("mode").get<std::string>());
  }
  if (root.has("contrastive")) {
    StrictObj o(root.sub("contrastive"), "contrastive",
                {"temperature", "margin", "use_log_form", "normalize_pairs"});
    o.get("temperature", cfg.contrastive.temperature);
    o.get("margin", cfg.contrastive.margin);
    o.get("use_log_form", cfg.contrastive.use_log_form);
    o.get("normalize_pairs", cfg.contrastive.normalize_pairs);
  }
  if (root.has("momentum")) {
    StrictObj o(root.sub("momentum"), "momentum", {"m"});
    o.get("m", cfg.momentum.m);
  }
  if (root.has("network")) {
    StrictObj o(root.sub("network"), "network",
                {"image_channels", "gen_base_channels", "gen_res_blocks", "disc_base_channels",
                 "proj_hidden", "embed_dim", "share_encoder"});
    o.get("image_channels", cfg.network.image_channels);
    o.get("gen_base_channels", cfg.network.gen_base_channels);
    o.get("gen_res_blocks", cfg.network.gen_res_blocks);
    o.get("disc_base_channels", cfg.network.disc_base_channels);
    o.get("proj_hidden", cfg.network.proj_hidden);
    o.get("embed_dim", cfg.network.embed_dim);
    o.get("share_encoder", cfg.network.share_encoder);
  }
  if (root.has("encoder"))
    cfg.encoder = encoder_choice_from_string(root.sub("encoder").get<std::string>());

  validate(cfg);
  return cfg;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
  return ordered_json{
      {"data",
       {{"train_dir", cfg.train_dir},
        {"eval_dir", cfg.eval_dir},
        {"downsample_factor", cfg.downsample_factor}}},
      {"train",
       {{"lr", cfg.lr},
        {"batch_size", cfg.batch_size},
        {"crop", cfg.crop},
        {"pretrain_iters", cfg.pretrain_iters},
        {"finetune_iters", cfg.finetune_iters},
        {"seed", cfg.seed},
        {"probe_images", cfg.probe_images}}},
      {"weights",
       {{"w_mse", cfg.weights.w_mse},
        {"w_sparse", cfg.weights.w_sparse},
        {"w_adv", cfg.weights.w_adv},
        {"w_loc", cfg.weights.w_loc},
        {"w_layer", cfg.weights.w_layer},
        {"w_asy", cfg.weights.w_asy}}},
      {"sampler",
       {{"patch_size", cfg.sampler.patch_size},
        {"stride", cfg.sampler.stride},
        {"num_pos", cfg.sampler.num_pos},
        {"num_neg", cfg.sampler.num_neg},
        {"num_loc", cfg.sampler.num_loc},
        {"mode", to_string(cfg.sampler.mode)}}},
      {"contrastive",
       {{"temperature", cfg.contrastive.temperature},
        {"margin", cfg.contrastive.margin},
        {"use_log_form", cfg.contrastive.use_log_form},
        {"normalize_pairs", cfg.contrastive.normalize_pairs}}},
      {"momentum", {{"m", cfg.momentum.m}}},
      {"network",
       {{"image_channels", cfg.network.image_channels},
        {"gen_base_channels", cfg.network.gen_base_channels},
        {"gen_res_blocks", cfg.network.gen_res_blocks},
        {"disc_base_channels", cfg.network.disc_base_channels},
        {"proj_hidden", cfg.network.proj_hidden},
        {"embed_dim", cfg.network.embed_dim},
        {"share_encoder", cfg.network.share_encoder}}},
      {"encoder", to_string(cfg.encoder)}};
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, "config is not valid JSON: " + std::string(e.what()));
  }
  return train_config_from_json(j);
}

void apply_override(ordered_json& config, const std::string& dotted_key, const ordered_json& value) {
  ordered_json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot - start);
    if (part.empty()) throw Error(ErrorKind::config, "bad override key: " + dotted_key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace anlcl
