// anlcl: batch tool for synthetic data generation, two-stage training,
// decomposition inference, metric evaluation, block-matching visualization
// and patch-statistics analysis.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "anlcl/analysis.hpp"
#include "anlcl/config.hpp"
#include "anlcl/dataset.hpp"
#include "anlcl/fixtures.hpp"
#include "anlcl/image_io.hpp"
#include "anlcl/plot.hpp"
#include "anlcl/sampler.hpp"
#include "anlcl/trainer.hpp"

#ifndef ANLCL_BUILD_ID
#define ANLCL_BUILD_ID "unknown"
#endif

namespace {

using anlcl::Error;
using anlcl::ErrorKind;
using anlcl::Image;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

// Collects run metadata and writes run_manifest.json at the end of a
// successful command.
class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)),
        t0_(std::chrono::steady_clock::now()) {}

  void set_config(ordered_json cfg) { config_ = std::move(cfg); }
  void set_seed(std::uint64_t s) { seed_ = s; }
  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }

  void write() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    ordered_json j{{"command", command_}, {"config", config_},
                   {"seed", seed_},       {"build", ANLCL_BUILD_ID},
                   {"outputs", outputs_}, {"duration_sec", secs}};
    write_text_atomic(out_dir_ / "run_manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_dir_;
  ordered_json config_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point t0_;
};

ordered_json load_json_file(const fs::path& path, ErrorKind bad_parse_kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    ordered_json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(bad_parse_kind, path.string() + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out, int count, int height, int width, int channels,
              std::uint64_t seed, const std::string& rain_params_path) {
  anlcl::SynthDatasetSpec spec;
  spec.count = count;
  spec.height = height;
  spec.width = width;
  spec.channels = channels;
  spec.seed = seed;
  if (!rain_params_path.empty())
    spec.rain = anlcl::rain_params_from_json_strict(load_json_file(rain_params_path, ErrorKind::config));

  Manifest man("synth", out);
  man.set_seed(seed);
  man.set_config(anlcl::rain_params_to_json(spec.rain));
  anlcl::write_synth_dataset(out, spec);
  man.add_output(out / "manifest.json");
  man.write();
  std::cout << "wrote " << count << " triplets under " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainSummary {
  anlcl::LossLogRow last{};
  bool has_eval = false;
  anlcl::EvalReport eval{};
};

TrainSummary train_one(const ordered_json& cfg_json, const fs::path& out, Manifest* man) {
  const anlcl::TrainConfig cfg = anlcl::train_config_from_json(cfg_json);
  fs::create_directories(out);

  anlcl::Trainer trainer(cfg);
  trainer.run_pretrain();
  anlcl::save_checkpoint(out / "ckpt_pretrain.bin", trainer.make_checkpoint("pretrain"));
  trainer.run_finetune();
  anlcl::save_checkpoint(out / "ckpt_final.bin", trainer.make_checkpoint("finetune"));

  write_text_atomic(out / "loss_log.csv", anlcl::loss_log_csv(trainer.loss_log()));
  write_text_atomic(out / "distance_curve.csv", anlcl::distance_curve_csv(trainer.distance_curve()));

  TrainSummary s;
  if (!trainer.loss_log().empty()) s.last = trainer.loss_log().back();
  if (!cfg.eval_dir.empty()) {
    s.eval = anlcl::evaluate_on_dataset(trainer.models(), cfg.eval_dir, cfg.downsample_factor);
    s.has_eval = true;
    ordered_json ej{{"count", s.eval.count},
                    {"psnr_derained", s.eval.mean_psnr_derained},
                    {"psnr_rainy", s.eval.mean_psnr_rainy},
                    {"ssim_derained", s.eval.mean_ssim_derained},
                    {"mean_abs_residual", s.eval.mean_abs_residual}};
    write_text_atomic(out / "eval.json", ej.dump(2) + "\n");
  }
  if (man) {
    for (const char* f : {"ckpt_pretrain.bin", "ckpt_final.bin", "loss_log.csv",
                          "distance_curve.csv"})
      man->add_output(out / f);
    if (s.has_eval) man->add_output(out / "eval.json");
  }
  return s;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int cmd_train(const fs::path& config_path, const fs::path& out, std::int64_t seed_override,
              const std::string& sweep_path, const std::string& device) {
  if (device != "cpu")
    throw Error(ErrorKind::config, "only --device cpu is supported in this build");
  ordered_json base = load_json_file(config_path, ErrorKind::config);
  if (seed_override >= 0) anlcl::apply_override(base, "train.seed", std::uint64_t(seed_override));

  Manifest man("train", out);
  man.set_config(base);
  man.set_seed(anlcl::train_config_from_json(base).seed);

  if (sweep_path.empty()) {
    const TrainSummary s = train_one(base, out, &man);
    man.write();
    std::cout << "training done; final iter " << s.last.iter;
    if (s.has_eval)
      std::cout << "; eval PSNR " << s.eval.mean_psnr_derained << " (rainy "
                << s.eval.mean_psnr_rainy << ")";
    std::cout << "\n";
    return 0;
  }

  // Config sweep: one full run per override set, one combined CSV.
  const ordered_json sweep = load_json_file(sweep_path, ErrorKind::config);
  if (!sweep.contains("runs") || !sweep.at("runs").is_array())
    throw Error(ErrorKind::config, "sweep file needs a \"runs\" array");
  std::string csv =
      "label,overrides,psnr_derained,psnr_rainy,ssim_derained,mean_abs_residual,l_mse,l_sparse,"
      "l_adv,l_loc,l_layer,l_asy\n";
  int run_id = 0;
  for (const auto& run : sweep.at("runs")) {
    const std::string label =
        run.value("label", "run" + std::to_string(run_id));
    ordered_json cfg = base;
    if (run.contains("overrides"))
      for (const auto& [key, value] : run.at("overrides").items())
        anlcl::apply_override(cfg, key, value);
    const TrainSummary s = train_one(cfg, out / label, nullptr);
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  s.has_eval ? s.eval.mean_psnr_derained : 0.0,
                  s.has_eval ? s.eval.mean_psnr_rainy : 0.0,
                  s.has_eval ? s.eval.mean_ssim_derained : 0.0,
                  s.has_eval ? s.eval.mean_abs_residual : 0.0, s.last.l_mse, s.last.l_sparse,
                  s.last.l_adv, s.last.l_loc, s.last.l_layer, s.last.l_asy);
    csv += csv_escape(label) + "," +
           csv_escape(run.contains("overrides") ? run.at("overrides").dump() : "{}") + "," + buf;
    ++run_id;
  }
  write_text_atomic(out / "sweep.csv", csv);
  man.add_output(out / "sweep.csv");
  man.write();
  std::cout << "sweep done: " << run_id << " runs\n";
  return 0;
}

// ---------------------------------------------------------------------------
// derain
// ---------------------------------------------------------------------------

int cmd_derain(const fs::path& ckpt_path, const fs::path& in_path, const fs::path& out) {
  auto [cfg, models] = anlcl::models_from_checkpoint(anlcl::load_checkpoint(ckpt_path));
  std::vector<fs::path> inputs;
  if (fs::is_directory(in_path))
    inputs = anlcl::list_images(in_path);
  else
    inputs.push_back(in_path);
  if (inputs.empty()) throw Error(ErrorKind::config, "no input images at " + in_path.string());

  Manifest man("derain", out);
  man.set_seed(cfg.seed);
  man.set_config(anlcl::train_config_to_json(cfg));
  fs::create_directories(out);
  for (const auto& p : inputs) {
    const Image o = anlcl::load_image(p);
    const anlcl::DerainResult d = derain_image(models, o);
    const std::string stem = p.stem().string();
    anlcl::save_image(out / (stem + "_B.png"), d.b);
    anlcl::save_image(out / (stem + "_R.png"), d.r);
    anlcl::save_image(out / (stem + "_recon.png"), d.recon);
    man.add_output(out / (stem + "_B.png"));
    man.add_output(out / (stem + "_R.png"));
    man.add_output(out / (stem + "_recon.png"));
  }
  man.write();
  std::cout << "derained " << inputs.size() << " image(s) into " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, const fs::path& out) {
  const auto preds = anlcl::list_images(pred_dir);
  const auto gts = anlcl::list_images(gt_dir);
  std::vector<std::pair<fs::path, fs::path>> matched;
  std::vector<std::string> unmatched_pred, unmatched_gt;
  for (const auto& p : preds) {
    const fs::path g = gt_dir / p.filename();
    if (fs::exists(g))
      matched.emplace_back(p, g);
    else
      unmatched_pred.push_back(p.filename().string());
  }
  for (const auto& g : gts)
    if (!fs::exists(pred_dir / g.filename())) unmatched_gt.push_back(g.filename().string());

  Manifest man("eval", out);
  fs::create_directories(out);
  if (matched.empty()) {
    ordered_json err{{"error", "no matching filenames"},
                     {"unmatched_pred", unmatched_pred},
                     {"unmatched_gt", unmatched_gt}};
    write_text_atomic(out / "eval_errors.json", err.dump(2) + "\n");
    throw Error(ErrorKind::config, "no matching filenames between " + pred_dir.string() + " and " +
                                       gt_dir.string());
  }

  std::string csv = "name,psnr,ssim\n";
  ordered_json per_image = ordered_json::array();
  double mean_psnr = 0, mean_ssim = 0;
  for (const auto& [p, g] : matched) {
    const Image a = anlcl::load_image(p);
    const Image b = anlcl::load_image(g);
    const double ps = anlcl::psnr(a, b);
    const double ss = anlcl::ssim(a, b);
    mean_psnr += ps;
    mean_ssim += ss;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", p.filename().string().c_str(), ps, ss);
    csv += buf;
    per_image.push_back(ordered_json{{"name", p.filename().string()}, {"psnr", ps}, {"ssim", ss}});
  }
  mean_psnr /= double(matched.size());
  mean_ssim /= double(matched.size());
  ordered_json report{{"count", matched.size()},
                      {"mean_psnr", mean_psnr},
                      {"mean_ssim", mean_ssim},
                      {"per_image", per_image},
                      {"unmatched_pred", unmatched_pred},
                      {"unmatched_gt", unmatched_gt}};
  write_text_atomic(out / "metrics.json", report.dump(2) + "\n");
  write_text_atomic(out / "metrics.csv", csv);
  man.add_output(out / "metrics.json");
  man.add_output(out / "metrics.csv");
  man.write();
  std::cout << "mean PSNR " << mean_psnr << " dB, mean SSIM " << mean_ssim << " over "
            << matched.size() << " pairs\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

Image upscale_nearest(const Image& img, int s) {
  Image out(img.channels(), img.height() * s, img.width() * s);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) out(c, y, x) = img(c, y / s, x / s);
  return out;
}

int cmd_sample(const fs::path& image_path, const std::string& mode_str, int k, const fs::path& out,
               int patch, int stride, int query_top, int query_left, std::uint64_t seed) {
  const Image img = anlcl::load_image(image_path);
  const anlcl::SampleMode mode = anlcl::sample_mode_from_string(mode_str);
  const auto stack = anlcl::extract_patches(img, patch, stride);
  if (k < 1 || std::size_t(k) > stack.size())
    throw Error(ErrorKind::parameter, "k out of range for the candidate grid");

  // Query defaults to the grid cell closest to the image center.
  int qi = 0;
  if (query_top >= 0 && query_left >= 0) {
    qi = -1;
    for (std::size_t i = 0; i < stack.size(); ++i)
      if (stack.refs[i].top == query_top && stack.refs[i].left == query_left) qi = int(i);
    if (qi < 0) throw Error(ErrorKind::parameter, "query position is not on the sampling grid");
  } else {
    double best = 1e300;
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const double dy = stack.refs[i].top + patch / 2.0 - img.height() / 2.0;
      const double dx = stack.refs[i].left + patch / 2.0 - img.width() / 2.0;
      if (dy * dy + dx * dx < best) {
        best = dy * dy + dx * dx;
        qi = int(i);
      }
    }
  }

  std::vector<anlcl::PatchRef> match_refs;
  std::vector<double> distances;
  if (mode == anlcl::SampleMode::nonlocal || mode == anlcl::SampleMode::reverse_nonlocal) {
    const auto set = anlcl::nonlocal_topk(stack.patches[qi], stack.refs[qi], stack, k,
                                          mode == anlcl::SampleMode::reverse_nonlocal);
    match_refs = set.matches;
    distances = set.distances;
  } else {
    anlcl::Rng rng(seed);
    anlcl::SamplerConfig scfg;
    scfg.patch_size = patch;
    scfg.stride = stride;
    std::vector<int> picks;
    if (mode == anlcl::SampleMode::random) {
      std::vector<int> all(stack.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = int(i);
      rng.shuffle(all);
      picks.assign(all.begin(), all.begin() + k);
    } else {
      for (std::size_t i = 0; i < stack.size(); ++i)
        if (std::abs(stack.refs[i].top - stack.refs[qi].top) <= stride &&
            std::abs(stack.refs[i].left - stack.refs[qi].left) <= stride)
          picks.push_back(int(i));
      if (int(picks.size()) < k) throw Error(ErrorKind::parameter, "not enough neighbour candidates");
      picks.resize(k);
    }
    for (int i : picks) {
      match_refs.push_back(stack.refs[i]);
      distances.push_back(anlcl::patch_distance(stack.patches[qi], stack.patches[i]));
    }
  }

  // Contact sheet: query followed by the matches, 4x nearest upscale.
  const int scale = 4, sep = 2;
  const int cell = patch * scale;
  Image sheet = Image::constant(img.channels(), cell, (k + 1) * cell + k * sep, 1.0f);
  auto blit = [&](const Image& p, int x0) {
    const Image up = upscale_nearest(p, scale);
    for (int c = 0; c < sheet.channels(); ++c)
      sheet.channel(c).block(0, x0, cell, cell) = up.channel(c);
  };
  blit(stack.patches[qi], 0);
  for (int i = 0; i < k; ++i) blit(anlcl::read_patch(img, match_refs[i]), (i + 1) * (cell + sep));

  Manifest man("sample", out);
  man.set_seed(seed);
  fs::create_directories(out);
  anlcl::save_image(out / "contact_sheet.png", sheet);
  ordered_json matches = ordered_json::array();
  for (int i = 0; i < k; ++i)
    matches.push_back(ordered_json{{"top", match_refs[i].top},
                                   {"left", match_refs[i].left},
                                   {"size", match_refs[i].size},
                                   {"distance", distances[i]}});
  ordered_json j{{"image", image_path.string()},
                 {"mode", mode_str},
                 {"query", {{"top", stack.refs[qi].top}, {"left", stack.refs[qi].left}, {"size", patch}}},
                 {"matches", matches}};
  write_text_atomic(out / "sample.json", j.dump(2) + "\n");
  man.add_output(out / "contact_sheet.png");
  man.add_output(out / "sample.json");
  man.write();
  std::cout << "wrote contact sheet with top-" << k << " " << mode_str << " matches\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct CategoryStat {
  std::string name;
  const anlcl::PatchStack<float>* stack;
};

void classify_dataset_patches(const fs::path& data_root, int patch, int per_cat,
                              anlcl::AsymmetryFixtures& fx) {
  // Replace the generated fixtures with patches harvested from a dataset:
  // clean patches split by gradient statistics, rain patches by coverage.
  fx = anlcl::AsymmetryFixtures{};
  auto grad_stats = [](const anlcl::Tensor<float>& p, float& var, float& edge_frac) {
    anlcl::Tensor<float> gray(1, p.height(), p.width());
    for (int c = 0; c < p.channels(); ++c) gray.flat() += p.channel(c).reshaped().array();
    gray.flat() /= float(p.channels());
    var = float((gray.flat() - gray.flat().mean()).square().mean());
    int strong = 0;
    for (int y = 0; y + 1 < p.height(); ++y)
      for (int x = 0; x + 1 < p.width(); ++x) {
        const float g =
            std::abs(gray(0, y + 1, x) - gray(0, y, x)) + std::abs(gray(0, y, x + 1) - gray(0, y, x));
        if (g > 0.12f) ++strong;
      }
    edge_frac = float(strong) / float((p.height() - 1) * (p.width() - 1));
  };

  for (const auto& f : anlcl::list_images(data_root / "clean")) {
    const Image img = anlcl::load_image(f);
    for (const auto& ref : anlcl::patch_grid(img.height(), img.width(), patch, patch)) {
      anlcl::Tensor<float> p = anlcl::read_patch(img, ref);
      float var = 0, edge_frac = 0;
      grad_stats(p, var, edge_frac);
      if (var < 0.0015f && int(fx.smooth.size()) < per_cat)
        fx.smooth.push(std::move(p), ref);
      else if (edge_frac >= 0.18f && int(fx.texture.size()) < per_cat)
        fx.texture.push(std::move(p), ref);
      else if (edge_frac > 0.01f && edge_frac < 0.18f && int(fx.edge.size()) < per_cat)
        fx.edge.push(std::move(p), ref);
    }
  }
  for (const auto& f : anlcl::list_images(data_root / "rain")) {
    const Image img = anlcl::load_image(f);
    for (const auto& ref : anlcl::patch_grid(img.height(), img.width(), patch, patch)) {
      anlcl::Tensor<float> p = anlcl::read_patch(img, ref);
      const float lo = p.flat().minCoeff(), hi = p.flat().maxCoeff();
      if (hi - lo < 0.05f && int(fx.veiling.size()) < per_cat)
        fx.veiling.push(std::move(p), ref);
      else if (hi - lo > 0.2f && int(fx.streak.size()) < per_cat)
        fx.streak.push(std::move(p), ref);
    }
  }
}

int cmd_analyze(const std::string& data_root, const fs::path& out, int patch, int per_cat,
                std::uint64_t seed, bool random_projection) {
  anlcl::AsymmetryFixtures fx = anlcl::make_asymmetry_fixtures(patch, per_cat, seed);
  if (!data_root.empty()) classify_dataset_patches(data_root, patch, per_cat, fx);

  std::vector<CategoryStat> cats = {{"smooth", &fx.smooth},
                                    {"texture", &fx.texture},
                                    {"edge", &fx.edge},
                                    {"streak", &fx.streak},
                                    {"veiling", &fx.veiling}};

  Manifest man("analyze", out);
  man.set_seed(seed);
  fs::create_directories(out);

  ordered_json report;
  std::vector<std::string> bar_labels;
  std::vector<double> bar_values;
  std::vector<anlcl::Series> spectra;
  std::vector<anlcl::ScatterGroup> scatter;

  for (const auto& cat : cats) {
    if (cat.stack->size() < 2) continue;
    const double me = anlcl::mean_patch_entropy(*cat.stack);
    const auto spec = anlcl::singular_spectrum(*cat.stack);
    ordered_json cj{{"count", cat.stack->size()},
                    {"mean_entropy_bits", me},
                    {"rank_at_95", spec.rank_at_energy(0.95)},
                    {"singular_values", spec.singular_values}};
    report[cat.name] = cj;
    bar_labels.push_back(cat.name);
    bar_values.push_back(me);

    anlcl::Series s;
    s.label = cat.name;
    for (std::size_t i = 0; i < spec.energy_fraction.size(); ++i) {
      s.x.push_back(double(i + 1));
      s.y.push_back(spec.energy_fraction[i]);
    }
    spectra.push_back(std::move(s));
  }

  // Two-dimensional view of the raw patch vectors, one color per category.
  {
    std::vector<std::pair<std::string, const anlcl::PatchStack<float>*>> groups;
    Eigen::Index rows = 0, dim = -1;
    for (const auto& cat : cats) {
      if (cat.stack->size() < 2) continue;
      const Eigen::Index d = cat.stack->patches[0].size();
      if (dim < 0) dim = d;
      if (d != dim) continue;  // mixed channel counts cannot share a projection
      groups.emplace_back(cat.name, cat.stack);
      rows += Eigen::Index(cat.stack->size());
    }
    if (rows >= 3) {
      anlcl::MatX<double> all(rows, dim);
      Eigen::Index r = 0;
      for (const auto& [name, stack] : groups)
        for (const auto& p : stack->patches)
          all.row(r++) = p.flat().cast<double>().matrix().transpose();
      const Eigen::MatrixXd coords = random_projection ? anlcl::embed_2d_random(all, seed)
                                                       : anlcl::embed_2d(all);
      r = 0;
      for (const auto& [name, stack] : groups) {
        anlcl::ScatterGroup g;
        g.label = name;
        for (std::size_t i = 0; i < stack->size(); ++i, ++r) {
          g.x.push_back(coords(r, 0));
          g.y.push_back(coords(r, 1));
        }
        scatter.push_back(std::move(g));
      }
    }
  }

  write_text_atomic(out / "analysis.json", report.dump(2) + "\n");
  anlcl::save_image(out / "entropy_bars.png", anlcl::plot_bars(bar_labels, bar_values,
                                                               "MEAN PATCH ENTROPY BITS"));
  anlcl::save_image(out / "singular_spectra.png",
                    anlcl::plot_curves(spectra, "CUMULATIVE SV ENERGY BY RANK"));
  if (!scatter.empty())
    anlcl::save_image(out / "embedding_scatter.png",
                      anlcl::plot_scatter(scatter, "PATCH VECTORS 2D VIEW"));
  man.add_output(out / "analysis.json");
  man.add_output(out / "entropy_bars.png");
  man.add_output(out / "singular_spectra.png");
  man.write();
  std::cout << "analysis written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymmetric non-local contrastive decomposition for single-image deraining"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic clean/rainy/rain dataset");
  std::string synth_out = "dataset";
  int synth_count = 32, synth_h = 128, synth_w = 128, synth_c = 3;
  std::uint64_t synth_seed = 1;
  std::string synth_params;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--count", synth_count, "number of triplets");
  synth->add_option("--height", synth_h);
  synth->add_option("--width", synth_w);
  synth->add_option("--channels", synth_c);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--rain-params", synth_params, "JSON file with rain parameters");

  // train
  auto* train = app.add_subcommand("train", "two-stage pretrain + finetune");
  std::string train_config, train_out = "run", train_sweep, train_device = "cpu";
  std::int64_t train_seed = -1;
  train->add_option("--config", train_config, "training config JSON")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--seed", train_seed, "override config seed");
  train->add_option("--sweep", train_sweep, "JSON list of config overrides; emits combined CSV");
  train->add_option("--device", train_device, "compute device (cpu)");

  // derain
  auto* derain = app.add_subcommand("derain", "decompose image(s) with a trained checkpoint");
  std::string derain_ckpt, derain_in, derain_out = "derained";
  derain->add_option("--checkpoint", derain_ckpt)->required();
  derain->add_option("--in", derain_in, "input image or directory")->required();
  derain->add_option("--out", derain_out);

  // eval
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM against ground truth");
  std::string eval_pred, eval_gt, eval_out = "eval";
  eval->add_option("--pred", eval_pred)->required();
  eval->add_option("--gt", eval_gt)->required();
  eval->add_option("--out", eval_out);

  // sample
  auto* sample = app.add_subcommand("sample", "visualize block-matching matches");
  std::string sample_image, sample_mode = "nonlocal", sample_out = "sample";
  int sample_k = 5, sample_patch = 16, sample_stride = 8;
  int sample_qtop = -1, sample_qleft = -1;
  std::uint64_t sample_seed = 1;
  sample->add_option("--image", sample_image)->required();
  sample->add_option("--mode", sample_mode, "nonlocal|reverse_nonlocal|random|neighbour");
  sample->add_option("--k", sample_k);
  sample->add_option("--out", sample_out);
  sample->add_option("--patch", sample_patch);
  sample->add_option("--stride", sample_stride);
  sample->add_option("--query-top", sample_qtop);
  sample->add_option("--query-left", sample_qleft);
  sample->add_option("--seed", sample_seed);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "patch entropy / singular spectrum / 2-D view");
  std::string analyze_data, analyze_out = "analysis";
  int analyze_patch = 16, analyze_per_cat = 100;
  std::uint64_t analyze_seed = 1;
  bool analyze_random_proj = false;
  analyze->add_option("--data", analyze_data, "synthetic dataset root (default: generated fixtures)");
  analyze->add_option("--out", analyze_out);
  analyze->add_option("--patch", analyze_patch);
  analyze->add_option("--per-category", analyze_per_cat);
  analyze->add_option("--seed", analyze_seed);
  analyze->add_flag("--random-projection", analyze_random_proj,
                    "seeded random projection instead of principal components");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return anlcl::exit_code(ErrorKind::config);
  }

  try {
    if (*synth)
      return cmd_synth(synth_out, synth_count, synth_h, synth_w, synth_c, synth_seed, synth_params);
    if (*train) return cmd_train(train_config, train_out, train_seed, train_sweep, train_device);
    if (*derain) return cmd_derain(derain_ckpt, derain_in, derain_out);
    if (*eval) return cmd_eval(eval_pred, eval_gt, eval_out);
    if (*sample)
      return cmd_sample(sample_image, sample_mode, sample_k, sample_out, sample_patch,
                        sample_stride, sample_qtop, sample_qleft, sample_seed);
    if (*analyze)
      return cmd_analyze(analyze_data, analyze_out, analyze_patch, analyze_per_cat, analyze_seed,
                         analyze_random_proj);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return anlcl::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
