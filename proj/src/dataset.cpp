#include "anlcl/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "anlcl/image_io.hpp"
#include "anlcl/scene.hpp"

namespace anlcl {

using nlohmann::ordered_json;

namespace {

std::string index_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d.png", i);
  return buf;
}

ordered_json rain_params_json(const RainParams& p) {
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

RainParams rain_params_from_json(const ordered_json& j) {
  RainParams p;
  p.streak_count = j.at("streak_count").get<int>();
  p.length_min = j.at("length_min").get<int>();
  p.length_max = j.at("length_max").get<int>();
  p.width_min = j.at("width_min").get<int>();
  p.width_max = j.at("width_max").get<int>();
  p.angle_min_deg = j.at("angle_min_deg").get<float>();
  p.angle_max_deg = j.at("angle_max_deg").get<float>();
  p.intensity_min = j.at("intensity_min").get<float>();
  p.intensity_max = j.at("intensity_max").get<float>();
  p.veiling_strength = j.at("veiling_strength").get<float>();
  return p;
}

Image load_downsampled(const std::filesystem::path& path, int factor) {
  if (factor <= 1) return load_image(path);
  // Cache the downsampled copy when ANLCL_CACHE is set; keyed on path, size
  // and factor so stale entries cannot be picked up silently.
  if (auto root = cache_root()) {
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    const std::size_t key =
        std::hash<std::string>{}(std::filesystem::absolute(path).string()) ^
        (std::hash<std::uintmax_t>{}(ec ? 0 : bytes) * 31) ^ std::size_t(factor);
    const auto cached = *root / ("ds_" + std::to_string(key) + ".png");
    if (std::filesystem::exists(cached)) return load_image(cached);
    Image img = downsample(load_image(path), factor);
    std::filesystem::create_directories(*root);
    save_image(cached, img);
    return img;
  }
  return downsample(load_image(path), factor);
}

}  // namespace

void write_synth_dataset(const std::filesystem::path& dir, const SynthDatasetSpec& spec) {
  validate(spec.rain);
  std::error_code ec;
  std::filesystem::create_directories(dir / "clean", ec);
  std::filesystem::create_directories(dir / "rainy", ec);
  std::filesystem::create_directories(dir / "rain", ec);
  if (ec) throw Error(ErrorKind::io, "cannot create dataset directories under " + dir.string());

  Rng base(spec.seed);
  for (int i = 0; i < spec.count; ++i) {
    Rng scene_rng = base.fork(2 * i);
    Rng rain_rng = base.fork(2 * i + 1);
    const Image clean = make_clean_scene(spec.height, spec.width, spec.channels, scene_rng);
    const RainPair pair = synth_rain(clean, spec.rain, rain_rng);
    save_image(dir / "clean" / index_name(i), clean);
    save_image(dir / "rainy" / index_name(i), pair.rainy);
    save_image(dir / "rain" / index_name(i), pair.rain);
  }

  ordered_json manifest{{"format", "anlcl-synth-1"},
                        {"count", spec.count},
                        {"height", spec.height},
                        {"width", spec.width},
                        {"channels", spec.channels},
                        {"seed", spec.seed},
                        {"rain", rain_params_json(spec.rain)}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::io, "cannot write manifest under " + dir.string());
  out << manifest.dump(2) << "\n";
}

SynthDatasetSpec read_synth_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::io, "missing manifest.json in " + dir.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "bad manifest.json: " + std::string(e.what()));
  }
  if (j.value("format", "") != std::string("anlcl-synth-1"))
    throw Error(ErrorKind::format, "unknown dataset manifest format");
  SynthDatasetSpec spec;
  spec.count = j.at("count").get<int>();
  spec.height = j.at("height").get<int>();
  spec.width = j.at("width").get<int>();
  spec.channels = j.at("channels").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.rain = rain_params_from_json(j.at("rain"));
  return spec;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorKind::config, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".PNG" || ext == ".jpg" || ext == ".jpeg" || ext == ".JPG")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::optional<std::filesystem::path> cache_root() {
  if (const char* env = std::getenv("ANLCL_CACHE"); env && *env)
    return std::filesystem::path(env);
  return std::nullopt;
}

DatasetIter::DatasetIter(const std::filesystem::path& dir, int crop, int downsample_factor,
                         std::uint64_t seed)
    : crop_(crop), rng_(seed) {
  const auto files = list_images(dir);
  if (files.empty()) throw Error(ErrorKind::config, "no images in " + dir.string());
  for (const auto& f : files) {
    Image img = load_downsampled(f, downsample_factor);
    if (img.height() < crop || img.width() < crop)
      throw Error(ErrorKind::config, "image smaller than crop after downsampling: " + f.string());
    images_.push_back(std::move(img));
  }
  order_.resize(images_.size());
  reshuffle();
}

void DatasetIter::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
  rng_.shuffle(order_);
  cursor_ = 0;
}

Image DatasetIter::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const Image& img = images_[order_[cursor_++]];
  return random_crop(img, crop_, rng_);
}

PairedDatasetIter::PairedDatasetIter(const std::filesystem::path& root, int crop,
                                     int downsample_factor, std::uint64_t seed)
    : crop_(crop), rng_(seed) {
  const auto rainy_files = list_images(root / "rainy");
  if (rainy_files.empty()) throw Error(ErrorKind::config, "no images in " + (root / "rainy").string());
  for (const auto& rf : rainy_files) {
    const auto name = rf.filename();
    const auto cf = root / "clean" / name;
    const auto gf = root / "rain" / name;
    if (!std::filesystem::exists(cf) || !std::filesystem::exists(gf))
      throw Error(ErrorKind::config, "unpaired dataset entry: " + name.string());
    PairedSample s{load_downsampled(rf, downsample_factor), load_downsampled(cf, downsample_factor),
                   load_downsampled(gf, downsample_factor)};
    if (s.rainy.height() < crop || s.rainy.width() < crop)
      throw Error(ErrorKind::config, "image smaller than crop: " + rf.string());
    triples_.push_back(std::move(s));
  }
  order_.resize(triples_.size());
  reshuffle();
}

void PairedDatasetIter::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
  rng_.shuffle(order_);
  cursor_ = 0;
}

PairedSample PairedDatasetIter::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const PairedSample& s = triples_[order_[cursor_++]];
  const CropWindow w = pick_crop_window(s.rainy.height(), s.rainy.width(), crop_, rng_);
  return {crop(s.rainy, w), crop(s.clean, w), crop(s.rain, w)};
}

}  // namespace anlcl
