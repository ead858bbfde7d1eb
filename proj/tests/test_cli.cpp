// End-to-end checks of the command-line tool through a real subprocess,
// including exit-code categories and artifact shapes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "anlcl/dataset.hpp"
#include "anlcl/image_io.hpp"

using namespace anlcl;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("ANLCL_BIN");
  REQUIRE(b != nullptr);
  return b;
}

int run(const std::string& args) {
  const std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("anlcl_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ordered_json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  ordered_json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("synth: counts, manifest, byte-identical reruns") {
  const fs::path out1 = temp_dir("synth1");
  const fs::path out2 = temp_dir("synth2");

  CHECK(run("synth --out " + out1.string() + " --count 0 --seed 5") == 0);
  CHECK(fs::exists(out1 / "manifest.json"));
  CHECK(list_images(out1 / "clean").empty());

  CHECK(run("synth --out " + out1.string() + " --count 4 --height 96 --width 96 --seed 5") == 0);
  CHECK(list_images(out1 / "clean").size() == 4);
  CHECK(list_images(out1 / "rainy").size() == 4);
  CHECK(list_images(out1 / "rain").size() == 4);

  CHECK(run("synth --out " + out2.string() + " --count 4 --height 96 --width 96 --seed 5") == 0);
  for (const char* name : {"clean/0000.png", "rainy/0001.png", "rain/0003.png"})
    CHECK(file_bytes(out1 / name) == file_bytes(out2 / name));

  CHECK(fs::exists(out1 / "run_manifest.json"));
  const ordered_json man = read_json(out1 / "run_manifest.json");
  CHECK(man.at("command") == "synth");
  CHECK(man.contains("duration_sec"));
}

TEST_CASE("eval: identical inputs hit the caps; empty intersection errors") {
  const fs::path data = temp_dir("evaldata");
  CHECK(run("synth --out " + data.string() + " --count 2 --height 96 --width 96 --seed 6") == 0);

  const fs::path out = temp_dir("evalout");
  CHECK(run("eval --pred " + (data / "clean").string() + " --gt " + (data / "clean").string() +
            " --out " + out.string()) == 0);
  const ordered_json rep = read_json(out / "metrics.json");
  CHECK(rep.at("mean_psnr").get<double>() == doctest::Approx(99.0));
  CHECK(rep.at("mean_ssim").get<double>() == doctest::Approx(1.0));

  // disjoint filenames: config error (3)
  const fs::path other = temp_dir("evalother");
  fs::create_directories(other / "imgs");
  save_image(other / "imgs" / "zzz.png", Image::constant(1, 32, 32, 0.5f));
  CHECK(run("eval --pred " + (other / "imgs").string() + " --gt " + (data / "clean").string() +
            " --out " + out.string()) == 3);
}

TEST_CASE("sample: k=1 self match with zero distance and sheet pixels") {
  const fs::path data = temp_dir("sampledata");
  CHECK(run("synth --out " + data.string() + " --count 1 --height 96 --width 96 --seed 7") == 0);
  const fs::path img_path = data / "rainy" / "0000.png";

  const fs::path out = temp_dir("sampleout");
  CHECK(run("sample --image " + img_path.string() + " --mode nonlocal --k 3 --out " + out.string()) ==
        0);
  const ordered_json j = read_json(out / "sample.json");
  REQUIRE(j.at("matches").size() == 3);
  // rank 0 is the query itself
  CHECK(j.at("matches")[0].at("distance").get<double>() == 0.0);
  CHECK(j.at("matches")[0].at("top") == j.at("query").at("top"));
  CHECK(j.at("matches")[0].at("left") == j.at("query").at("left"));
  // distances ascend for nonlocal mode
  CHECK(j.at("matches")[0].at("distance").get<double>() <=
        j.at("matches")[1].at("distance").get<double>());
  CHECK(j.at("matches")[1].at("distance").get<double>() <=
        j.at("matches")[2].at("distance").get<double>());

  // contact sheet contains the query patch pixels at 4x scale
  const Image sheet = load_image(out / "contact_sheet.png");
  const Image src = load_image(img_path);
  const int qt = j.at("query").at("top").get<int>();
  const int ql = j.at("query").at("left").get<int>();
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      REQUIRE(std::abs(sheet(0, y * 4, x * 4) - src(0, qt + y, ql + x)) <= 1.0f / 255.0f);

  // reverse mode descends
  CHECK(run("sample --image " + img_path.string() + " --mode reverse_nonlocal --k 3 --out " +
            out.string()) == 0);
  const ordered_json jr = read_json(out / "sample.json");
  CHECK(jr.at("matches")[0].at("distance").get<double>() >=
        jr.at("matches")[2].at("distance").get<double>());
}

TEST_CASE("analyze emits JSON and plots") {
  const fs::path out = temp_dir("analyzeout");
  CHECK(run("analyze --per-category 24 --patch 16 --out " + out.string()) == 0);
  const ordered_json j = read_json(out / "analysis.json");
  REQUIRE(j.contains("texture"));
  REQUIRE(j.contains("streak"));
  CHECK(j.at("texture").at("mean_entropy_bits").get<double>() >
        j.at("streak").at("mean_entropy_bits").get<double>());
  CHECK(fs::exists(out / "entropy_bars.png"));
  CHECK(fs::exists(out / "singular_spectra.png"));
  CHECK(fs::exists(out / "embedding_scatter.png"));
  // plots decode as valid PNGs
  CHECK(load_image(out / "entropy_bars.png").channels() == 3);
}

TEST_CASE("train: tiny run emits all artifacts; derain consumes the checkpoint") {
  const fs::path data = temp_dir("traindata");
  CHECK(run("synth --out " + data.string() + " --count 4 --height 96 --width 96 --seed 8") == 0);

  ordered_json cfg{{"data", {{"train_dir", data.string()}, {"eval_dir", data.string()}}},
                   {"train",
                    {{"lr", 3e-4},
                     {"batch_size", 2},
                     {"crop", 72},
                     {"pretrain_iters", 2},
                     {"finetune_iters", 2},
                     {"seed", 4}}},
                   {"sampler", {{"num_pos", 4}, {"num_neg", 8}, {"num_loc", 4}}},
                   {"network",
                    {{"gen_base_channels", 4},
                     {"gen_res_blocks", 1},
                     {"disc_base_channels", 4},
                     {"proj_hidden", 8},
                     {"embed_dim", 8}}}};
  const fs::path cfg_path = temp_dir("traincfg") / "cfg.json";
  {
    std::ofstream out(cfg_path);
    out << cfg.dump(2);
  }

  const fs::path out = temp_dir("trainout");
  CHECK(run("train --config " + cfg_path.string() + " --out " + out.string()) == 0);
  for (const char* f : {"ckpt_pretrain.bin", "ckpt_final.bin", "loss_log.csv",
                        "distance_curve.csv", "eval.json", "run_manifest.json"})
    CHECK(fs::exists(out / f));

  // loss log has header + 4 rows
  std::ifstream log(out / "loss_log.csv");
  int lines = 0;
  std::string line;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 5);

  // derain a rainy image with the final checkpoint
  const fs::path dout = temp_dir("derainout");
  CHECK(run("derain --checkpoint " + (out / "ckpt_final.bin").string() + " --in " +
            (data / "rainy" / "0000.png").string() + " --out " + dout.string()) == 0);
  CHECK(fs::exists(dout / "0000_B.png"));
  CHECK(fs::exists(dout / "0000_R.png"));
  CHECK(fs::exists(dout / "0000_recon.png"));
  const Image b = load_image(dout / "0000_B.png");
  CHECK(b.height() == 96);
  CHECK(b.width() == 96);

  // unknown config key: configuration error naming matters (exit 3)
  ordered_json bad = cfg;
  bad["train"]["typo_field"] = 1;
  const fs::path bad_path = temp_dir("badcfg") / "bad.json";
  {
    std::ofstream o(bad_path);
    o << bad.dump();
  }
  CHECK(run("train --config " + bad_path.string() + " --out " + out.string()) == 3);

  // missing dataset directory: configuration error
  ordered_json nodata = cfg;
  nodata["data"]["train_dir"] = "/nonexistent/missing";
  const fs::path nodata_path = temp_dir("nodatacfg") / "cfg.json";
  {
    std::ofstream o(nodata_path);
    o << nodata.dump();
  }
  CHECK(run("train --config " + nodata_path.string() + " --out " + out.string()) == 3);

  // corrupt checkpoint: format error (4)
  const fs::path broken = temp_dir("broken") / "ckpt.bin";
  {
    std::ofstream o(broken, std::ios::binary);
    o << "ANLCL-CKPT-1\nnot really";
  }
  CHECK(run("derain --checkpoint " + broken.string() + " --in " +
            (data / "rainy" / "0000.png").string() + " --out " + dout.string()) == 4);

  // missing input image: io error (2)
  CHECK(run("derain --checkpoint " + (out / "ckpt_final.bin").string() +
            " --in /nonexistent/img.png --out " + dout.string()) == 2);
}
