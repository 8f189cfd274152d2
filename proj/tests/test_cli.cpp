#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "crackgan/cli.hpp"
#include "crackgan/image_io.hpp"
#include "crackgan/synthetic.hpp"

using namespace crackgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("crackgan_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const { return (path / sub).string(); }
};

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "crackgan");
  return run(args);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t count_files(const std::string& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

const std::vector<std::string> kSmallNets{"generator.base_width=2", "discriminator.base_width=2",
                                          "auxiliary.base_width=2", "train.batch_size=2"};

}  // namespace

TEST_CASE("exit codes") {
  TempDir tmp("codes");
  CHECK(cli({}) == 1);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"complexity"}) == 1);
  CHECK(cli({"complexity", "--out", tmp / "c", "--override", "train.lrr=1"}) == 1);
  CHECK(cli({"complexity", "--out", tmp / "c", "--device", "gpu:0"}) == 1);
  CHECK(cli({"complexity", "--out", tmp / "c", "--config", tmp / "missing.cfg"}) == 1);
  CHECK(cli({"prepare-data", "--out", tmp / "p", "--input", tmp / "missing"}) == 1);
  CHECK(cli({"train", "--out", tmp / "t"}) == 1);

  fs::create_directories(tmp.path / "pred");
  fs::create_directories(tmp.path / "gt");
  write_mask(tmp / "gt/a.png", BinaryMask(4, 4));
  CHECK(cli({"evaluate", "--out", tmp / "e", "--pred", tmp / "pred", "--gt", tmp / "gt"}) == 2);
}

TEST_CASE("evaluate on perfect predictions scores 1") {
  TempDir tmp("eval");
  fs::create_directories(tmp.path / "pred");
  fs::create_directories(tmp.path / "gt");
  for (int i = 0; i < 3; ++i) {
    const SyntheticTile t = synthetic_crack_tile(32, 32, 40 + i);
    write_mask(tmp / ("gt/m" + std::to_string(i) + ".png"), t.mask);
    write_probability(tmp / ("pred/m" + std::to_string(i) + ".png"), ProbabilityMap::from_mask(t.mask));
  }
  REQUIRE(cli({"evaluate", "--out", tmp / "e", "--pred", tmp / "pred", "--gt", tmp / "gt"}) == 0);
  const auto j = nlohmann::json::parse(slurp(tmp / "e/metrics.json"));
  for (const char* key : {"ods", "ois", "ap", "global_accuracy", "mean_iou"}) CHECK(j.at(key).get<double>() == 1.0);
  CHECK(j.at("per_image").size() == 3);
  const auto csv = lines(tmp / "e/pr_curve.csv");
  CHECK(csv.front() == "threshold,precision,recall");
  CHECK(csv.size() == 255);

  REQUIRE(cli({"plot-pr", "--out", tmp / "fig/pr.png", "--curve", tmp / "e/pr_curve.csv", "--label", "ours"}) == 0);
  CHECK(fs::file_size(tmp / "fig/pr.png") > 0);
}

TEST_CASE("prepare-data on one 2000x1500 image gives 20 windows times 4 rotations") {
  TempDir tmp("prepare");
  fs::create_directories(tmp.path / "raw/images");
  fs::create_directories(tmp.path / "raw/masks");
  Tensor image({3, 1500, 2000}, 0.5);
  BinaryMask mask(1500, 2000);
  for (int r = 0; r < 1500; r += 40) {
    for (int c = 0; c < 2000; c += 40) mask.at(r, c) = 1;
  }
  write_rgb(tmp / "raw/images/road.jpg", image);
  write_mask(tmp / "raw/masks/road.png", mask);
  REQUIRE(cli({"prepare-data", "--out", tmp / "out", "--input", tmp / "raw", "--override", "data.preset=CRACK500",
               "data.min_crack_pixels=0"}) == 0);
  CHECK(count_files(tmp / "out/images") == 80);
  CHECK(count_files(tmp / "out/masks") == 80);
  CHECK(lines(tmp / "out/manifest.csv").size() == 81);
  const std::string cfg = slurp(tmp / "out/config.txt");
  CHECK(cfg.find("data.tile_w = 512") != std::string::npos);
}

TEST_CASE("train, predict and complexity from the command line") {
  TempDir tmp("train");
  write_synthetic_corpus(tmp / "raw", 10, 32, 32, 5, 0.08);
  REQUIRE(cli({"prepare-data", "--out", tmp / "data", "--input", tmp / "raw", "--override", "data.min_crack_pixels=0",
               "data.test_fraction=0.2", "data.val_fraction=0.2"}) == 0);

  std::vector<std::string> args{"train", "--out", tmp / "run", "--data", tmp / "data", "--seed", "3", "--override",
                                "train.iterations=4", "train.eval_every=2"};
  args.insert(args.end(), kSmallNets.begin(), kSmallNets.end());
  REQUIRE(cli(args) == 0);
  const auto log = lines(tmp / "run/train_log.csv");
  REQUIRE(log.size() == 5);
  int scored = 0;
  for (std::size_t i = 1; i < log.size(); ++i) scored += log[i].back() != ',';
  CHECK(scored == 2);
  CHECK(fs::exists(tmp / "run/best.ckpt"));

  // The saved effective config reproduces the run.
  REQUIRE(cli({"train", "--out", tmp / "rerun", "--config", tmp / "run/config.txt"}) == 0);
  CHECK(slurp(tmp / "rerun/train_log.csv") == slurp(tmp / "run/train_log.csv"));
  CHECK(slurp(tmp / "rerun/config.txt") == slurp(tmp / "run/config.txt"));

  REQUIRE(cli({"predict", "--out", tmp / "pred", "--checkpoint", tmp / "run/best.ckpt", "--input", tmp / "data",
               "--split", "test"}) == 0);
  REQUIRE(cli({"evaluate", "--out", tmp / "eval", "--pred", tmp / "pred", "--gt", tmp / "data", "--split", "test"}) ==
          0);
  const auto j = nlohmann::json::parse(slurp(tmp / "eval/metrics.json"));
  CHECK(j.at("ods").get<double>() >= 0.0);

  // Odd-sized inputs are padded internally and cropped back.
  fs::create_directories(tmp.path / "odd");
  write_rgb(tmp / "odd/x.png", synthetic_crack_tile(32, 32, 1).image);
  Tensor odd({3, 20, 27}, 0.4);
  write_rgb(tmp / "odd/y.png", odd);
  REQUIRE(cli({"predict", "--out", tmp / "odd_pred", "--checkpoint", tmp / "run/best.ckpt", "--input", tmp / "odd"}) ==
          0);
  const ProbabilityMap p = read_probability(tmp / "odd_pred/y.png");
  CHECK(p.height == 20);
  CHECK(p.width == 27);

  REQUIRE(cli({"complexity", "--out", tmp / "cx", "--override", "complexity.height=64", "complexity.width=64",
               "complexity.runs=2", "complexity.warmup=1", "generator.base_width=4"}) == 0);
  const auto cx = nlohmann::json::parse(slurp(tmp / "cx/complexity.json"));
  CHECK(cx.at("params").get<std::int64_t>() > 0);
  CHECK(fs::exists(tmp / "cx/generator_manifest.txt"));
}
