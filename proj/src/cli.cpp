#include "crackgan/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>
#include <set>

#include "crackgan/checkpoint.hpp"
#include "crackgan/complexity.hpp"
#include "crackgan/config.hpp"
#include "crackgan/error.hpp"
#include "crackgan/evaluation.hpp"
#include "crackgan/image_io.hpp"
#include "crackgan/ops.hpp"

namespace crackgan {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::string seed;
  std::string device;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--override", c.overrides, "key=value overrides, applied after --config")->expected(1, -1);
  cmd->add_option("--out", c.out, "output directory (plot-pr: image path)")->required();
  cmd->add_option("--seed", c.seed, "random seed (same as --override seed=N)");
  cmd->add_option("--device", c.device, "cpu or cpu:<id>");
}

Config effective_config(const Common& c) {
  Config cfg;
  if (!c.config_path.empty()) cfg.load_file(c.config_path);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (!c.seed.empty()) cfg.set("seed", c.seed);
  if (!c.device.empty()) cfg.set("device", c.device);
  const std::string& device = cfg.get("device");
  if (device != "cpu" && device.rfind("cpu:", 0) != 0) {
    throw ConfigError("device: '" + device + "' is not available; this build runs on cpu only");
  }
  cfg.get_uint("seed");
  return cfg;
}

void require_dir(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_directory(path)) throw ConfigError(what + ": directory '" + path + "' does not exist");
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(what + ": file '" + path + "' does not exist");
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// (stem, path) pairs sorted by stem; with a split, entries of a prepared
// dataset's manifest restricted to that split.
std::vector<std::pair<std::string, std::string>> list_inputs(const std::string& dir, const std::string& sub,
                                                             const std::string& split) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!split.empty()) {
    for (const auto& e : read_tile_manifest(dir)) {
      if (e.split == split) out.emplace_back(e.name, (fs::path(dir) / sub / (e.name + ".png")).string());
    }
    if (out.empty()) throw InputError("'" + dir + "/manifest.csv' has no tiles in split '" + split + "'");
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && is_image(e.path())) out.emplace_back(e.path().stem().string(), e.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw InputError("no images in '" + dir + "'");
  }
  return out;
}

int cmd_prepare(const Common& common, const std::string& input) {
  Config cfg = effective_config(common);
  if (!input.empty()) cfg.set("data.root", input);
  require_dir(cfg.get("data.root"), "data.root");
  resolve_presets(cfg);
  const DatasetSpec spec = dataset_spec(cfg);
  fs::create_directories(common.out);
  const auto s = prepare_dataset(cfg.get("data.root"), common.out, spec);
  cfg.save((fs::path(common.out) / "config.txt").string());
  std::cout << "sources " << s.sources << ", tiles cropped " << s.tiles_cropped << ", kept after filter+rotation "
            << s.tiles_kept << " (train " << s.train << ", val " << s.val << ", test " << s.test << ")\n";
  return 0;
}

int cmd_train(const Common& common, const std::string& data) {
  Config cfg = effective_config(common);
  if (!data.empty()) cfg.set("data.dir", data);
  require_dir(cfg.get("data.dir"), "data.dir");
  resolve_presets(cfg);
  Trainer trainer(generator_spec(cfg), discriminator_spec(cfg), auxiliary_spec(cfg), train_config(cfg),
                  loss_config(cfg));
  const auto train_set = load_split(cfg.get("data.dir"), "train");
  const auto val_set = load_split(cfg.get("data.dir"), "val");
  if (train_set.empty()) throw ConfigError("data.dir: '" + cfg.get("data.dir") + "' has no train tiles");
  if (val_set.empty()) throw ConfigError("data.dir: '" + cfg.get("data.dir") + "' has no val tiles");
  fs::create_directories(common.out);
  cfg.save((fs::path(common.out) / "config.txt").string());
  const auto result = train(trainer, train_set, val_set, common.out, cfg.entries());
  std::cout << "best iteration " << result.best.iteration << ", validation score " << result.best.score << "\n";
  return 0;
}

ProbabilityMap predict_one(Generator& g, const Tensor& image) {
  const int h = image.dim(1), w = image.dim(2);
  const int m = 1 << g.spec().depth;
  const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  NoGradGuard no_grad;
  Var x = Var::constant(image.reshaped({1, 3, h, w}));
  if (ph != h || pw != w) x = ops::pad2d(x, 0, ph - h, 0, pw - w);
  Var fused = g.forward(x).fused;
  if (ph != h || pw != w) fused = ops::crop2d(fused, 0, 0, h, w);
  return ProbabilityMap::from_tensor(fused.value(), 0);
}

int cmd_predict(const Common& common, const std::string& checkpoint_path, const std::string& input,
                const std::string& split) {
  effective_config(common);
  require_file(checkpoint_path, "--checkpoint");
  require_dir(input, "--input");
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  Config cfg = Config::from_entries(ck.config);
  Generator g(generator_spec(cfg));
  restore_network(ck, "generator", g);
  g.set_training(false);
  fs::create_directories(common.out);
  int count = 0;
  for (const auto& [stem, path] : list_inputs(input, "images", split)) {
    write_probability((fs::path(common.out) / (stem + ".png")).string(), predict_one(g, read_rgb(path)));
    ++count;
  }
  std::cout << "wrote " << count << " probability maps to " << common.out << "\n";
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& split) {
  effective_config(common);
  require_dir(pred_dir, "--pred");
  require_dir(gt_dir, "--gt");
  std::vector<ProbabilityMap> preds;
  std::vector<BinaryMask> gts;
  std::vector<std::string> ids;
  for (const auto& [stem, path] : list_inputs(gt_dir, "masks", split)) {
    const fs::path pred = fs::path(pred_dir) / (stem + ".png");
    if (!fs::exists(pred)) throw InputError("missing prediction '" + pred.string() + "'");
    gts.push_back(read_mask(path));
    preds.push_back(read_probability(pred.string()));
    ids.push_back(stem);
  }
  const MetricsReport report = evaluate_dataset(preds, gts, ids);
  fs::create_directories(common.out);
  std::ofstream(fs::path(common.out) / "metrics.json") << metrics_to_json(report);
  std::ofstream csv(fs::path(common.out) / "pr_curve.csv");
  write_pr_curve_csv(csv, report.curve);
  std::cout << "ODS " << report.ods << "  OIS " << report.ois << "  AP " << report.ap << "  GA "
            << report.global_accuracy << "  mIoU " << report.mean_iou << "\n";
  return 0;
}

int cmd_plot(const Common& common, const std::vector<std::string>& curves, std::vector<std::string> labels) {
  effective_config(common);
  if (curves.empty()) throw ConfigError("--curve: at least one pr_curve.csv is required");
  if (!labels.empty() && labels.size() != curves.size()) throw ConfigError("--label: one label per --curve");
  std::vector<PRCurve> data;
  for (const auto& path : curves) {
    require_file(path, "--curve");
    std::ifstream in(path);
    try {
      data.push_back(read_pr_curve_csv(in));
    } catch (const InputError& e) {
      throw InputError(path + ": " + e.what());
    }
    if (labels.size() < data.size()) labels.push_back(fs::path(path).parent_path().filename().string());
  }

  const int size = 600, margin = 70;
  cv::Mat img(size + 2 * margin, size + 2 * margin, CV_8UC3, cv::Scalar(255, 255, 255));
  auto px = [&](double r, double p) {
    return cv::Point(margin + static_cast<int>(r * size), margin + size - static_cast<int>(p * size));
  };
  for (int k = 0; k <= 10; ++k) {
    const double v = k / 10.0;
    cv::line(img, px(v, 0), px(v, 1), cv::Scalar(225, 225, 225));
    cv::line(img, px(0, v), px(1, v), cv::Scalar(225, 225, 225));
    char tick[8];
    std::snprintf(tick, sizeof(tick), "%.1f", v);
    cv::putText(img, tick, px(v, 0) + cv::Point(-12, 22), cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0));
    cv::putText(img, tick, px(0, v) + cv::Point(-40, 5), cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0));
  }
  cv::rectangle(img, px(0, 1), px(1, 0), cv::Scalar(0, 0, 0));
  cv::putText(img, "Recall", px(0.45, 0) + cv::Point(0, 50), cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0));
  cv::putText(img, "Precision", cv::Point(8, margin - 20), cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0));
  const std::vector<cv::Scalar> palette{{200, 60, 30}, {30, 30, 220}, {40, 160, 40}, {160, 40, 160},
                                        {20, 140, 220}, {120, 120, 0}, {80, 80, 80}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& c = data[i];
    const cv::Scalar color = palette[i % palette.size()];
    std::vector<cv::Point> pts;
    for (std::size_t k = 0; k < c.recall.size(); ++k) pts.push_back(px(c.recall[k], c.precision[k]));
    cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
    const cv::Point legend = px(0.04, 0.06) + cv::Point(0, -22 * static_cast<int>(data.size() - 1 - i));
    cv::line(img, legend, legend + cv::Point(30, 0), color, 3);
    cv::putText(img, labels[i], legend + cv::Point(38, 5), cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0));
  }
  const fs::path out(common.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (!cv::imwrite(out.string(), img)) throw InputError("cannot write figure '" + out.string() + "'");
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_complexity(const Common& common) {
  Config cfg = effective_config(common);
  const std::string which = cfg.get("complexity.network");
  const int h = cfg.get_int("complexity.height"), w = cfg.get_int("complexity.width");
  const int warmup = cfg.get_int("complexity.warmup"), runs = cfg.get_int("complexity.runs");
  if (h < 1 || w < 1) throw ConfigError("complexity.height / complexity.width must be positive");
  if (warmup < 0 || runs < 0) throw ConfigError("complexity.warmup / complexity.runs must be >= 0");

  std::unique_ptr<Network> net;
  std::function<void(const Tensor&)> forward;
  int channels = 0;
  if (which == "generator") {
    auto g = std::make_unique<Generator>(generator_spec(cfg));
    Generator* gp = g.get();
    forward = [gp](const Tensor& x) { gp->forward(Var::constant(x)); };
    channels = 3;
    net = std::move(g);
  } else if (which == "discriminator") {
    auto d = make_discriminator(discriminator_spec(cfg));
    Discriminator* dp = d.get();
    forward = [dp](const Tensor& x) { dp->forward(Var::constant(x)); };
    channels = 4;
    net = std::move(d);
  } else if (which == "auxiliary") {
    auto a = make_auxiliary(auxiliary_spec(cfg));
    PixelDiscriminator* ap = a.get();
    forward = [ap](const Tensor& x) { ap->forward(Var::constant(x)); };
    channels = 1;
    net = std::move(a);
  } else {
    throw ConfigError("complexity.network: expected generator, discriminator or auxiliary, got '" + which + "'");
  }
  net->set_training(false);
  const LayerManifest manifest = net->manifest(h, w);
  ComplexityReport report = complexity_report(manifest);
  if (runs > 0) {
    std::mt19937_64 rng(cfg.get_uint("seed"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor x({1, channels, h, w});
    for (double& v : x.values()) v = unit(rng);
    NoGradGuard no_grad;
    report.seconds_per_image = time_inference([&] { forward(x); }, warmup, runs);
    report.timed_runs = runs;
  }
  fs::create_directories(common.out);
  std::ofstream(fs::path(common.out) / "complexity.json") << complexity_to_json(report);
  save_manifest((fs::path(common.out) / (which + "_manifest.txt")).string(), manifest);
  cfg.save((fs::path(common.out) / "config.txt").string());
  std::cout << which << " (" << manifest.variant << ") at " << h << "x" << w << ": "
            << static_cast<double>(report.flops) / 1e9 << " GFLOPs, " << static_cast<double>(report.params) / 1e6
            << " M params";
  if (runs > 0) std::cout << ", " << report.seconds_per_image << " s/image";
  std::cout << "\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Crack segmentation with attention cGANs"};
  app.require_subcommand(1);
  Common common;

  auto* prepare = app.add_subcommand("prepare-data", "crop, filter, rotate and split a raw dataset");
  add_common(prepare, common);
  std::string prepare_input;
  prepare->add_option("--input", prepare_input, "raw dataset root with images/ and masks/ (data.root)");

  auto* train_cmd = app.add_subcommand("train", "two-stage training with validation-based selection");
  add_common(train_cmd, common);
  std::string train_data;
  train_cmd->add_option("--data", train_data, "prepared dataset directory (data.dir)");

  auto* predict = app.add_subcommand("predict", "write probability maps for a directory of images");
  add_common(predict, common);
  std::string checkpoint, predict_input, predict_split;
  predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  predict->add_option("--input", predict_input, "image directory, or a prepared dataset with --split")->required();
  predict->add_option("--split", predict_split, "train, val or test of a prepared dataset");

  auto* evaluate = app.add_subcommand("evaluate", "score probability maps against ground truth");
  add_common(evaluate, common);
  std::string pred_dir, gt_dir, gt_split;
  evaluate->add_option("--pred", pred_dir, "directory of probability PNGs")->required();
  evaluate->add_option("--gt", gt_dir, "mask directory, or a prepared dataset with --split")->required();
  evaluate->add_option("--split", gt_split, "train, val or test of a prepared dataset");

  auto* plot = app.add_subcommand("plot-pr", "overlay precision-recall curves");
  add_common(plot, common);
  std::vector<std::string> curves, labels;
  plot->add_option("--curve", curves, "pr_curve.csv files")->expected(1, -1)->required();
  plot->add_option("--label", labels, "legend labels, one per curve")->expected(1, -1);

  auto* complexity = app.add_subcommand("complexity", "FLOPs, parameters and time per image");
  add_common(complexity, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*prepare) return cmd_prepare(common, prepare_input);
    if (*train_cmd) return cmd_train(common, train_data);
    if (*predict) return cmd_predict(common, checkpoint, predict_input, predict_split);
    if (*evaluate) return cmd_evaluate(common, pred_dir, gt_dir, gt_split);
    if (*plot) return cmd_plot(common, curves, labels);
    if (*complexity) return cmd_complexity(common);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(copy.size()), argv.data());
}

}  // namespace crackgan
