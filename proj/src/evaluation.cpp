#include "crackgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "crackgan/error.hpp"

namespace crackgan {

int otsu_bin(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("probability " + std::to_string(p) + " outside [0, 1]");
  // Scaling by 256 is exact, so bin >= t  <=>  p > t / 256.
  const int bin = static_cast<int>(std::ceil(p * kOtsuBins)) - 1;
  return std::clamp(bin, 0, kOtsuBins - 1);
}

Histogram otsu_histogram(std::span<const double> values) {
  Histogram h{};
  for (double v : values) ++h[otsu_bin(v)];
  return h;
}

namespace {

using u128 = unsigned __int128;

// a/b < c/d for b, d > 0, exactly (continued-fraction comparison).
bool fraction_less(u128 a, u128 b, u128 c, u128 d) {
  while (true) {
    const u128 qa = a / b, qc = c / d;
    if (qa != qc) return qa < qc;
    a -= qa * b;
    c -= qc * d;
    if (a == 0 || c == 0) return a == 0 && c != 0;
    // a/b < c/d  <=>  d/c < b/a
    const u128 na = d, nb = c, nc = b, nd = a;
    a = na;
    b = nb;
    c = nc;
    d = nd;
  }
}

}  // namespace

int otsu_cut(const Histogram& hist) {
  // Between-class variance of cut t is proportional to
  // (S0·N − S·N0)² / (N0·N1); compared as exact fractions.
  u128 total = 0, weighted = 0;
  for (int k = 0; k < kOtsuBins; ++k) {
    total += hist[k];
    weighted += static_cast<u128>(k) * hist[k];
  }
  int best_cut = 0;
  u128 best_num = 0, best_den = 1;
  u128 n0 = 0, s0 = 0;
  for (int t = 1; t < kOtsuBins; ++t) {
    n0 += hist[t - 1];
    s0 += static_cast<u128>(t - 1) * hist[t - 1];
    const u128 n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const u128 a = s0 * total, b = weighted * n0;
    const u128 diff = a > b ? a - b : b - a;
    const u128 num = diff * diff;
    const u128 den = n0 * n1;
    if (best_cut == 0 || fraction_less(best_num, best_den, num, den)) {
      best_cut = t;
      best_num = num;
      best_den = den;
    }
  }
  return best_cut;
}

double otsu_threshold(const ProbabilityMap& map) {
  if (map.values.empty()) throw InputError("otsu_threshold: empty probability map");
  const int cut = otsu_cut(otsu_histogram(map.values));
  if (cut == 0) return *std::max_element(map.values.begin(), map.values.end());
  return static_cast<double>(cut) / kOtsuBins;
}

BinaryMask binarize(const ProbabilityMap& map, double threshold) {
  BinaryMask m(map.height, map.width);
  for (std::size_t i = 0; i < map.values.size(); ++i) m.pixels[i] = map.values[i] > threshold ? 1 : 0;
  return m;
}

BinaryMask otsu_binarize(const ProbabilityMap& map) { return binarize(map, otsu_threshold(map)); }

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_size(pred, gt, "confusion");
  Confusion c;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const auto p = pred.pixels[i];
    const auto g = gt.pixels[i];
    if (p > 1 || g > 1) throw InputError("confusion: non-binary mask value at index " + std::to_string(i));
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

double precision(const Confusion& c) {
  return c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const Confusion& c) {
  return c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f_measure(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

SegmentationScores segmentation_scores(const Confusion& c) {
  const bool crack_absent = c.tp + c.fp + c.fn == 0;
  const bool background_absent = c.tn + c.fp + c.fn == 0;
  auto ratio = [](std::int64_t num, std::int64_t den, bool absent) {
    if (den == 0) return absent ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  SegmentationScores s;
  s.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, crack_absent);
  s.accuracy = ratio(c.tp + c.tn, c.total(), c.total() == 0);
  s.sensitivity = ratio(c.tp, c.tp + c.fn, crack_absent);
  s.specificity = ratio(c.tn, c.tn + c.fp, background_absent);
  s.iou_crack = ratio(c.tp, c.tp + c.fp + c.fn, crack_absent);
  s.iou_background = ratio(c.tn, c.tn + c.fp + c.fn, background_absent);
  return s;
}

SegmentationScores segmentation_scores(const BinaryMask& pred, const BinaryMask& gt) {
  return segmentation_scores(confusion(pred, gt));
}

double selection_score(const SegmentationScores& s) {
  return (s.dice + s.accuracy + s.sensitivity + s.specificity) / 4.0;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 254; ++k) t.push_back(k / 255.0);
  return t;
}

std::vector<Confusion> sweep_counts(const ProbabilityMap& pred, const BinaryMask& gt,
                                    std::span<const double> thresholds) {
  require_same_size(pred, gt, "sweep_counts");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (gt.pixels[i] > 1) throw InputError("sweep_counts: non-binary ground truth");
    (gt.pixels[i] ? pos : neg).push_back(pred.values[i]);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<Confusion> out;
  out.reserve(thresholds.size());
  const auto np = static_cast<std::int64_t>(pos.size());
  const auto nn = static_cast<std::int64_t>(neg.size());
  for (double t : thresholds) {
    Confusion c;
    c.fn = std::lower_bound(pos.begin(), pos.end(), t) - pos.begin();
    c.tp = np - c.fn;
    c.tn = std::lower_bound(neg.begin(), neg.end(), t) - neg.begin();
    c.fp = nn - c.tn;
    out.push_back(c);
  }
  return out;
}

namespace {

void check_dataset(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts) {
  if (preds.empty()) throw InputError("evaluation: empty dataset");
  if (preds.size() != gts.size()) {
    throw InputError("evaluation: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(gts.size()) + " ground-truth masks");
  }
}

void check_thresholds(std::span<const double> thresholds) {
  if (thresholds.empty()) throw InputError("evaluation: empty threshold grid");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw InputError("evaluation: thresholds must be strictly ascending");
  }
}

}  // namespace

PRCurve pr_curve(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts,
                 std::span<const double> thresholds) {
  check_dataset(preds, gts);
  check_thresholds(thresholds);
  PRCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  curve.counts.assign(thresholds.size(), Confusion{});
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto counts = sweep_counts(preds[i], gts[i], thresholds);
    for (std::size_t k = 0; k < counts.size(); ++k) curve.counts[k] += counts[k];
  }
  for (const auto& c : curve.counts) {
    curve.precision.push_back(precision(c));
    curve.recall.push_back(recall(c));
  }
  return curve;
}

BestF ods(const PRCurve& curve) {
  BestF best{-1.0, 0.0};
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    const double f = f_measure(curve.precision[k], curve.recall[k]);
    if (f > best.f) best = {f, curve.thresholds[k]};
  }
  if (best.f < 0) best.f = 0;
  return best;
}

double ois(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts, std::span<const double> thresholds,
           std::vector<PerImageBest>* per_image) {
  check_dataset(preds, gts);
  check_thresholds(thresholds);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto counts = sweep_counts(preds[i], gts[i], thresholds);
    PerImageBest best{std::to_string(i), -1.0, thresholds.front()};
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const double f = f_measure(precision(counts[k]), recall(counts[k]));
      if (f > best.best_f) {
        best.best_f = f;
        best.best_t = thresholds[k];
      }
    }
    sum += best.best_f;
    if (per_image) per_image->push_back(best);
  }
  return sum / static_cast<double>(preds.size());
}

double average_precision(const PRCurve& curve) {
  double ap = 0.0;
  const std::size_t n = curve.recall.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double next = k + 1 < n ? curve.recall[k + 1] : 0.0;
    ap += (curve.recall[k] - next) * curve.precision[k];
  }
  return ap;
}

MetricsReport evaluate_dataset(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts,
                               std::span<const std::string> ids) {
  check_dataset(preds, gts);
  if (!ids.empty() && ids.size() != preds.size()) throw InputError("evaluation: id list length mismatch");
  const auto grid = default_thresholds();
  MetricsReport r;
  r.curve = pr_curve(preds, gts, grid);
  const BestF best = ods(r.curve);
  r.ods = best.f;
  r.ods_threshold = best.threshold;
  r.ap = average_precision(r.curve);
  r.ois = ois(preds, gts, grid, &r.per_image);
  if (!ids.empty()) {
    for (std::size_t i = 0; i < ids.size(); ++i) r.per_image[i].id = ids[i];
  }
  Confusion total;
  for (std::size_t i = 0; i < preds.size(); ++i) total += confusion(otsu_binarize(preds[i]), gts[i]);
  const auto scores = segmentation_scores(total);
  r.global_accuracy = scores.accuracy;
  r.mean_iou = (scores.iou_crack + scores.iou_background) / 2.0;
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["ods"] = r.ods;
  j["ois"] = r.ois;
  j["ap"] = r.ap;
  j["global_accuracy"] = r.global_accuracy;
  j["mean_iou"] = r.mean_iou;
  j["ods_threshold"] = r.ods_threshold;
  j["per_image"] = nlohmann::ordered_json::array();
  for (const auto& p : r.per_image) {
    j["per_image"].push_back({{"id", p.id}, {"best_f", p.best_f}, {"best_t", p.best_t}});
  }
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
  MetricsReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.ods = j.at("ods").get<double>();
    r.ois = j.at("ois").get<double>();
    r.ap = j.at("ap").get<double>();
    r.global_accuracy = j.at("global_accuracy").get<double>();
    r.mean_iou = j.at("mean_iou").get<double>();
    r.ods_threshold = j.value("ods_threshold", 0.0);
    for (const auto& p : j.at("per_image")) {
      r.per_image.push_back({p.at("id").get<std::string>(), p.at("best_f").get<double>(), p.at("best_t").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("metrics.json: ") + e.what());
  }
  for (double v : {r.ods, r.ois, r.ap, r.global_accuracy, r.mean_iou}) {
    if (!(v >= 0 && v <= 1)) throw InputError("metrics.json: metric outside [0, 1]");
  }
  return r;
}

void write_pr_curve_csv(std::ostream& os, const PRCurve& curve) {
  os << "threshold,precision,recall\n";
  char line[128];
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", curve.thresholds[k], curve.precision[k],
                  curve.recall[k]);
    os << line;
  }
}

PRCurve read_pr_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "threshold,precision,recall") {
    throw InputError("pr_curve.csv: expected header 'threshold,precision,recall'");
  }
  PRCurve c;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double t, p, r;
    char c1 = 0, c2 = 0;
    if (!(ls >> t >> c1 >> p >> c2 >> r) || c1 != ',' || c2 != ',') {
      throw InputError("pr_curve.csv: malformed row " + std::to_string(row));
    }
    c.thresholds.push_back(t);
    c.precision.push_back(p);
    c.recall.push_back(r);
  }
  return c;
}

}  // namespace crackgan
