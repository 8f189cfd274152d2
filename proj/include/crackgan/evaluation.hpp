#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crackgan/maps.hpp"

namespace crackgan {

// ---- Otsu -----------------------------------------------------------------

constexpr int kOtsuBins = 256;
using Histogram = std::array<std::uint64_t, kOtsuBins>;

// Bin of a probability: bins are (k/256, (k+1)/256], with 0 in bin 0.
int otsu_bin(double p);
Histogram otsu_histogram(std::span<const double> values);

// Cut t in [1, 255] maximising the between-class variance of
// {bins < t} vs {bins >= t}; ties go to the lowest t. Returns 0 when no cut
// separates two non-empty classes.
int otsu_cut(const Histogram& histogram);

// Threshold in probability space; a pixel is foreground iff p > threshold.
// A constant map returns its value, which binarizes to all zeros.
double otsu_threshold(const ProbabilityMap& map);

BinaryMask binarize(const ProbabilityMap& map, double threshold);
BinaryMask otsu_binarize(const ProbabilityMap& map);

// ---- Counting ---------------------------------------------------------------

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  Confusion& operator+=(const Confusion& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt);

// 1 when nothing was predicted positive.
double precision(const Confusion& c);
// 1 when the ground truth has no positives.
double recall(const Confusion& c);
// 2PR / (P + R), 0 when P + R = 0.
double f_measure(double precision, double recall);

struct SegmentationScores {
  double dice = 0, accuracy = 0, sensitivity = 0, specificity = 0, iou_crack = 0, iou_background = 0;
};

// Ratios with a zero denominator score 1 when the class is absent from both
// masks and 0 otherwise.
SegmentationScores segmentation_scores(const Confusion& c);
SegmentationScores segmentation_scores(const BinaryMask& pred, const BinaryMask& gt);

// Mean of dice, accuracy, sensitivity and specificity (model selection score).
double selection_score(const SegmentationScores& s);

// ---- Threshold sweep ----------------------------------------------------------

// k / 255 for k = 1 … 254.
std::vector<double> default_thresholds();

// Counts at every threshold; a pixel is predicted positive iff p >= t.
std::vector<Confusion> sweep_counts(const ProbabilityMap& pred, const BinaryMask& gt,
                                    std::span<const double> thresholds);

struct PRCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<Confusion> counts;  // dataset-aggregated
};

PRCurve pr_curve(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts,
                 std::span<const double> thresholds);

struct BestF {
  double f = 0.0;
  double threshold = 0.0;
};

// Best F over the aggregated curve; ties go to the lowest threshold.
BestF ods(const PRCurve& curve);

struct PerImageBest {
  std::string id;
  double best_f = 0.0;
  double best_t = 0.0;
};

// Mean over images of each image's best F (ties -> lowest threshold).
double ois(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts, std::span<const double> thresholds,
           std::vector<PerImageBest>* per_image = nullptr);

// Σ_k (R_k - R_{k+1}) P_k over ascending thresholds with R_{K+1} = 0.
double average_precision(const PRCurve& curve);

// ---- Dataset report -------------------------------------------------------------

struct MetricsReport {
  double ods = 0, ods_threshold = 0, ois = 0, ap = 0, global_accuracy = 0, mean_iou = 0;
  std::vector<PerImageBest> per_image;
  PRCurve curve;
};

// Sweep metrics over the default grid; global accuracy and mean IoU from
// dataset-aggregated counts after per-image Otsu binarization. `ids` may be
// empty (images are then numbered).
MetricsReport evaluate_dataset(std::span<const ProbabilityMap> preds, std::span<const BinaryMask> gts,
                               std::span<const std::string> ids = {});

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

void write_pr_curve_csv(std::ostream& os, const PRCurve& curve);
PRCurve read_pr_curve_csv(std::istream& is);

}  // namespace crackgan
