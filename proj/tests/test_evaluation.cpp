#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "crackgan/error.hpp"
#include "crackgan/evaluation.hpp"

using namespace crackgan;

namespace {

struct Counts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

double oracle_p(const Counts& c) { return c.tp + c.fp == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fp); }
double oracle_r(const Counts& c) { return c.tp + c.fn == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fn); }
double oracle_f(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

Counts count_at(const ProbabilityMap& p, const BinaryMask& g, double t) {
  Counts c;
  for (int r = 0; r < p.height; ++r) {
    for (int col = 0; col < p.width; ++col) {
      const bool pos = p.at(r, col) >= t;
      const bool gt = g.at(r, col) == 1;
      if (pos && gt) ++c.tp;
      if (pos && !gt) ++c.fp;
      if (!pos && gt) ++c.fn;
      if (!pos && !gt) ++c.tn;
    }
  }
  return c;
}

struct Dataset {
  std::vector<ProbabilityMap> preds;
  std::vector<BinaryMask> gts;
};

// Values on the 8-bit grid (as read from PNGs) plus arbitrary reals.
Dataset random_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_img(1, 3), side(1, 8), level(0, 255), coin(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset d;
  const int n = n_img(rng);
  const double crack_rate = unit(rng);
  for (int i = 0; i < n; ++i) {
    const int h = side(rng), w = side(rng);
    ProbabilityMap p(h, w);
    BinaryMask g(h, w);
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      p.values[k] = coin(rng) == 0 ? unit(rng) : level(rng) / 255.0;
      g.pixels[k] = unit(rng) < crack_rate ? 1 : 0;
    }
    d.preds.push_back(std::move(p));
    d.gts.push_back(std::move(g));
  }
  return d;
}

// Between-class variance numerator/denominator for a cut, exact in 128 bits.
using u128 = unsigned __int128;

int otsu_oracle(const Histogram& h) {
  int best = 0;
  u128 best_num = 0, best_den = 1;
  for (int t = 1; t < 256; ++t) {
    u128 n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int k = 0; k < 256; ++k) {
      if (k < t) {
        n0 += h[k];
        s0 += static_cast<u128>(k) * h[k];
      } else {
        n1 += h[k];
        s1 += static_cast<u128>(k) * h[k];
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    // N0 N1 (mu0 - mu1)^2 = (s0 n1 - s1 n0)^2 / (n0 n1)
    const u128 a = s0 * n1, b = s1 * n0;
    const u128 diff = a > b ? a - b : b - a;
    const u128 num = diff * diff, den = n0 * n1;
    if (best == 0 || num * best_den > best_num * den) {
      best = t;
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

ProbabilityMap from_values(int h, int w, std::vector<double> v) {
  ProbabilityMap p(h, w);
  p.values = std::move(v);
  return p;
}

BinaryMask mask_from(int h, int w, std::vector<int> v) {
  BinaryMask m(h, w);
  for (std::size_t i = 0; i < v.size(); ++i) m.pixels[i] = static_cast<std::uint8_t>(v[i]);
  return m;
}

}  // namespace

TEST_CASE("Otsu matches an exhaustive between-class variance search") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> bins(1, 12), bin(0, 255), count(0, 1000);
  for (int trial = 0; trial < 1000; ++trial) {
    Histogram h{};
    if (trial % 2 == 0) {
      for (int k = 0; k < 256; ++k) h[k] = count(rng);
    } else {
      const int n = trial % 4 == 1 ? 8 : bins(rng);
      for (int k = 0; k < n; ++k) h[bin(rng)] += count(rng) + 1;
    }
    REQUIRE(otsu_cut(h) == otsu_oracle(h));
  }
}

TEST_CASE("Otsu threshold separates a bimodal map and binarizes above the cut") {
  ProbabilityMap p(10, 10);
  for (std::size_t i = 0; i < 100; ++i) p.values[i] = i < 50 ? 0.1 : 0.9;
  const double t = otsu_threshold(p);
  CHECK(t > 0.1);
  CHECK(t < 0.9);
  const BinaryMask m = otsu_binarize(p);
  for (std::size_t i = 0; i < 100; ++i) CHECK(m.pixels[i] == (i < 50 ? 0 : 1));
  // The binarized mask equals "bin >= cut".
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0, 1);
  ProbabilityMap q(6, 7);
  for (double& v : q.values) v = unit(rng);
  const int cut = otsu_cut(otsu_histogram(q.values));
  const BinaryMask qm = otsu_binarize(q);
  for (std::size_t i = 0; i < q.values.size(); ++i) CHECK(qm.pixels[i] == (otsu_bin(q.values[i]) >= cut ? 1 : 0));
}

TEST_CASE("Otsu degenerate cases") {
  ProbabilityMap c(4, 4, 0.37);
  CHECK(otsu_threshold(c) == 0.37);
  CHECK(otsu_binarize(c).count() == 0);
  CHECK(otsu_binarize(ProbabilityMap(3, 3, 1.0)).count() == 0);
  CHECK_THROWS_AS(otsu_threshold(ProbabilityMap()), InputError);
  CHECK_THROWS_AS(otsu_bin(1.5), InputError);
  CHECK(otsu_bin(0.0) == 0);
  CHECK(otsu_bin(1.0) == 255);
  CHECK(otsu_bin(1.0 / 256) == 0);
  CHECK(otsu_bin(std::nextafter(1.0 / 256, 1.0)) == 1);
}

TEST_CASE("confusion counts") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.4);
  BinaryMask a(4, 4), b(4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    for (std::size_t i = 0; i < 16; ++i) {
      a.pixels[i] = coin(rng);
      b.pixels[i] = coin(rng);
    }
    const Confusion c = confusion(a, b);
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) {
        tp += a.at(r, col) && b.at(r, col);
        fp += a.at(r, col) && !b.at(r, col);
        tn += !a.at(r, col) && !b.at(r, col);
        fn += !a.at(r, col) && b.at(r, col);
      }
    }
    CHECK(c == Confusion{tp, fp, tn, fn});
    CHECK(c.total() == 16);
  }
  const Confusion same = confusion(a, a);
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  BinaryMask inv = a;
  for (auto& v : inv.pixels) v = 1 - v;
  const Confusion opposite = confusion(inv, a);
  CHECK(opposite.tp == 0);
  CHECK(opposite.tn == 0);
  BinaryMask bad = a;
  bad.pixels[0] = 2;
  CHECK_THROWS_AS(confusion(bad, a), InputError);
  CHECK_THROWS_AS(confusion(a, BinaryMask(4, 5)), ShapeError);
}

TEST_CASE("segmentation scores") {
  const auto s = segmentation_scores(Confusion{2, 1, 12, 1});
  CHECK(s.dice == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK(std::abs(s.dice - 0.6667) < 1e-4);
  CHECK(s.accuracy == 0.875);
  CHECK(s.sensitivity == 2.0 / 3.0);
  CHECK(s.specificity == 12.0 / 13.0);
  CHECK(s.iou_crack == 0.5);
  CHECK(s.iou_background == 12.0 / 14.0);

  BinaryMask g(3, 3);
  g.pixels = {0, 1, 1, 0, 0, 1, 0, 0, 0};
  const auto perfect = segmentation_scores(g, g);
  for (double v : {perfect.dice, perfect.accuracy, perfect.sensitivity, perfect.specificity, perfect.iou_crack,
                   perfect.iou_background}) {
    CHECK(v == 1.0);
  }
  const auto empty = segmentation_scores(BinaryMask(3, 3), BinaryMask(3, 3));
  CHECK(empty.sensitivity == 1.0);
  CHECK(empty.specificity == 1.0);
  CHECK(empty.dice == 1.0);
  // Crack predicted where there is none: the crack ratios fall to 0.
  BinaryMask one(3, 3);
  one.pixels[4] = 1;
  const auto spurious = segmentation_scores(one, BinaryMask(3, 3));
  CHECK(spurious.sensitivity == 0.0);
  CHECK(spurious.dice == 0.0);
  CHECK(selection_score(perfect) == 1.0);
}

TEST_CASE("sweep metrics match brute-force enumeration") {
  std::mt19937_64 rng(2024);
  const auto grid = default_thresholds();
  REQUIRE(grid.size() == 254);
  CHECK(grid.front() == 1.0 / 255);
  CHECK(grid.back() == 254.0 / 255);
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset d = random_dataset(rng);
    const PRCurve curve = pr_curve(d.preds, d.gts, grid);

    std::vector<double> P, R;
    double best_f = -1, best_t = 0;
    for (double t : grid) {
      Counts total;
      for (std::size_t i = 0; i < d.preds.size(); ++i) {
        const Counts c = count_at(d.preds[i], d.gts[i], t);
        total.tp += c.tp;
        total.fp += c.fp;
        total.tn += c.tn;
        total.fn += c.fn;
      }
      P.push_back(oracle_p(total));
      R.push_back(oracle_r(total));
      const double f = oracle_f(P.back(), R.back());
      if (f > best_f) {
        best_f = f;
        best_t = t;
      }
    }
    double ap = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) ap += (R[k] - (k + 1 < grid.size() ? R[k + 1] : 0.0)) * P[k];
    double ois_sum = 0;
    std::vector<double> per_best;
    for (std::size_t i = 0; i < d.preds.size(); ++i) {
      double bf = -1;
      for (double t : grid) {
        const Counts c = count_at(d.preds[i], d.gts[i], t);
        bf = std::max(bf, oracle_f(oracle_p(c), oracle_r(c)));
      }
      per_best.push_back(bf);
      ois_sum += bf;
    }

    for (std::size_t k = 0; k < grid.size(); ++k) {
      REQUIRE(std::abs(curve.precision[k] - P[k]) <= 1e-12);
      REQUIRE(std::abs(curve.recall[k] - R[k]) <= 1e-12);
      if (k > 0) REQUIRE(curve.recall[k] <= curve.recall[k - 1]);
    }
    const BestF o = ods(curve);
    REQUIRE(std::abs(o.f - best_f) <= 1e-12);
    REQUIRE(o.threshold == best_t);
    std::vector<PerImageBest> records;
    REQUIRE(std::abs(ois(d.preds, d.gts, grid, &records) - ois_sum / d.preds.size()) <= 1e-12);
    for (std::size_t i = 0; i < records.size(); ++i) REQUIRE(std::abs(records[i].best_f - per_best[i]) <= 1e-12);
    REQUIRE(std::abs(average_precision(curve) - ap) <= 1e-12);
    if (d.preds.size() == 1) REQUIRE(ois_sum >= best_f - 1e-15);
  }
}

TEST_CASE("hand-worked 2x2 curve") {
  const ProbabilityMap p = from_values(2, 2, {0.9, 0.6, 0.4, 0.1});
  const BinaryMask g = mask_from(2, 2, {1, 0, 1, 0});
  const std::vector<double> t{0.05, 0.5, 0.95};
  const PRCurve c = pr_curve(std::vector{p}, std::vector{g}, t);
  // t=0.05: everything positive; t=0.5: {0.9, 0.6}; t=0.95: nothing.
  CHECK(c.precision == std::vector<double>{0.5, 0.5, 1.0});
  CHECK(c.recall == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(average_precision(c) == doctest::Approx(0.5 * 0.5 + 0.5 * 0.5).epsilon(1e-15));
  CHECK(ods(c).f == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(ods(c).threshold == 0.05);
}

TEST_CASE("OIS uses each image's own peak") {
  // Image A separates at 0.3, image B at 0.7.
  const ProbabilityMap a = from_values(1, 4, {0.35, 0.32, 0.25, 0.1});
  const ProbabilityMap b = from_values(1, 4, {0.9, 0.75, 0.65, 0.5});
  const BinaryMask g = mask_from(1, 4, {1, 1, 0, 0});
  const std::vector<ProbabilityMap> preds{a, b};
  const std::vector<BinaryMask> gts{g, g};
  std::vector<PerImageBest> rec;
  CHECK(ois(preds, gts, default_thresholds(), &rec) == 1.0);
  CHECK(rec[0].best_t <= 0.32);
  CHECK(rec[0].best_t > 0.25);
  CHECK(rec[1].best_t > 0.65);
  CHECK(rec[1].best_t <= 0.75);
  CHECK(ods(pr_curve(preds, gts, default_thresholds())).f < 1.0);
}

TEST_CASE("perfect and degenerate predictions") {
  const BinaryMask g = mask_from(2, 3, {1, 0, 0, 1, 1, 0});
  const std::vector<ProbabilityMap> preds{ProbabilityMap::from_mask(g)};
  const std::vector<BinaryMask> gts{g};
  const PRCurve c = pr_curve(preds, gts, default_thresholds());
  for (std::size_t k = 0; k < c.thresholds.size(); ++k) {
    CHECK(c.precision[k] == 1.0);
    CHECK(c.recall[k] == 1.0);
  }
  const MetricsReport r = evaluate_dataset(preds, gts);
  for (double v : {r.ods, r.ois, r.ap, r.global_accuracy, r.mean_iou}) CHECK(v == 1.0);

  const BinaryMask all = mask_from(2, 2, {1, 1, 1, 1});
  const PRCurve half = pr_curve(std::vector{ProbabilityMap(2, 2, 0.5)}, std::vector{all}, default_thresholds());
  CHECK(average_precision(half) == 1.0);
  CHECK(half.recall.front() >= half.recall.back());

  CHECK_THROWS_AS(pr_curve(std::vector<ProbabilityMap>{}, std::vector<BinaryMask>{}, default_thresholds()), InputError);
  CHECK_THROWS_AS(evaluate_dataset(preds, std::vector<BinaryMask>{g, g}), InputError);
}

TEST_CASE("dataset evaluation equals a monolithic scorer and ignores image order") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    Dataset d = random_dataset(rng);
    const MetricsReport r = evaluate_dataset(d.preds, d.gts);
    // Monolithic: per-image Otsu, pooled counts.
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < d.preds.size(); ++i) {
      const auto& p = d.preds[i];
      Histogram h{};
      for (double v : p.values) ++h[std::clamp(static_cast<int>(std::ceil(v * 256)) - 1, 0, 255)];
      const int cut = otsu_oracle(h);
      const double thr = cut == 0 ? *std::max_element(p.values.begin(), p.values.end()) : cut / 256.0;
      for (std::size_t k = 0; k < p.values.size(); ++k) {
        const bool pos = p.values[k] > thr, gt = d.gts[i].pixels[k];
        tp += pos && gt;
        fp += pos && !gt;
        tn += !pos && !gt;
        fn += !pos && gt;
      }
    }
    const long n = tp + fp + tn + fn;
    const double iou_c = tp + fp + fn == 0 ? 1.0 : double(tp) / double(tp + fp + fn);
    const double iou_b = tn + fp + fn == 0 ? 1.0 : double(tn) / double(tn + fp + fn);
    CHECK(std::abs(r.global_accuracy - double(tp + tn) / double(n)) <= 1e-12);
    CHECK(std::abs(r.mean_iou - (iou_c + iou_b) / 2) <= 1e-12);

    Dataset shuffled = d;
    std::reverse(shuffled.preds.begin(), shuffled.preds.end());
    std::reverse(shuffled.gts.begin(), shuffled.gts.end());
    const MetricsReport s = evaluate_dataset(shuffled.preds, shuffled.gts);
    CHECK(s.ods == r.ods);
    CHECK(s.ap == r.ap);
    CHECK(std::abs(s.ois - r.ois) <= 1e-15);
    CHECK(s.global_accuracy == r.global_accuracy);
    CHECK(s.mean_iou == r.mean_iou);
  }
}

TEST_CASE("metrics.json and pr_curve.csv round-trip") {
  std::mt19937_64 rng(5);
  Dataset d = random_dataset(rng);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < d.preds.size(); ++i) ids.push_back("img" + std::to_string(i));
  const MetricsReport r = evaluate_dataset(d.preds, d.gts, ids);
  const MetricsReport back = metrics_from_json(metrics_to_json(r));
  CHECK(back.ods == r.ods);
  CHECK(back.ois == r.ois);
  CHECK(back.ap == r.ap);
  CHECK(back.global_accuracy == r.global_accuracy);
  CHECK(back.mean_iou == r.mean_iou);
  REQUIRE(back.per_image.size() == r.per_image.size());
  for (std::size_t i = 0; i < r.per_image.size(); ++i) {
    CHECK(back.per_image[i].id == ids[i]);
    CHECK(back.per_image[i].best_f == r.per_image[i].best_f);
    CHECK(back.per_image[i].best_t == r.per_image[i].best_t);
  }
  std::stringstream csv;
  write_pr_curve_csv(csv, r.curve);
  const PRCurve c = read_pr_curve_csv(csv);
  CHECK(c.thresholds == r.curve.thresholds);
  CHECK(c.precision == r.curve.precision);
  CHECK(c.recall == r.curve.recall);
  CHECK_THROWS_AS(metrics_from_json("{\"ods\": 1.0}"), InputError);
  std::stringstream bad("threshold,precision\n");
  CHECK_THROWS_AS(read_pr_curve_csv(bad), InputError);
}
