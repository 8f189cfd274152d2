#include <doctest.h>

#include <cmath>
#include <numbers>

#include "crackgan/error.hpp"
#include "crackgan/losses.hpp"
#include "support.hpp"

using namespace crackgan;
using testing::binary;
using testing::scalar_grad_error;
using testing::uniform;

namespace {

const double kLn2 = std::numbers::ln2;

Tensor flat(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({1, 1, 1, n}, std::move(v));
}

// Independent elementwise BCE with beta_p = 1.
double plain_bce(const Tensor& p, const Tensor& y) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += y[i] ? -std::log(p[i]) : -std::log(1 - p[i]);
  return s / static_cast<double>(p.size());
}

double tversky_oracle(const Tensor& p, const Tensor& g, double a, double b, double eps) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    tp += p[i] * g[i];
    fp += p[i] * (1 - g[i]);
    fn += (1 - p[i]) * g[i];
  }
  return 1 - (tp + eps) / (tp + a * fp + b * fn + eps);
}

Tensor complement(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = 1 - v;
  return out;
}

}  // namespace

TEST_CASE("adversarial losses: worked values") {
  const auto perfect = cgan_losses(Tensor({1}, 1.0), Tensor({1}, 0.0), 1e-7);
  CHECK(perfect.loss_d == 0.0);
  const auto saddle = cgan_losses(Tensor({1}, 0.5), Tensor({1}, 0.5), 1e-7);
  CHECK(std::abs(saddle.loss_d - 2 * kLn2) <= 1e-9);
  CHECK(std::abs(saddle.loss_g - kLn2) <= 1e-9);
  const auto sat = cgan_losses(Tensor({1}, 0.5), Tensor({1}, 0.5), 1e-7, GeneratorLossForm::saturating);
  CHECK(std::abs(sat.loss_g + kLn2) <= 1e-9);
  CHECK(std::abs(2 * kLn2 - 1.386294) < 1e-6);
}

TEST_CASE("adversarial losses reduce pixel maps by their mean") {
  std::mt19937_64 rng(1);
  const Tensor r = uniform({2, 1, 3, 3}, rng, 0.05, 0.95), f = uniform({2, 1, 3, 3}, rng, 0.05, 0.95);
  double expect = 0;
  for (std::size_t i = 0; i < r.size(); ++i) expect -= (std::log(r[i]) + std::log(1 - f[i])) / 18.0;
  CHECK(cgan_losses(r, f, 1e-7).loss_d == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adversarial losses reject scores outside the unit interval") {
  CHECK_THROWS_AS(cgan_losses(Tensor({1}, 1.2), Tensor({1}, 0.5), 1e-7), NumericError);
  CHECK_THROWS_AS(cgan_losses(Tensor({1}, 0.5), Tensor({1}, std::nan("")), 1e-7), NumericError);
}

TEST_CASE("side BCE: worked values and plain-BCE oracle") {
  std::mt19937_64 rng(2);
  const Tensor gt = binary({1, 1, 4, 4}, rng);
  CHECK(std::abs(side_bce(Tensor({1, 1, 4, 4}, 0.5), gt, 1.0, 1e-7).value - kLn2) <= 1e-9);
  const double two = side_bce(flat({0.9, 0.2}), flat({1, 0}), 1.0, 1e-7).value;
  CHECK(std::abs(two - (-std::log(0.9) - std::log(0.8)) / 2) <= 1e-9);
  CHECK(std::abs(two - 0.164252) < 1e-6);
  for (int s = 0; s < 20; ++s) {
    const Tensor p = uniform({1, 1, 8, 8}, rng, 0.01, 0.99), y = binary({1, 1, 8, 8}, rng);
    CHECK(std::abs(side_bce(p, y, 1.0, 1e-7).value - plain_bce(p, y)) <= 1e-10);
  }
  CHECK_THROWS_AS(side_bce(Tensor({1, 1, 2, 2}, 0.5), Tensor({1, 1, 2, 3}), 1.0, 1e-7), ShapeError);
}

TEST_CASE("side-network loss composes five BCE terms") {
  std::mt19937_64 rng(3);
  const Tensor gt = binary({1, 1, 8, 8}, rng);
  std::vector<Tensor> half(4, Tensor({1, 1, 8, 8}, 0.5));
  CHECK(std::abs(side_network_loss(half, half[0], gt, 1.0, 1e-7).value - 5 * kLn2) <= 1e-9);

  const double eps = 1e-7;
  Tensor perfect = gt;
  for (double& v : perfect.values()) v = v ? 1 - eps : eps;
  std::vector<Tensor> perfect_sides(4, perfect);
  CHECK(side_network_loss(perfect_sides, perfect, gt, 1.0, eps).value < 1e-5);

  std::vector<Tensor> sides;
  double expect = 0;
  for (int i = 0; i < 4; ++i) {
    sides.push_back(uniform({1, 1, 8, 8}, rng, 0.01, 0.99));
    expect += side_bce(sides.back(), gt, 1.0, eps).value;
  }
  const Tensor fused = uniform({1, 1, 8, 8}, rng, 0.01, 0.99);
  expect += side_bce(fused, gt, 1.0, eps).value;
  CHECK(side_network_loss(sides, fused, gt, 1.0, eps).value == doctest::Approx(expect).epsilon(1e-14));

  std::vector<Tensor> three(3, half[0]);
  CHECK_THROWS_AS(side_network_loss(three, half[0], gt, 1.0, eps), ShapeError);
}

TEST_CASE("Tversky loss: worked values") {
  std::mt19937_64 rng(4);
  Tensor g({1, 1, 5, 5});
  for (int i = 0; i < 10; ++i) g[i * 2] = 1;
  CHECK(tversky_loss(g, g, 0.3, 0.7, 1e-7).value == 0.0);
  const double all_zero = tversky_loss(Tensor({1, 1, 5, 5}), g, 0.3, 0.7, 1.0).value;
  CHECK(std::abs(all_zero - 0.875) <= 1e-9);
  for (int s = 0; s < 50; ++s) {
    const Tensor p = uniform({1, 1, 6, 6}, rng, 0, 1), y = binary({1, 1, 6, 6}, rng);
    const double v = tversky_loss(p, y, 0.3, 0.7, 1e-7).value;
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(std::abs(v - tversky_oracle(p, y, 0.3, 0.7, 1e-7)) <= 1e-12);
  }
}

TEST_CASE("Tversky role swap exchanges the error weights and the true-positive mass") {
  std::mt19937_64 rng(5);
  for (int s = 0; s < 50; ++s) {
    const Tensor p = uniform({1, 1, 6, 6}, rng, 0, 1), y = binary({1, 1, 6, 6}, rng);
    const double swapped = tversky_loss(complement(p), complement(y), 0.7, 0.3, 1e-7).value;
    // Same false-positive and false-negative masses, true positives become Σ(1-p)(1-g).
    double tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tn += (1 - p[i]) * (1 - y[i]);
      fp += p[i] * (1 - y[i]);
      fn += (1 - p[i]) * y[i];
    }
    CHECK(std::abs(swapped - (1 - (tn + 1e-7) / (tn + 0.3 * fp + 0.7 * fn + 1e-7))) <= 1e-12);
  }
  // With balanced foreground and background mass the two sides agree.
  const Tensor p = flat({0.8, 0.3, 0.7, 0.2}), y = flat({1, 1, 0, 0});
  CHECK(std::abs(tversky_loss(p, y, 0.3, 0.7, 1e-7).value -
                 tversky_loss(complement(p), complement(y), 0.7, 0.3, 1e-7).value) <= 1e-12);
}

TEST_CASE("total generator loss") {
  LossConfig all;
  GeneratorLossParts ones{1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(total_generator_loss(ones, all) == doctest::Approx(4.25).epsilon(1e-15));
  const LossConfig only_tl = all.without({LossTerm::cgan, LossTerm::kl, LossTerm::ce, LossTerm::side});
  GeneratorLossParts tl;
  tl.tversky = 0.37;
  CHECK(total_generator_loss(tl, only_tl) == 0.37);
  CHECK_THROWS_AS(total_generator_loss(tl, all), ConfigError);
  const LossConfig no_side = all.without({LossTerm::side});
  const LossConfig no_side_tl = all.without({LossTerm::side, LossTerm::tversky});
  CHECK_FALSE(no_side.has(LossTerm::side));
  CHECK(no_side.has(LossTerm::tversky));
  CHECK_FALSE(no_side_tl.has(LossTerm::tversky));
  CHECK(total_generator_loss(ones, no_side_tl) == doctest::Approx(2.25).epsilon(1e-15));
}

TEST_CASE("loss configuration defaults and validation") {
  LossConfig c;
  CHECK(c.alpha == 0.3);
  CHECK(c.beta == 0.7);
  CHECK(c.gamma == 0.25);
  CHECK(c.beta_p == 1.0);
  c.eps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_loss_term("dice"), ConfigError);
}

TEST_CASE("loss gradients match central differences") {
  const double eps = 1e-7;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor a = uniform({1, 1, 8, 8}, rng, 0.02, 0.98), b = uniform({1, 1, 8, 8}, rng, 0.02, 0.98);
    const Tensor y = binary({1, 1, 8, 8}, rng);

    const auto cg = cgan_losses(a, b, eps);
    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return cgan_losses(t, b, eps).loss_d; }, a,
                                              cg.grad_d_real));
    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return cgan_losses(a, t, eps).loss_d; }, b,
                                              cg.grad_d_fake));
    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return cgan_losses(a, t, eps).loss_g; }, b,
                                              cg.grad_g_fake));

    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return side_bce(t, y, 1.0, eps).value; }, a,
                                              side_bce(a, y, 1.0, eps).grad));

    std::vector<Tensor> sides{a, b, uniform({1, 1, 8, 8}, rng, 0.02, 0.98), uniform({1, 1, 8, 8}, rng, 0.02, 0.98)};
    const Tensor fused = uniform({1, 1, 8, 8}, rng, 0.02, 0.98);
    const auto sn = side_network_loss(sides, fused, y, 1.0, eps);
    for (int i = 0; i < 4; ++i) {
      auto f = [&](const Tensor& t) {
        auto s = sides;
        s[i] = t;
        return side_network_loss(s, fused, y, 1.0, eps).value;
      };
      worst = std::max(worst, scalar_grad_error(f, sides[i], sn.side_grads[i]));
    }
    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return side_network_loss(sides, t, y, 1.0, eps).value; },
                                              fused, sn.fused_grad));

    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return tversky_loss(t, y, 0.3, 0.7, eps).value; },
                                              a, tversky_loss(a, y, 0.3, 0.7, eps).grad));
  }
  CHECK(worst <= 1e-6);
}
