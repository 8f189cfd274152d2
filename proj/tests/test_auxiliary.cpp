#include <doctest.h>

#include <cmath>
#include <numbers>

#include "crackgan/auxiliary.hpp"
#include "crackgan/error.hpp"
#include "support.hpp"

using namespace crackgan;
using testing::scalar_grad_error;
using testing::uniform;

namespace {

Tensor one(double v) { return Tensor({1, 1, 1, 1}, v); }

}  // namespace

TEST_CASE("KL perceptual loss: worked values") {
  std::mt19937_64 rng(1);
  const Tensor p = uniform({2, 1, 4, 4}, rng, 0.01, 0.99);
  CHECK(kl_perceptual_loss(p, p, 1e-7).value == 0.0);
  const double a = kl_perceptual_loss(one(0.5), one(0.25), 1e-15).value;
  CHECK(std::abs(a - 0.5 * std::numbers::ln2) <= 1e-9);
  CHECK(std::abs(a - 0.346574) < 1e-6);
  const double b = kl_perceptual_loss(one(0.25), one(0.5), 1e-15).value;
  CHECK(std::abs(b - 0.25 * std::log(0.5)) <= 1e-9);
  CHECK(b < 0);
}

TEST_CASE("KL perceptual loss sums pixels and averages the batch") {
  std::mt19937_64 rng(2);
  const Tensor p = uniform({3, 1, 2, 2}, rng, 0.05, 0.95), q = uniform({3, 1, 2, 2}, rng, 0.05, 0.95);
  double expect = 0;
  for (std::size_t i = 0; i < p.size(); ++i) expect += p[i] * std::log((p[i] + 1e-7) / (q[i] + 1e-7));
  CHECK(kl_perceptual_loss(p, q, 1e-7).value == doctest::Approx(expect / 3).epsilon(1e-12));
  double bern = expect;
  for (std::size_t i = 0; i < p.size(); ++i) bern += (1 - p[i]) * std::log((1 - p[i] + 1e-7) / (1 - q[i] + 1e-7));
  CHECK(kl_perceptual_loss(p, q, 1e-7, KlForm::bernoulli).value == doctest::Approx(bern / 3).epsilon(1e-12));
  CHECK_THROWS_AS(kl_perceptual_loss(p, Tensor({3, 1, 2, 3}, 0.5), 1e-7), ShapeError);
}

TEST_CASE("reconstruction loss: worked values, clamp and monotonicity") {
  std::mt19937_64 rng(3);
  const Tensor p = uniform({1, 1, 4, 4}, rng, 0, 1);
  CHECK(reconstruction_loss(p, p, 1e-7).value == 0.0);
  CHECK(std::abs(reconstruction_loss(one(0.75), one(0.25), 1e-7).value - std::numbers::ln2) <= 1e-9);
  const double edge = reconstruction_loss(one(1.0), one(0.0), 1e-7).value;
  CHECK(std::isfinite(edge));
  CHECK(edge == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  double previous = -1;
  for (int k = 0; k <= 100; ++k) {
    const double v = reconstruction_loss(one(0.0), one(k / 100.0), 1e-7).value;
    CHECK(v >= 0);
    CHECK(v >= previous);
    previous = v;
  }
}

TEST_CASE("auxiliary loss gradients match central differences") {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor p = uniform({1, 1, 8, 8}, rng, 0.02, 0.98);
    Tensor q = uniform({1, 1, 8, 8}, rng, 0.02, 0.98);
    // Keep |p - q| away from the kink of the absolute value.
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (std::abs(p[i] - q[i]) < 1e-3) q[i] = p[i] < 0.5 ? p[i] + 0.01 : p[i] - 0.01;
    }
    for (KlForm form : {KlForm::as_printed, KlForm::bernoulli}) {
      const auto kl = kl_perceptual_loss(p, q, 1e-7, form);
      worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return kl_perceptual_loss(t, q, 1e-7, form).value; },
                                                p, kl.grad_target));
      worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return kl_perceptual_loss(p, t, 1e-7, form).value; },
                                                q, kl.grad_generated));
    }
    const auto rl = reconstruction_loss(p, q, 1e-7);
    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return reconstruction_loss(t, q, 1e-7).value; }, p,
                                              rl.grad_target));
    worst = std::max(worst, scalar_grad_error([&](const Tensor& t) { return reconstruction_loss(p, t, 1e-7).value; }, q,
                                              rl.grad_generated));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("auxiliary network maps a single-channel map to a same-shaped probability map") {
  AuxiliarySpec spec;
  spec.base_width = 8;
  auto phi = make_auxiliary(spec);
  std::mt19937_64 rng(4);
  const Tensor y = uniform({2, 1, 12, 10}, rng, 0, 1);
  NoGradGuard guard;
  const Tensor a = phi->forward(Var::constant(y)).value();
  const Tensor b = phi->forward(Var::constant(y)).value();
  CHECK(a.shape() == y.shape());
  CHECK(a == b);
  for (double v : a.values()) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
  CHECK_THROWS_AS(phi->forward(Var::constant(Tensor({1, 3, 8, 8}))), ShapeError);
  CHECK(phi->manifest(16, 16).network == "auxiliary");
}
