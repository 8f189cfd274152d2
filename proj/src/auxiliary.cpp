#include "crackgan/auxiliary.hpp"

#include <algorithm>
#include <cmath>

#include "crackgan/error.hpp"

namespace crackgan {

std::unique_ptr<PixelDiscriminator> make_auxiliary(const AuxiliarySpec& spec) {
  DiscriminatorSpec d;
  d.kind = DiscriminatorKind::pixel;
  d.in_channels = 1;
  d.base_width = spec.base_width;
  d.leaky_slope = spec.leaky_slope;
  d.seed = spec.seed;
  return std::make_unique<PixelDiscriminator>(d, "auxiliary");
}

PairLossGrad kl_perceptual_loss(const Tensor& p, const Tensor& q, double eps, KlForm form) {
  require_same_shape(p, q, "kl_perceptual_loss");
  if (p.empty()) throw ShapeError("kl_perceptual_loss: empty input");
  if (eps < 0) throw ConfigError("kl_perceptual_loss: eps must be >= 0");
  const double batch = p.rank() > 0 ? p.dim(0) : 1;
  PairLossGrad out{0.0, Tensor::zeros_like(p), Tensor::zeros_like(q)};
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    const double qi = q[i];
    sum += pi * std::log((pi + eps) / (qi + eps));
    double gp = std::log((pi + eps) / (qi + eps)) + pi / (pi + eps);
    double gq = -pi / (qi + eps);
    if (form == KlForm::bernoulli) {
      const double a = 1.0 - pi;
      const double b = 1.0 - qi;
      sum += a * std::log((a + eps) / (b + eps));
      gp += -std::log((a + eps) / (b + eps)) - a / (a + eps);
      gq += a / (b + eps);
    }
    out.grad_target[i] = gp / batch;
    out.grad_generated[i] = gq / batch;
  }
  out.value = sum / batch;
  return out;
}

PairLossGrad reconstruction_loss(const Tensor& p, const Tensor& q, double eps) {
  require_same_shape(p, q, "reconstruction_loss");
  if (p.empty()) throw ShapeError("reconstruction_loss: empty input");
  const double n = static_cast<double>(p.size());
  const double cap = 1.0 - eps;
  PairLossGrad out{0.0, Tensor::zeros_like(p), Tensor::zeros_like(q)};
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = p[i] - q[i];
    const double a = std::abs(diff);
    if (a < cap) {
      sum -= std::log1p(-a);
      const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      out.grad_target[i] = sign / (1.0 - a) / n;
      out.grad_generated[i] = -sign / (1.0 - a) / n;
    } else {
      sum -= std::log1p(-cap);
    }
  }
  out.value = sum / n;
  return out;
}

}  // namespace crackgan
