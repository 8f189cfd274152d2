#pragma once

#include <cstdint>
#include <memory>

#include "crackgan/discriminators.hpp"
#include "crackgan/losses.hpp"

namespace crackgan {

struct AuxiliarySpec {
  int base_width = 64;
  double leaky_slope = 0.2;
  std::uint64_t seed = 2;
};

// Stage-II network: the pixel-discriminator topology on a single-channel
// map (ground truth or generated probability map).
std::unique_ptr<PixelDiscriminator> make_auxiliary(const AuxiliarySpec& spec);

// Loss value and gradients w.r.t. both auxiliary outputs.
struct PairLossGrad {
  double value = 0.0;
  Tensor grad_target;     // w.r.t. phi(Y)
  Tensor grad_generated;  // w.r.t. phi(Ŷ)
};

// Σ p log((p + eps) / (q + eps)) over all elements divided by the batch size
// (first dimension), with p = phi(Y), q = phi(Ŷ). The bernoulli form adds
// (1 - p) log((1 - p + eps) / (1 - q + eps)).
PairLossGrad kl_perceptual_loss(const Tensor& phi_target, const Tensor& phi_generated, double eps,
                                KlForm form = KlForm::as_printed);

// mean over elements of -log(1 - min(|p - q|, 1 - eps)): binary cross-entropy
// of the absolute difference against an all-zero target.
PairLossGrad reconstruction_loss(const Tensor& phi_target, const Tensor& phi_generated, double eps);

}  // namespace crackgan
