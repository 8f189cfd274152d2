#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <array>

#include "crackgan/tensor.hpp"

namespace crackgan {

// Loss value together with its gradient w.r.t. the prediction argument.
struct LossGrad {
  double value = 0.0;
  Tensor grad;
};

enum class LossTerm { cgan, kl, ce, side, tversky };

std::string to_string(LossTerm term);
LossTerm parse_loss_term(const std::string& text);

// Generator-side adversarial objective.
enum class GeneratorLossForm {
  non_saturating,  // -mean(log D(x, G(x)))
  saturating,      // mean(log(1 - D(x, G(x)))), the literal min-max form
};

enum class KlForm {
  as_printed,  // sum p log(p/q) on raw sigmoid outputs
  bernoulli,   // adds the (1-p) log((1-p)/(1-q)) complement term
};

std::string to_string(GeneratorLossForm form);
GeneratorLossForm parse_generator_loss_form(const std::string& text);
std::string to_string(KlForm form);
KlForm parse_kl_form(const std::string& text);

struct LossConfig {
  double alpha = 0.3;  // Tversky false-positive weight
  double beta = 0.7;   // Tversky false-negative weight
  double gamma = 0.25; // weight of the adversarial term in the generator objective
  double beta_p = 1.0; // positive-class weight of the side BCE
  double eps = 1e-7;
  std::set<LossTerm> enabled{LossTerm::cgan, LossTerm::kl, LossTerm::ce, LossTerm::side, LossTerm::tversky};
  GeneratorLossForm generator_form = GeneratorLossForm::non_saturating;
  KlForm kl_form = KlForm::as_printed;

  void validate() const;
  bool has(LossTerm term) const { return enabled.count(term) != 0; }

  // Same configuration with the given terms switched off.
  LossConfig without(std::initializer_list<LossTerm> terms) const;
};

struct CganLosses {
  double loss_d = 0.0;
  Tensor grad_d_real;  // d loss_d / d d_real
  Tensor grad_d_fake;  // d loss_d / d d_fake
  double loss_g = 0.0;
  Tensor grad_g_fake;  // d loss_g / d d_fake
};

// Discriminator and generator adversarial losses. Maps or scalar scores are
// reduced by their mean; logs are floored at eps.
CganLosses cgan_losses(const Tensor& d_real, const Tensor& d_fake, double eps,
                       GeneratorLossForm form = GeneratorLossForm::non_saturating);

// -(1/N) Σ [beta_p y log p + (1 - y) log(1 - p)], logs floored at eps.
LossGrad side_bce(const Tensor& pred, const Tensor& gt, double beta_p, double eps);

struct SideNetworkLoss {
  double value = 0.0;
  std::array<Tensor, 4> side_grads;
  Tensor fused_grad;
};

// Sum of side_bce over the four side maps and the fused map.
SideNetworkLoss side_network_loss(std::span<const Tensor> sides, const Tensor& fused, const Tensor& gt,
                                  double beta_p, double eps);

// 1 - TI with TI = (Σpg + eps) / (Σpg + α Σp(1-g) + β Σ(1-p)g + eps).
LossGrad tversky_loss(const Tensor& pred, const Tensor& gt, double alpha, double beta, double eps);

struct GeneratorLossParts {
  std::optional<double> cgan_g;
  std::optional<double> kl;
  std::optional<double> ce;
  std::optional<double> side;
  std::optional<double> tversky;
};

// γ·L_cGAN + L_KL + L_CE + L_Side + L_TL over the enabled terms. Throws
// ConfigError when an enabled term has no value.
double total_generator_loss(const GeneratorLossParts& parts, const LossConfig& config);

// Throws NumericError unless every entry lies in [0, 1].
void require_unit_interval(const Tensor& t, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace crackgan
