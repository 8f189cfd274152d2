#include "crackgan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "crackgan/error.hpp"

namespace crackgan {

std::string to_string(LossTerm term) {
  switch (term) {
    case LossTerm::cgan:
      return "cgan";
    case LossTerm::kl:
      return "kl";
    case LossTerm::ce:
      return "ce";
    case LossTerm::side:
      return "side";
    case LossTerm::tversky:
      return "tversky";
  }
  return "unknown";
}

LossTerm parse_loss_term(const std::string& text) {
  for (LossTerm t : {LossTerm::cgan, LossTerm::kl, LossTerm::ce, LossTerm::side, LossTerm::tversky}) {
    if (to_string(t) == text) return t;
  }
  throw ConfigError("unknown loss term '" + text + "' (expected cgan, kl, ce, side, tversky)");
}

std::string to_string(GeneratorLossForm form) {
  return form == GeneratorLossForm::non_saturating ? "non_saturating" : "saturating";
}

GeneratorLossForm parse_generator_loss_form(const std::string& text) {
  if (text == "non_saturating") return GeneratorLossForm::non_saturating;
  if (text == "saturating") return GeneratorLossForm::saturating;
  throw ConfigError("unknown generator loss form '" + text + "' (expected non_saturating or saturating)");
}

std::string to_string(KlForm form) { return form == KlForm::as_printed ? "as_printed" : "bernoulli"; }

KlForm parse_kl_form(const std::string& text) {
  if (text == "as_printed") return KlForm::as_printed;
  if (text == "bernoulli") return KlForm::bernoulli;
  throw ConfigError("unknown kl form '" + text + "' (expected as_printed or bernoulli)");
}

void LossConfig::validate() const {
  if (!(alpha >= 0)) throw ConfigError("loss.alpha must be >= 0");
  if (!(beta >= 0)) throw ConfigError("loss.beta must be >= 0");
  if (!(gamma >= 0)) throw ConfigError("loss.gamma must be >= 0");
  if (!(beta_p >= 0)) throw ConfigError("loss.beta_p must be >= 0");
  if (!(eps > 0)) throw ConfigError("loss.eps must be > 0");
}

LossConfig LossConfig::without(std::initializer_list<LossTerm> terms) const {
  LossConfig c = *this;
  for (LossTerm t : terms) c.enabled.erase(t);
  return c;
}

void require_unit_interval(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw NumericError(std::string(what) + ": value " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " differ");
  }
}

namespace {

double floored_log(double x, double eps) { return std::log(std::max(x, eps)); }
// Derivative of floored_log; zero on the floor.
double floored_log_grad(double x, double eps) { return x > eps ? 1.0 / x : 0.0; }

}  // namespace

CganLosses cgan_losses(const Tensor& d_real, const Tensor& d_fake, double eps, GeneratorLossForm form) {
  require_unit_interval(d_real, "cgan_losses d_real");
  require_unit_interval(d_fake, "cgan_losses d_fake");
  if (d_real.empty() || d_fake.empty()) throw ShapeError("cgan_losses: empty discriminator output");
  CganLosses out;
  out.grad_d_real = Tensor::zeros_like(d_real);
  out.grad_d_fake = Tensor::zeros_like(d_fake);
  out.grad_g_fake = Tensor::zeros_like(d_fake);
  const double nr = static_cast<double>(d_real.size());
  const double nf = static_cast<double>(d_fake.size());

  double real_term = 0.0;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    real_term += floored_log(d_real[i], eps);
    out.grad_d_real[i] = -floored_log_grad(d_real[i], eps) / nr;
  }
  double fake_term = 0.0, gen_term = 0.0;
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double f = d_fake[i];
    fake_term += floored_log(1.0 - f, eps);
    out.grad_d_fake[i] = floored_log_grad(1.0 - f, eps) / nf;
    if (form == GeneratorLossForm::non_saturating) {
      gen_term -= floored_log(f, eps);
      out.grad_g_fake[i] = -floored_log_grad(f, eps) / nf;
    } else {
      gen_term += floored_log(1.0 - f, eps);
      out.grad_g_fake[i] = -floored_log_grad(1.0 - f, eps) / nf;
    }
  }
  out.loss_d = -real_term / nr - fake_term / nf;
  out.loss_g = gen_term / nf;
  return out;
}

LossGrad side_bce(const Tensor& pred, const Tensor& gt, double beta_p, double eps) {
  require_same_shape(pred, gt, "side_bce");
  if (pred.empty()) throw ShapeError("side_bce: empty prediction");
  LossGrad out{0.0, Tensor::zeros_like(pred)};
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    const double y = gt[i];
    sum += beta_p * y * floored_log(p, eps) + (1.0 - y) * floored_log(1.0 - p, eps);
    out.grad[i] = -(beta_p * y * floored_log_grad(p, eps) - (1.0 - y) * floored_log_grad(1.0 - p, eps)) / n;
  }
  out.value = -sum / n;
  return out;
}

SideNetworkLoss side_network_loss(std::span<const Tensor> sides, const Tensor& fused, const Tensor& gt,
                                  double beta_p, double eps) {
  if (sides.size() != 4) {
    throw ShapeError("side_network_loss: expected 4 side maps, got " + std::to_string(sides.size()));
  }
  SideNetworkLoss out;
  for (std::size_t i = 0; i < sides.size(); ++i) {
    LossGrad l = side_bce(sides[i], gt, beta_p, eps);
    out.value += l.value;
    out.side_grads[i] = std::move(l.grad);
  }
  LossGrad f = side_bce(fused, gt, beta_p, eps);
  out.value += f.value;
  out.fused_grad = std::move(f.grad);
  return out;
}

LossGrad tversky_loss(const Tensor& pred, const Tensor& gt, double alpha, double beta, double eps) {
  require_same_shape(pred, gt, "tversky_loss");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] * gt[i];
    fp += pred[i] * (1.0 - gt[i]);
    fn += (1.0 - pred[i]) * gt[i];
  }
  const double num = tp + eps;
  const double den = tp + alpha * fp + beta * fn + eps;
  LossGrad out{1.0 - num / den, Tensor::zeros_like(pred)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double g = gt[i];
    const double dden = g + alpha * (1.0 - g) - beta * g;
    out.grad[i] = -(g * den - num * dden) / (den * den);
  }
  return out;
}

double total_generator_loss(const GeneratorLossParts& parts, const LossConfig& config) {
  auto term = [&](LossTerm t, const std::optional<double>& v) -> double {
    if (!config.has(t)) return 0.0;
    if (!v) throw ConfigError("loss term '" + to_string(t) + "' is enabled in loss.enabled but was not computed");
    return *v;
  };
  return config.gamma * term(LossTerm::cgan, parts.cgan_g) + term(LossTerm::kl, parts.kl) +
         term(LossTerm::ce, parts.ce) + term(LossTerm::side, parts.side) + term(LossTerm::tversky, parts.tversky);
}

}  // namespace crackgan
