#include "crackgan/optimizer.hpp"

#include <cmath>

#include "crackgan/error.hpp"

namespace crackgan {

Adam::Adam(std::vector<NamedVar> parameters, AdamOptions options)
    : params_(std::move(parameters)), options_(options) {
  if (!(options_.lr >= 0)) throw ConfigError("train.lr must be >= 0");
  if (!(options_.beta1 >= 0 && options_.beta1 < 1)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(options_.beta2 >= 0 && options_.beta2 < 1)) throw ConfigError("train.beta2 must be in [0, 1)");
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& p = params_[k].var;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& value = p.mutable_value();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      value[i] -= options_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

}  // namespace crackgan
