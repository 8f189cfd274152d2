#include "crackgan/layers.hpp"

#include <cmath>

#include "crackgan/error.hpp"

namespace crackgan {

void ParameterStore::check_unique(const std::string& name) const {
  for (const auto* list : {&parameters_, &buffers_}) {
    for (const auto& nv : *list) {
      if (nv.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
    }
  }
}

Var ParameterStore::add_parameter(const std::string& name, Tensor init) {
  check_unique(name);
  Var v = Var::leaf(std::move(init), true);
  parameters_.push_back({name, v});
  return v;
}

Var ParameterStore::add_buffer(const std::string& name, Tensor init) {
  check_unique(name);
  Var v = Var::leaf(std::move(init), false);
  buffers_.push_back({name, v});
  return v;
}

std::int64_t ParameterStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters_) n += static_cast<std::int64_t>(p.var.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : parameters_) p.var.zero_grad();
}

void ParameterStore::set_requires_grad(bool on) {
  for (auto& p : parameters_) p.var.set_requires_grad(on);
}

Tensor he_normal(Shape shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name_, int in, int out, int k, Rng& rng)
    : name(name_), in_channels(in), out_channels(out), kernel(k) {
  if (in <= 0 || out <= 0 || k <= 0 || k % 2 == 0) {
    throw ConfigError("conv '" + name + "': invalid geometry " + std::to_string(in) + "->" + std::to_string(out) +
                      " k=" + std::to_string(k));
  }
  weight = store.add_parameter(name + ".weight", he_normal({out, in, k, k}, in * k * k, rng));
  bias = store.add_parameter(name + ".bias", Tensor({out}));
}

LayerRecord Conv2d::record(const std::string& role, int out_h, int out_w) const {
  LayerRecord r;
  r.name = name;
  r.kind = LayerKind::conv;
  r.role = role;
  r.in_channels = in_channels;
  r.out_channels = out_channels;
  r.kernel = kernel;
  r.out_h = out_h;
  r.out_w = out_w;
  r.params = static_cast<std::int64_t>(out_channels) * in_channels * kernel * kernel + out_channels;
  return r;
}

BatchNorm2d::BatchNorm2d(ParameterStore& store, const std::string& name_, int c) : name(name_), channels(c) {
  gamma = store.add_parameter(name + ".gamma", Tensor({c}, 1.0));
  beta = store.add_parameter(name + ".beta", Tensor({c}));
  running_mean = store.add_buffer(name + ".running_mean", Tensor({c}));
  running_var = store.add_buffer(name + ".running_var", Tensor({c}, 1.0));
}

Var BatchNorm2d::operator()(const Var& x, bool training) const {
  ops::BatchNormOptions options;
  options.training = training;
  // Buffers are shared nodes; the op mutates their values in place.
  Var mean = running_mean;
  Var var = running_var;
  return ops::batch_norm(x, gamma, beta, mean.mutable_value(), var.mutable_value(), options);
}

LayerRecord BatchNorm2d::record(const std::string& role, int out_h, int out_w) const {
  LayerRecord r = elementwise_record(name, LayerKind::batch_norm, role, channels, out_h, out_w);
  r.params = 2 * static_cast<std::int64_t>(channels);
  return r;
}

Linear::Linear(ParameterStore& store, const std::string& name_, int in, int out, Rng& rng)
    : name(name_), in_features(in), out_features(out) {
  if (in <= 0 || out <= 0) throw ConfigError("linear '" + name + "': invalid geometry");
  weight = store.add_parameter(name + ".weight", he_normal({out, in}, in, rng));
  bias = store.add_parameter(name + ".bias", Tensor({out}));
}

LayerRecord Linear::record(const std::string& role, std::int64_t repeat) const {
  LayerRecord r;
  r.name = name;
  r.kind = LayerKind::linear;
  r.role = role;
  r.in_channels = in_features;
  r.out_channels = out_features;
  r.out_h = 1;
  r.out_w = 1;
  r.params = static_cast<std::int64_t>(in_features) * out_features + out_features;
  r.repeat = repeat;
  return r;
}

ConvBnRelu::ConvBnRelu(ParameterStore& store, const std::string& name, int in, int out, Rng& rng)
    : conv(store, name + ".conv", in, out, 3, rng), bn(store, name + ".bn", out) {}

Var ConvBnRelu::operator()(const Var& x, bool training) const { return ops::relu(bn(conv(x), training)); }

void ConvBnRelu::append_records(LayerManifest& m, const std::string& role, int out_h, int out_w) const {
  m.layers.push_back(conv.record(role, out_h, out_w));
  m.layers.push_back(bn.record(role, out_h, out_w));
  m.layers.push_back(
      elementwise_record(conv.name.substr(0, conv.name.size() - 5) + ".relu", LayerKind::activation, role,
                         conv.out_channels, out_h, out_w));
}

LayerRecord elementwise_record(const std::string& name, LayerKind kind, const std::string& role, int channels,
                               int out_h, int out_w, std::int64_t repeat) {
  LayerRecord r;
  r.name = name;
  r.kind = kind;
  r.role = role;
  r.in_channels = channels;
  r.out_channels = channels;
  r.out_h = out_h;
  r.out_w = out_w;
  r.repeat = repeat;
  return r;
}

}  // namespace crackgan
