#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crackgan/autograd.hpp"
#include "crackgan/manifest.hpp"
#include "crackgan/ops.hpp"

namespace crackgan {

using Rng = std::mt19937_64;

struct NamedVar {
  std::string name;
  Var var;
};

// Owns the trainable parameters and the non-trainable buffers (batch-norm
// running statistics) of one network, in registration order.
class ParameterStore {
 public:
  Var add_parameter(const std::string& name, Tensor init);
  Var add_buffer(const std::string& name, Tensor init);

  const std::vector<NamedVar>& parameters() const noexcept { return parameters_; }
  const std::vector<NamedVar>& buffers() const noexcept { return buffers_; }
  std::int64_t parameter_count() const;

  void zero_grad();
  void set_requires_grad(bool on);

 private:
  void check_unique(const std::string& name) const;

  std::vector<NamedVar> parameters_;
  std::vector<NamedVar> buffers_;
};

// He-normal initialised weight tensor.
Tensor he_normal(Shape shape, int fan_in, Rng& rng);

struct Conv2d {
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, int in_channels, int out_channels, int kernel, Rng& rng);

  Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, kernel / 2); }
  LayerRecord record(const std::string& role, int out_h, int out_w) const;

  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  Var weight, bias;
};

struct BatchNorm2d {
  BatchNorm2d() = default;
  BatchNorm2d(ParameterStore& store, const std::string& name, int channels);

  Var operator()(const Var& x, bool training) const;
  LayerRecord record(const std::string& role, int out_h, int out_w) const;

  std::string name;
  int channels = 0;
  Var gamma, beta;
  Var running_mean, running_var;  // buffers
};

struct Linear {
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in_features, int out_features, Rng& rng);

  Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
  LayerRecord record(const std::string& role, std::int64_t repeat = 1) const;

  std::string name;
  int in_features = 0;
  int out_features = 0;
  Var weight, bias;
};

// conv 3×3 -> batch norm -> ReLU.
struct ConvBnRelu {
  ConvBnRelu() = default;
  ConvBnRelu(ParameterStore& store, const std::string& name, int in_channels, int out_channels, Rng& rng);

  Var operator()(const Var& x, bool training) const;
  void append_records(LayerManifest& m, const std::string& role, int out_h, int out_w) const;

  Conv2d conv;
  BatchNorm2d bn;
};

LayerRecord elementwise_record(const std::string& name, LayerKind kind, const std::string& role, int channels,
                               int out_h, int out_w, std::int64_t repeat = 1);

// Common surface of the generator, discriminators and auxiliary network.
class Network {
 public:
  virtual ~Network() = default;

  ParameterStore& store() noexcept { return store_; }
  const ParameterStore& store() const noexcept { return store_; }
  bool training() const noexcept { return training_; }
  void set_training(bool on) noexcept { training_ = on; }

  // Layer table for a single input of the given spatial size.
  virtual LayerManifest manifest(int height, int width) const = 0;

 protected:
  ParameterStore store_;
  bool training_ = true;
};

}  // namespace crackgan
