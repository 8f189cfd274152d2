#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "crackgan/autograd.hpp"
#include "crackgan/layers.hpp"
#include "crackgan/tensor.hpp"

namespace testing {

using crackgan::Shape;
using crackgan::Tensor;
using crackgan::Var;

inline Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = d(rng);
  return t;
}

inline Tensor binary(Shape shape, std::mt19937_64& rng, double p = 0.3) {
  std::bernoulli_distribution d(p);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = d(rng) ? 1.0 : 0.0;
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Worst |analytic - numeric| / max(|analytic| + |numeric|, floor) over the
// elements of `x`, for a scalar function of `x`. The numeric derivative is
// Richardson-extrapolated central differences (error O(h^4)).
inline double scalar_grad_error(const std::function<double(const Tensor&)>& f, const Tensor& x, const Tensor& grad,
                                double h = 1e-4, double floor = 1e-7) {
  double worst = 0.0;
  Tensor probe = x;
  auto central = [&](std::size_t i, double step) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    return (up - down) / (2 * step);
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double numeric = (4 * central(i, h / 2) - central(i, h)) / 3;
    const double err = std::abs(grad[i] - numeric) / std::max(std::abs(grad[i]) + std::abs(numeric), floor);
    worst = std::max(worst, err);
  }
  return worst;
}

// Gradient check for a graph op: projects the output on a fixed random
// tensor R and compares the autograd gradient of every input against
// central differences of <R, f(inputs)>.
inline double graph_grad_error(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Tensor> inputs,
                               std::uint64_t seed, double h = 1e-5, double floor = 1e-6) {
  std::mt19937_64 rng(seed);
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(Var::leaf(t, true));
  const Var out = f(leaves);
  const Tensor r = uniform(out.value().shape(), rng);
  crackgan::backward(out, r);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = leaves[k].grad().empty() ? Tensor::zeros_like(inputs[k]) : leaves[k].grad();
    auto value = [&](const Tensor& probe) {
      crackgan::NoGradGuard guard;
      std::vector<Var> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) vars.push_back(Var::constant(j == k ? probe : inputs[j]));
      return dot(f(vars).value(), r);
    };
    worst = std::max(worst, scalar_grad_error(value, inputs[k], analytic, h, floor));
  }
  return worst;
}

// Gradient check over network parameters: autograd gradient of <R, f()>
// against central differences for `probes` randomly chosen parameter
// entries (all entries when probes <= 0).
inline double param_grad_error(const crackgan::ParameterStore& store, const std::function<Var()>& f,
                               std::uint64_t seed, int probes = 0, double h = 1e-5, double floor = 1e-6) {
  std::mt19937_64 rng(seed);
  const Var out = f();
  const Tensor r = uniform(out.value().shape(), rng);
  for (const auto& p : store.parameters()) {
    Var v = p.var;
    v.zero_grad();
  }
  crackgan::backward(out, r);
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  const auto& params = store.parameters();
  if (probes <= 0) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k].var.value().size(); ++i) picks.emplace_back(k, i);
    }
  } else {
    std::uniform_int_distribution<std::size_t> which(0, params.size() - 1);
    for (int n = 0; n < probes; ++n) {
      const std::size_t k = which(rng);
      std::uniform_int_distribution<std::size_t> idx(0, params[k].var.value().size() - 1);
      picks.emplace_back(k, idx(rng));
    }
  }
  double worst = 0.0;
  for (const auto& [k, i] : picks) {
    Var v = params[k].var;
    const double analytic = v.grad().empty() ? 0.0 : v.grad()[i];
    const double x0 = v.value()[i];
    auto eval = [&](double x) {
      v.mutable_value()[i] = x;
      crackgan::NoGradGuard guard;
      const double s = dot(f().value(), r);
      v.mutable_value()[i] = x0;
      return s;
    };
    auto central = [&](double step) { return (eval(x0 + step) - eval(x0 - step)) / (2 * step); };
    const double numeric = (4 * central(h / 2) - central(h)) / 3;
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor));
  }
  return worst;
}

}  // namespace testing
