#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crackgan/tensor.hpp"

namespace crackgan {

// H×W mask with entries in {0, 1}; 1 marks a crack pixel.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0) {}

  // Throws InputError unless every value is exactly 0 or 1.
  static BinaryMask from_values(int h, int w, std::span<const double> values);

  std::uint8_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const noexcept { return pixels.size(); }
  std::int64_t count() const;
  Tensor to_tensor() const;  // 1×1×H×W
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// H×W per-pixel crack probability in [0, 1].
struct ProbabilityMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  ProbabilityMap() = default;
  ProbabilityMap(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  // Plane `index` of a B×1×H×W tensor.
  static ProbabilityMap from_tensor(const Tensor& t, int index = 0);
  static ProbabilityMap from_mask(const BinaryMask& mask);

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const noexcept { return values.size(); }
};

void require_same_size(const BinaryMask& a, const BinaryMask& b, const char* what);
void require_same_size(const ProbabilityMap& a, const BinaryMask& b, const char* what);

}  // namespace crackgan
