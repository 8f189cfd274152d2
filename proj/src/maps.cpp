#include "crackgan/maps.hpp"

#include <string>

#include "crackgan/error.hpp"

namespace crackgan {

BinaryMask BinaryMask::from_values(int h, int w, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(h) * w) {
    throw ShapeError("mask of size " + std::to_string(h) + "x" + std::to_string(w) + " given " +
                     std::to_string(values.size()) + " values");
  }
  BinaryMask m(h, w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 1.0) {
      m.pixels[i] = 1;
    } else if (values[i] != 0.0) {
      throw InputError("mask value " + std::to_string(values[i]) + " at index " + std::to_string(i) +
                       " is not binary");
    }
  }
  return m;
}

std::int64_t BinaryMask::count() const {
  std::int64_t n = 0;
  for (auto p : pixels) n += p;
  return n;
}

Tensor BinaryMask::to_tensor() const {
  Tensor t({1, 1, height, width});
  for (std::size_t i = 0; i < pixels.size(); ++i) t[i] = pixels[i];
  return t;
}

ProbabilityMap ProbabilityMap::from_tensor(const Tensor& t, int index) {
  require_rank(t, 4, "probability map tensor");
  if (t.dim(1) != 1 || index < 0 || index >= t.dim(0)) {
    throw ShapeError("cannot take probability map " + std::to_string(index) + " from " + to_string(t.shape()));
  }
  ProbabilityMap m(t.dim(2), t.dim(3));
  const std::size_t plane = m.values.size();
  std::copy(t.data() + index * plane, t.data() + (index + 1) * plane, m.values.begin());
  return m;
}

ProbabilityMap ProbabilityMap::from_mask(const BinaryMask& mask) {
  ProbabilityMap m(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) m.values[i] = mask.pixels[i];
  return m;
}

void require_same_size(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                     std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

void require_same_size(const ProbabilityMap& a, const BinaryMask& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                     std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

}  // namespace crackgan
