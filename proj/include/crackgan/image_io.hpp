#pragma once

#include <string>

#include "crackgan/maps.hpp"
#include "crackgan/tensor.hpp"

namespace crackgan {

// 3×H×W, RGB order, values in [0, 1].
Tensor read_rgb(const std::string& path);
void write_rgb(const std::string& path, const Tensor& image);

// Grayscale masks stored as {0,1} are thresholded at > 0, anything else at > 127.
BinaryMask read_mask(const std::string& path);
void write_mask(const std::string& path, const BinaryMask& mask);

// 8-bit grayscale, value = round(255·p).
void write_probability(const std::string& path, const ProbabilityMap& map);
ProbabilityMap read_probability(const std::string& path);

}  // namespace crackgan
