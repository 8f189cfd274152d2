#pragma once

#include <cstdint>
#include <string>

#include "crackgan/maps.hpp"
#include "crackgan/tensor.hpp"

namespace crackgan {

struct SyntheticTile {
  Tensor image;  // 3×H×W
  BinaryMask mask;
};

// Textured pavement-like background with a dark random-walk crack covering
// roughly `crack_fraction` of the pixels. Deterministic in `seed`.
SyntheticTile synthetic_crack_tile(int height, int width, std::uint64_t seed, double crack_fraction = 0.03);

// Writes <dir>/images/tileNN.png and <dir>/masks/tileNN.png.
void write_synthetic_corpus(const std::string& dir, int count, int height, int width, std::uint64_t seed,
                            double crack_fraction = 0.03);

}  // namespace crackgan
