#include "crackgan/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "crackgan/error.hpp"
#include "crackgan/image_io.hpp"

namespace crackgan {

namespace {

void paint_disk(BinaryMask& m, double y, double x, double radius) {
  const int r0 = static_cast<int>(std::floor(y - radius)), r1 = static_cast<int>(std::ceil(y + radius));
  const int c0 = static_cast<int>(std::floor(x - radius)), c1 = static_cast<int>(std::ceil(x + radius));
  for (int r = std::max(r0, 0); r <= std::min(r1, m.height - 1); ++r) {
    for (int c = std::max(c0, 0); c <= std::min(c1, m.width - 1); ++c) {
      if ((r - y) * (r - y) + (c - x) * (c - x) <= radius * radius) m.at(r, c) = 1;
    }
  }
}

}  // namespace

SyntheticTile synthetic_crack_tile(int height, int width, std::uint64_t seed, double crack_fraction) {
  if (height < 8 || width < 8) throw ConfigError("synthetic tile must be at least 8x8");
  if (!(crack_fraction > 0 && crack_fraction < 0.5)) throw ConfigError("synthetic crack_fraction must lie in (0, 0.5)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> turn(0.0, 0.12);
  std::normal_distribution<double> noise(0.0, 0.04);

  SyntheticTile t;
  t.mask = BinaryMask(height, width);
  const auto target = static_cast<std::int64_t>(std::llround(crack_fraction * height * width));
  const double radius = 1.0;
  while (t.mask.count() < target) {
    // Enter from the left or top edge and wander across.
    const bool horizontal = unit(rng) < 0.5;
    double y = horizontal ? height * (0.2 + 0.6 * unit(rng)) : 0.0;
    double x = horizontal ? 0.0 : width * (0.2 + 0.6 * unit(rng));
    double angle = (horizontal ? 0.0 : std::numbers::pi / 2) + (unit(rng) - 0.5);
    while (y >= 0 && y < height && x >= 0 && x < width && t.mask.count() < target) {
      paint_disk(t.mask, y, x, radius);
      angle += turn(rng);
      y += 0.5 * std::sin(angle);
      x += 0.5 * std::cos(angle);
    }
  }

  t.image = Tensor({3, height, width});
  const double phase_y = unit(rng) * 6.28, phase_x = unit(rng) * 6.28;
  const std::array<double, 3> tint{1.0, 0.97, 0.93};
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double shade = 0.55 + 0.08 * std::sin(0.15 * r + phase_y) * std::cos(0.11 * c + phase_x);
      const double base = t.mask.at(r, c) ? 0.18 : shade;
      const double grain = noise(rng);
      for (int ch = 0; ch < 3; ++ch) {
        t.image[ch * plane + static_cast<std::size_t>(r) * width + c] = std::clamp(base * tint[ch] + grain, 0.0, 1.0);
      }
    }
  }
  return t;
}

void write_synthetic_corpus(const std::string& dir, int count, int height, int width, std::uint64_t seed,
                            double crack_fraction) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  for (int i = 0; i < count; ++i) {
    const auto tile = synthetic_crack_tile(height, width, seed + static_cast<std::uint64_t>(i), crack_fraction);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "tile%02d", i);
    write_rgb((fs::path(dir) / "images" / (std::string(stem) + ".png")).string(), tile.image);
    write_mask((fs::path(dir) / "masks" / (std::string(stem) + ".png")).string(), tile.mask);
  }
}

}  // namespace crackgan
