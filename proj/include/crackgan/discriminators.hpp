#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "crackgan/layers.hpp"

namespace crackgan {

enum class DiscriminatorKind { pixel, image };

std::string to_string(DiscriminatorKind kind);
DiscriminatorKind parse_discriminator_kind(const std::string& text);

struct DiscriminatorSpec {
  DiscriminatorKind kind = DiscriminatorKind::pixel;
  int in_channels = 4;  // RGB image + mask or probability map
  int base_width = 64;
  int max_width = 512;  // image-level only: widths double per pool up to this cap
  double leaky_slope = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

class Discriminator : public Network {
 public:
  virtual Var forward(const Var& pair) const = 0;
  virtual DiscriminatorKind kind() const noexcept = 0;
};

// Fully convolutional judge: three 3×3 conv + leaky-ReLU stages, a 1×1 conv
// and a sigmoid. Output B×1×H×W is aligned with the input.
class PixelDiscriminator final : public Discriminator {
 public:
  // `network_name` only labels the manifest; the auxiliary network reuses
  // this topology with a single input channel.
  explicit PixelDiscriminator(const DiscriminatorSpec& spec, std::string network_name = "discriminator");

  Var forward(const Var& pair) const override;
  DiscriminatorKind kind() const noexcept override { return DiscriminatorKind::pixel; }
  LayerManifest manifest(int height, int width) const override;

 private:
  DiscriminatorSpec spec_;
  std::string network_name_;
  std::array<Conv2d, 3> convs_;
  Conv2d head_;
};

// Scalar judge: ten conv-BN-ReLU blocks with a pool after every second block
// (four 2×2 max pools, then global average pooling), a linear map and a
// sigmoid. Output B×1.
class ImageDiscriminator final : public Discriminator {
 public:
  static constexpr int kBlocks = 10;
  static constexpr int kMinSide = 16;

  explicit ImageDiscriminator(const DiscriminatorSpec& spec);

  Var forward(const Var& pair) const override;
  DiscriminatorKind kind() const noexcept override { return DiscriminatorKind::image; }
  LayerManifest manifest(int height, int width) const override;

  int block_width(int stage) const;

 private:
  DiscriminatorSpec spec_;
  std::array<ConvBnRelu, kBlocks> blocks_;
  Linear head_;
};

std::unique_ptr<Discriminator> make_discriminator(const DiscriminatorSpec& spec);

// Channel concatenation [image, map] fed to a discriminator.
Var pair_input(const Var& images, const Var& maps);

}  // namespace crackgan
