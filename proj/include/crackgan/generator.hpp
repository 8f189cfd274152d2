#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "crackgan/attention.hpp"
#include "crackgan/layers.hpp"

namespace crackgan {

struct GeneratorSpec {
  int base_width = 32;
  int depth = 4;  // 2×2 down/up-sampling steps; fixed by the architecture
  AttentionConfig attention;
  bool use_attention = true;  // false replaces every gate by the identity
  int in_channels = 3;
  int out_channels = 1;
  std::uint64_t seed = 0;

  void validate() const;
  int width(int level) const { return base_width << level; }
};

struct GeneratorOutput {
  Var fused;                 // B×1×H×W
  std::array<Var, 4> sides;  // coarsest first; sides[3] is the full-resolution head
};

// Attention U-Net with deep supervision.
//
// Encoder: five levels of two conv-BN-ReLU blocks with 2×2 max pooling in
// between. Decoder: four levels of nearest upsampling + conv-BN-ReLU, concat
// with the attention-gated encoder feature, two conv-BN-ReLU blocks. The last
// decoder level ends in the 1×1 output conv; together these are the 23 core
// convolutions. Side heads (1×1 conv + sigmoid + bilinear upsampling) on the
// three coarser decoder levels plus the core output give four side maps; a
// 1×1 fuse conv + sigmoid over their concatenation gives the final map.
class Generator final : public Network {
 public:
  static constexpr int kLevels = 4;
  static constexpr int kSideMaps = 4;
  static constexpr int kCoreConvLayers = 23;

  explicit Generator(const GeneratorSpec& spec);

  GeneratorOutput forward(const Var& images) const;
  LayerManifest manifest(int height, int width) const override;

  const GeneratorSpec& spec() const noexcept { return spec_; }

 private:
  GeneratorSpec spec_;
  std::array<std::array<ConvBnRelu, 2>, kLevels + 1> encoder_;
  std::array<std::unique_ptr<AttentionModule>, kLevels> gates_;
  std::array<ConvBnRelu, kLevels> up_;  // indexed by target level
  std::array<std::array<ConvBnRelu, 2>, kLevels> decoder_;
  Conv2d output_conv_;
  std::array<Conv2d, kLevels - 1> side_convs_;  // decoder levels 3, 2, 1
  Conv2d fuse_conv_;
};

// Throws ShapeError naming the axis unless x is B×C×H×W with H and W
// multiples of 2^depth.
void check_generator_input(const Tensor& x, int channels, int depth);

}  // namespace crackgan
