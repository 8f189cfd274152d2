#include "crackgan/generator.hpp"

#include "crackgan/error.hpp"

namespace crackgan {

void GeneratorSpec::validate() const {
  if (base_width < 1 || base_width > (1 << 20)) throw ConfigError("generator.base_width must be in [1, 2^20]");
  if (depth != Generator::kLevels) {
    throw ConfigError("generator.depth must be " + std::to_string(Generator::kLevels) + " (got " +
                      std::to_string(depth) + ")");
  }
  if (in_channels < 1) throw ConfigError("generator.in_channels must be >= 1");
  if (out_channels != 1) throw ConfigError("generator.out_channels must be 1 (binary segmentation)");
  attention.validate();
}

void check_generator_input(const Tensor& x, int channels, int depth) {
  require_rank(x, 4, "generator input");
  if (x.dim(1) != channels) {
    throw ShapeError("generator input: expected " + std::to_string(channels) + " channels, got " +
                     to_string(x.shape()));
  }
  const int factor = 1 << depth;
  if (x.dim(2) % factor != 0 || x.dim(2) == 0) {
    throw ShapeError("generator input height " + std::to_string(x.dim(2)) + " is not a positive multiple of " +
                     std::to_string(factor));
  }
  if (x.dim(3) % factor != 0 || x.dim(3) == 0) {
    throw ShapeError("generator input width " + std::to_string(x.dim(3)) + " is not a positive multiple of " +
                     std::to_string(factor));
  }
}

Generator::Generator(const GeneratorSpec& spec) : spec_(spec) {
  spec_.validate();
  Rng rng(spec_.seed);
  auto& s = store_;
  for (int l = 0; l <= kLevels; ++l) {
    const std::string p = "enc" + std::to_string(l);
    const int in = l == 0 ? spec_.in_channels : spec_.width(l - 1);
    encoder_[l][0] = ConvBnRelu(s, p + ".block0", in, spec_.width(l), rng);
    encoder_[l][1] = ConvBnRelu(s, p + ".block1", spec_.width(l), spec_.width(l), rng);
  }
  for (int l = 0; l < kLevels; ++l) {
    if (spec_.use_attention) {
      gates_[l] = make_attention(spec_.attention, s, "gate" + std::to_string(l), spec_.width(l), rng, true);
    }
  }
  for (int l = kLevels - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    up_[l] = ConvBnRelu(s, p + ".up", spec_.width(l + 1), spec_.width(l), rng);
    decoder_[l][0] = ConvBnRelu(s, p + ".block0", 2 * spec_.width(l), spec_.width(l), rng);
    decoder_[l][1] = ConvBnRelu(s, p + ".block1", spec_.width(l), spec_.width(l), rng);
  }
  output_conv_ = Conv2d(s, "output", spec_.width(0), spec_.out_channels, 1, rng);
  for (int i = 0; i < kLevels - 1; ++i) {
    const int level = kLevels - 1 - i;
    side_convs_[i] = Conv2d(s, "side" + std::to_string(level), spec_.width(level), 1, 1, rng);
  }
  fuse_conv_ = Conv2d(s, "fuse", kSideMaps, 1, 1, rng);
  // HED-style fusion start: the plain average of the side logits.
  fuse_conv_.weight.mutable_value().fill(1.0 / kSideMaps);
}

GeneratorOutput Generator::forward(const Var& x) const {
  check_generator_input(x.value(), spec_.in_channels, kLevels);
  const int h = x.dim(2);
  const int w = x.dim(3);
  const bool t = training_;

  std::array<Var, kLevels> skips;
  Var cur = x;
  for (int l = 0; l <= kLevels; ++l) {
    if (l > 0) cur = ops::max_pool2(cur);
    cur = encoder_[l][1](encoder_[l][0](cur, t), t);
    if (l < kLevels) skips[l] = gates_[l] ? gates_[l]->forward(cur) : cur;
  }

  // Side heads are fused on their upsampled logits, as in HED.
  GeneratorOutput out;
  std::array<Var, kSideMaps> logits;
  for (int l = kLevels - 1; l >= 0; --l) {
    cur = up_[l](ops::upsample_nearest2(cur), t);
    cur = ops::concat_channels({skips[l], cur});
    cur = decoder_[l][1](decoder_[l][0](cur, t), t);
    if (l > 0) {
      const int i = kLevels - 1 - l;
      logits[i] = ops::resize_bilinear(side_convs_[i](cur), h, w);
    }
  }
  logits[kSideMaps - 1] = output_conv_(cur);
  for (int i = 0; i < kSideMaps; ++i) out.sides[i] = ops::sigmoid(logits[i]);
  out.fused = ops::sigmoid(fuse_conv_(ops::concat_channels({logits[0], logits[1], logits[2], logits[3]})));
  return out;
}

LayerManifest Generator::manifest(int height, int width) const {
  Tensor probe({1, spec_.in_channels, height, width});
  check_generator_input(probe, spec_.in_channels, kLevels);

  LayerManifest m;
  m.network = "generator";
  m.variant = spec_.use_attention ? to_string(spec_.attention.kind) : "none";
  m.input_channels = spec_.in_channels;
  m.input_h = height;
  m.input_w = width;
  auto size_h = [&](int l) { return height >> l; };
  auto size_w = [&](int l) { return width >> l; };

  for (int l = 0; l <= kLevels; ++l) {
    if (l > 0) {
      m.layers.push_back(elementwise_record("enc" + std::to_string(l) + ".pool", LayerKind::pool, "core",
                                            spec_.width(l - 1), size_h(l), size_w(l)));
    }
    encoder_[l][0].append_records(m, "core", size_h(l), size_w(l));
    encoder_[l][1].append_records(m, "core", size_h(l), size_w(l));
    if (l < kLevels && gates_[l]) gates_[l]->append_records(m, "attention", size_h(l), size_w(l));
  }
  for (int l = kLevels - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    m.layers.push_back(
        elementwise_record(p + ".upsample", LayerKind::upsample, "core", spec_.width(l + 1), size_h(l), size_w(l)));
    up_[l].append_records(m, "core", size_h(l), size_w(l));
    m.layers.push_back(
        elementwise_record(p + ".concat", LayerKind::concat, "core", 2 * spec_.width(l), size_h(l), size_w(l)));
    decoder_[l][0].append_records(m, "core", size_h(l), size_w(l));
    decoder_[l][1].append_records(m, "core", size_h(l), size_w(l));
    if (l > 0) {
      const auto& conv = side_convs_[kLevels - 1 - l];
      m.layers.push_back(conv.record("side", size_h(l), size_w(l)));
      m.layers.push_back(elementwise_record(conv.name + ".upsample", LayerKind::upsample, "side", 1, height, width));
      m.layers.push_back(
          elementwise_record(conv.name + ".sigmoid", LayerKind::activation, "side", 1, height, width));
    }
  }
  m.layers.push_back(output_conv_.record("core", height, width));
  m.layers.push_back(elementwise_record("output.sigmoid", LayerKind::activation, "core", 1, height, width));
  m.layers.push_back(elementwise_record("fuse.concat", LayerKind::concat, "fuse", kSideMaps, height, width));
  m.layers.push_back(fuse_conv_.record("fuse", height, width));
  m.layers.push_back(elementwise_record("fuse.sigmoid", LayerKind::activation, "fuse", 1, height, width));
  return m;
}

}  // namespace crackgan
