#include "crackgan/discriminators.hpp"

#include <algorithm>

#include "crackgan/error.hpp"

namespace crackgan {

std::string to_string(DiscriminatorKind kind) { return kind == DiscriminatorKind::pixel ? "pixel" : "image"; }

DiscriminatorKind parse_discriminator_kind(const std::string& text) {
  if (text == "pixel") return DiscriminatorKind::pixel;
  if (text == "image") return DiscriminatorKind::image;
  throw ConfigError("unknown discriminator kind '" + text + "' (expected pixel or image)");
}

void DiscriminatorSpec::validate() const {
  if (in_channels < 1) throw ConfigError("discriminator.in_channels must be >= 1");
  if (base_width < 1) throw ConfigError("discriminator.base_width must be >= 1");
  if (max_width < base_width) throw ConfigError("discriminator.max_width must be >= discriminator.base_width");
  if (leaky_slope < 0) throw ConfigError("discriminator.leaky_slope must be >= 0");
}

namespace {

void check_pair(const Tensor& x, int channels, const char* what) {
  require_rank(x, 4, what);
  if (x.dim(1) != channels) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(channels) + " input channels, got " +
                     to_string(x.shape()));
  }
}

}  // namespace

PixelDiscriminator::PixelDiscriminator(const DiscriminatorSpec& spec, std::string network_name)
    : spec_(spec), network_name_(std::move(network_name)) {
  spec_.validate();
  Rng rng(spec_.seed);
  for (int i = 0; i < 3; ++i) {
    convs_[i] = Conv2d(store_, "conv" + std::to_string(i), i == 0 ? spec_.in_channels : spec_.base_width,
                       spec_.base_width, 3, rng);
  }
  head_ = Conv2d(store_, "head", spec_.base_width, 1, 1, rng);
}

Var PixelDiscriminator::forward(const Var& x) const {
  check_pair(x.value(), spec_.in_channels, "pixel discriminator input");
  Var cur = x;
  for (const auto& conv : convs_) cur = ops::leaky_relu(conv(cur), spec_.leaky_slope);
  return ops::sigmoid(head_(cur));
}

LayerManifest PixelDiscriminator::manifest(int height, int width) const {
  LayerManifest m;
  m.network = network_name_;
  m.variant = "pixel";
  m.input_channels = spec_.in_channels;
  m.input_h = height;
  m.input_w = width;
  for (const auto& conv : convs_) {
    m.layers.push_back(conv.record("core", height, width));
    m.layers.push_back(
        elementwise_record(conv.name + ".leaky_relu", LayerKind::activation, "core", conv.out_channels, height, width));
  }
  m.layers.push_back(head_.record("head", height, width));
  m.layers.push_back(elementwise_record("head.sigmoid", LayerKind::activation, "head", 1, height, width));
  return m;
}

int ImageDiscriminator::block_width(int stage) const {
  return std::min(spec_.max_width, spec_.base_width << std::min(stage, 20));
}

ImageDiscriminator::ImageDiscriminator(const DiscriminatorSpec& spec) : spec_(spec) {
  spec_.validate();
  Rng rng(spec_.seed);
  int in = spec_.in_channels;
  for (int b = 0; b < kBlocks; ++b) {
    const int out = block_width(b / 2);
    blocks_[b] = ConvBnRelu(store_, "block" + std::to_string(b), in, out, rng);
    in = out;
  }
  head_ = Linear(store_, "head", in, 1, rng);
}

Var ImageDiscriminator::forward(const Var& x) const {
  check_pair(x.value(), spec_.in_channels, "image discriminator input");
  if (x.dim(2) < kMinSide || x.dim(3) < kMinSide) {
    throw ShapeError("image discriminator input " + to_string(x.shape()) + " is smaller than " +
                     std::to_string(kMinSide) + "x" + std::to_string(kMinSide) + " needed by the pooling chain");
  }
  Var cur = x;
  for (int b = 0; b < kBlocks; ++b) {
    cur = blocks_[b](cur, training_);
    if (b % 2 == 1) cur = b == kBlocks - 1 ? ops::global_avg_pool(cur) : ops::max_pool2(cur);
  }
  const int batch = x.dim(0);
  cur = ops::reshape(cur, {batch, head_.in_features});
  return ops::sigmoid(head_(cur));
}

LayerManifest ImageDiscriminator::manifest(int height, int width) const {
  if (height < kMinSide || width < kMinSide) {
    throw ShapeError("image discriminator manifest: input smaller than " + std::to_string(kMinSide));
  }
  LayerManifest m;
  m.network = "discriminator";
  m.variant = "image";
  m.input_channels = spec_.in_channels;
  m.input_h = height;
  m.input_w = width;
  int h = height, w = width;
  for (int b = 0; b < kBlocks; ++b) {
    blocks_[b].append_records(m, "core", h, w);
    if (b % 2 == 1) {
      const bool last = b == kBlocks - 1;
      h = last ? 1 : h / 2;
      w = last ? 1 : w / 2;
      m.layers.push_back(elementwise_record("pool" + std::to_string(b / 2), LayerKind::pool, "core",
                                            blocks_[b].conv.out_channels, h, w));
    }
  }
  m.layers.push_back(head_.record("head"));
  m.layers.push_back(elementwise_record("head.sigmoid", LayerKind::activation, "head", 1, 1, 1));
  return m;
}

std::unique_ptr<Discriminator> make_discriminator(const DiscriminatorSpec& spec) {
  if (spec.kind == DiscriminatorKind::pixel) return std::make_unique<PixelDiscriminator>(spec);
  return std::make_unique<ImageDiscriminator>(spec);
}

Var pair_input(const Var& images, const Var& maps) { return ops::concat_channels({images, maps}); }

}  // namespace crackgan
