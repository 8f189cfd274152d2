#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crackgan/layers.hpp"

namespace crackgan {

enum class AttentionKind { cbam, cbam_ignore, lsa };

std::string to_string(AttentionKind kind);
AttentionKind parse_attention_kind(const std::string& text);

struct AttentionConfig {
  AttentionKind kind = AttentionKind::cbam;
  int lsa_window = 8;
  int channel_reduction = 8;

  void validate() const;
};

// Attention gate on a skip connection: maps an encoder feature C×H×W to a
// modulated feature of the same shape.
class AttentionModule {
 public:
  virtual ~AttentionModule() = default;
  virtual Var forward(const Var& features) const = 0;
  virtual void append_records(LayerManifest& m, const std::string& role, int height, int width) const = 0;
};

// Channel-then-spatial attention. In ignore mode each learned mask M marks
// irrelevant responses and the applied mask is its complement 1 - M.
class Cbam final : public AttentionModule {
 public:
  Cbam(ParameterStore& store, const std::string& name, int channels, int reduction, bool ignore, Rng& rng);

  // Raw sigmoid masks before any flipping: B×C×1×1 and B×1×H×W.
  Var channel_mask(const Var& features) const;
  Var spatial_mask(const Var& features) const;

  // F ⊙ M_c (or F ⊙ (1 - M_c) when ignore), and likewise for M_s.
  Var channel_stage(const Var& features, bool ignore) const;
  Var spatial_stage(const Var& features, bool ignore) const;

  Var forward(const Var& features) const override;
  void append_records(LayerManifest& m, const std::string& role, int height, int width) const override;

  bool ignore() const noexcept { return ignore_; }
  int hidden_channels() const noexcept { return fc1_.out_features; }

 private:
  std::string name_;
  int channels_;
  bool ignore_;
  Linear fc1_, fc2_;
  Conv2d spatial_conv_;
};

// Two stacked windowed self-attention layers, each with a residual path:
//   y = x + softmax(Q Kᵀ / sqrt(C)) V Wo + bo   inside every window.
// Inputs whose sides are not multiples of the window are zero-padded
// symmetrically and cropped back afterwards.
class LocalSelfAttention final : public AttentionModule {
 public:
  static constexpr int kLayers = 2;

  // With `shrink_to_fit` the window is reduced to min(H, W) on maps smaller
  // than the window instead of raising ConfigError.
  LocalSelfAttention(ParameterStore& store, const std::string& name, int channels, int window, Rng& rng,
                     bool shrink_to_fit = false);

  Var forward(const Var& features) const override;
  void append_records(LayerManifest& m, const std::string& role, int height, int width) const override;

  // Forward that also returns every per-window attention matrix of both
  // layers (layer 0 first).
  Var forward_with_maps(const Var& features, std::vector<Tensor>& maps) const;

  int window() const noexcept { return window_; }

 private:
  Var run(const Var& features, std::vector<Tensor>* maps) const;

  std::string name_;
  int channels_;
  int window_;
  bool shrink_to_fit_;
  ops::AttentionWeights layers_[kLayers];
};

// Builds the gate for `config`; with `shrink_lsa_window` an LSA gate shrinks
// its window on maps smaller than the configured one.
std::unique_ptr<AttentionModule> make_attention(const AttentionConfig& config, ParameterStore& store,
                                                const std::string& name, int channels, Rng& rng,
                                                bool shrink_lsa_window = false);

}  // namespace crackgan
