#include "crackgan/attention.hpp"

#include <algorithm>
#include <cmath>

#include "crackgan/error.hpp"

namespace crackgan {

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::cbam:
      return "cbam";
    case AttentionKind::cbam_ignore:
      return "cbam_ignore";
    case AttentionKind::lsa:
      return "lsa";
  }
  return "unknown";
}

AttentionKind parse_attention_kind(const std::string& text) {
  if (text == "cbam") return AttentionKind::cbam;
  if (text == "cbam_ignore") return AttentionKind::cbam_ignore;
  if (text == "lsa") return AttentionKind::lsa;
  throw ConfigError("unknown attention kind '" + text + "' (expected cbam, cbam_ignore or lsa)");
}

void AttentionConfig::validate() const {
  if (lsa_window < 1) throw ConfigError("generator.lsa_window must be >= 1");
  if (channel_reduction < 1) throw ConfigError("generator.channel_reduction must be >= 1");
}

Cbam::Cbam(ParameterStore& store, const std::string& name, int channels, int reduction, bool ignore, Rng& rng)
    : name_(name),
      channels_(channels),
      ignore_(ignore),
      fc1_(store, name + ".fc1", channels, std::max(1, channels / reduction), rng),
      fc2_(store, name + ".fc2", std::max(1, channels / reduction), channels, rng),
      spatial_conv_(store, name + ".spatial", 2, 1, 7, rng) {}

Var Cbam::channel_mask(const Var& f) const {
  const int b = f.dim(0);
  auto mlp = [&](const Var& pooled) { return fc2_(ops::relu(fc1_(ops::reshape(pooled, {b, channels_})))); };
  Var logits = ops::add(mlp(ops::global_avg_pool(f)), mlp(ops::global_max_pool(f)));
  return ops::reshape(ops::sigmoid(logits), {b, channels_, 1, 1});
}

Var Cbam::spatial_mask(const Var& f) const {
  Var pooled = ops::concat_channels({ops::channel_mean(f), ops::channel_max(f)});
  return ops::sigmoid(spatial_conv_(pooled));
}

Var Cbam::channel_stage(const Var& f, bool ignore) const {
  Var mask = channel_mask(f);
  return ops::mul(f, ignore ? ops::one_minus(mask) : mask);
}

Var Cbam::spatial_stage(const Var& f, bool ignore) const {
  Var mask = spatial_mask(f);
  return ops::mul(f, ignore ? ops::one_minus(mask) : mask);
}

Var Cbam::forward(const Var& f) const {
  if (f.dim(1) != channels_) {
    throw ShapeError(name_ + ": expected " + std::to_string(channels_) + " channels, got " + to_string(f.shape()));
  }
  return spatial_stage(channel_stage(f, ignore_), ignore_);
}

void Cbam::append_records(LayerManifest& m, const std::string& role, int h, int w) const {
  const int hid = fc1_.out_features;
  m.layers.push_back(elementwise_record(name_ + ".avg_pool", LayerKind::pool, role, channels_, 1, 1));
  m.layers.push_back(elementwise_record(name_ + ".max_pool", LayerKind::pool, role, channels_, 1, 1));
  m.layers.push_back(fc1_.record(role, 2));
  m.layers.push_back(elementwise_record(name_ + ".fc1_relu", LayerKind::activation, role, hid, 1, 1, 2));
  m.layers.push_back(fc2_.record(role, 2));
  m.layers.push_back(elementwise_record(name_ + ".channel_sum", LayerKind::elementwise, role, channels_, 1, 1));
  m.layers.push_back(elementwise_record(name_ + ".channel_sigmoid", LayerKind::activation, role, channels_, 1, 1));
  if (ignore_) {
    m.layers.push_back(elementwise_record(name_ + ".channel_flip", LayerKind::elementwise, role, channels_, 1, 1));
  }
  m.layers.push_back(elementwise_record(name_ + ".channel_apply", LayerKind::elementwise, role, channels_, h, w));
  m.layers.push_back(elementwise_record(name_ + ".mean_over_channels", LayerKind::pool, role, 1, h, w));
  m.layers.push_back(elementwise_record(name_ + ".max_over_channels", LayerKind::pool, role, 1, h, w));
  m.layers.push_back(elementwise_record(name_ + ".spatial_concat", LayerKind::concat, role, 2, h, w));
  m.layers.push_back(spatial_conv_.record(role, h, w));
  m.layers.push_back(elementwise_record(name_ + ".spatial_sigmoid", LayerKind::activation, role, 1, h, w));
  if (ignore_) {
    m.layers.push_back(elementwise_record(name_ + ".spatial_flip", LayerKind::elementwise, role, 1, h, w));
  }
  m.layers.push_back(elementwise_record(name_ + ".spatial_apply", LayerKind::elementwise, role, channels_, h, w));
}

LocalSelfAttention::LocalSelfAttention(ParameterStore& store, const std::string& name, int channels, int window,
                                       Rng& rng, bool shrink_to_fit)
    : name_(name), channels_(channels), window_(window), shrink_to_fit_(shrink_to_fit) {
  if (window < 1) throw ConfigError(name + ": window must be >= 1");
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(channels)));
  auto proj = [&](const std::string& id) {
    Tensor t({channels, channels});
    for (double& v : t.values()) v = dist(rng);
    return store.add_parameter(id, std::move(t));
  };
  for (int l = 0; l < kLayers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    auto& w = layers_[l];
    w.wq = proj(p + ".query.weight");
    w.bq = store.add_parameter(p + ".query.bias", Tensor({channels}));
    w.wk = proj(p + ".key.weight");
    w.bk = store.add_parameter(p + ".key.bias", Tensor({channels}));
    w.wv = proj(p + ".value.weight");
    w.bv = store.add_parameter(p + ".value.bias", Tensor({channels}));
    w.wo = proj(p + ".out.weight");
    w.bo = store.add_parameter(p + ".out.bias", Tensor({channels}));
  }
}

Var LocalSelfAttention::run(const Var& f, std::vector<Tensor>* maps) const {
  require_rank(f.value(), 4, name_.c_str());
  if (f.dim(1) != channels_) {
    throw ShapeError(name_ + ": expected " + std::to_string(channels_) + " channels, got " + to_string(f.shape()));
  }
  const int h = f.dim(2);
  const int w = f.dim(3);
  const int win = shrink_to_fit_ ? std::min({window_, h, w}) : window_;
  if (win > std::min(h, w)) {
    throw ConfigError(name_ + ": generator.lsa_window " + std::to_string(window_) + " exceeds feature map " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  const int pad_h = (win - h % win) % win;
  const int pad_w = (win - w % win) % win;
  Var x = f;
  if (pad_h || pad_w) x = ops::pad2d(x, pad_h / 2, pad_h - pad_h / 2, pad_w / 2, pad_w - pad_w / 2);
  for (const auto& layer : layers_) x = ops::add(x, ops::window_attention(x, layer, win, maps));
  if (pad_h || pad_w) x = ops::crop2d(x, pad_h / 2, pad_w / 2, h, w);
  return x;
}

Var LocalSelfAttention::forward(const Var& f) const { return run(f, nullptr); }

Var LocalSelfAttention::forward_with_maps(const Var& f, std::vector<Tensor>& maps) const { return run(f, &maps); }

void LocalSelfAttention::append_records(LayerManifest& m, const std::string& role, int h, int w) const {
  const int win = std::min({window_, h, w});
  const int ph = h + (win - h % win) % win;
  const int pw = w + (win - w % win) % win;
  const std::int64_t tokens = static_cast<std::int64_t>(win) * win;
  for (int l = 0; l < kLayers; ++l) {
    const std::string p = name_ + ".layer" + std::to_string(l);
    for (const char* proj : {".query", ".key", ".value", ".out"}) {
      LayerRecord r;
      r.name = p + proj;
      r.kind = LayerKind::conv;
      r.role = role;
      r.in_channels = channels_;
      r.out_channels = channels_;
      r.kernel = 1;
      r.out_h = ph;
      r.out_w = pw;
      r.params = static_cast<std::int64_t>(channels_) * channels_ + channels_;
      m.layers.push_back(r);
    }
    LayerRecord mm;
    mm.name = p + ".attend";
    mm.kind = LayerKind::matmul;
    mm.role = role;
    mm.in_channels = channels_;
    mm.out_channels = channels_;
    mm.out_h = ph;
    mm.out_w = pw;
    mm.macs = 2 * static_cast<std::int64_t>(ph) * pw * tokens * channels_;  // Q Kᵀ and A V
    m.layers.push_back(mm);
    m.layers.push_back(
        elementwise_record(p + ".softmax", LayerKind::activation, role, static_cast<int>(tokens), ph, pw));
    m.layers.push_back(elementwise_record(p + ".residual", LayerKind::elementwise, role, channels_, ph, pw));
  }
}

std::unique_ptr<AttentionModule> make_attention(const AttentionConfig& config, ParameterStore& store,
                                                const std::string& name, int channels, Rng& rng,
                                                bool shrink_lsa_window) {
  config.validate();
  switch (config.kind) {
    case AttentionKind::cbam:
      return std::make_unique<Cbam>(store, name, channels, config.channel_reduction, false, rng);
    case AttentionKind::cbam_ignore:
      return std::make_unique<Cbam>(store, name, channels, config.channel_reduction, true, rng);
    case AttentionKind::lsa:
      return std::make_unique<LocalSelfAttention>(store, name, channels, config.lsa_window, rng,
                                                  shrink_lsa_window);
  }
  throw ConfigError("unknown attention kind");
}

}  // namespace crackgan
