#include "crackgan/complexity.hpp"

#include <chrono>
#include <json.hpp>

#include "crackgan/error.hpp"

namespace crackgan {

namespace {

void require_shapes(const LayerRecord& l) {
  auto missing = [&](const char* field) {
    throw InputError("layer '" + l.name + "' (" + to_string(l.kind) + ") missing shapes: " + field);
  };
  if (l.repeat < 1) missing("repeat");
  switch (l.kind) {
    case LayerKind::conv:
      if (l.kernel < 1) missing("kernel");
      if (l.in_channels < 1) missing("in_channels");
      [[fallthrough]];
    case LayerKind::batch_norm:
    case LayerKind::activation:
    case LayerKind::pool:
    case LayerKind::upsample:
    case LayerKind::elementwise:
    case LayerKind::concat:
      if (l.out_channels < 1) missing("out_channels");
      if (l.out_h < 1 || l.out_w < 1) missing("out_h/out_w");
      break;
    case LayerKind::linear:
      if (l.in_channels < 1 || l.out_channels < 1) missing("in/out features");
      break;
    case LayerKind::matmul:
      if (l.macs < 1) missing("macs");
      break;
  }
}

}  // namespace

std::int64_t layer_flops(const LayerRecord& l) {
  require_shapes(l);
  const std::int64_t spatial = static_cast<std::int64_t>(l.out_h) * l.out_w;
  std::int64_t f = 0;
  switch (l.kind) {
    case LayerKind::conv:
      f = 2LL * l.kernel * l.kernel * l.in_channels * l.out_channels * spatial;
      break;
    case LayerKind::linear:
      f = 2LL * l.in_channels * l.out_channels;
      break;
    case LayerKind::matmul:
      f = 2 * l.macs;
      break;
    case LayerKind::concat:
      f = 0;
      break;
    default:
      f = static_cast<std::int64_t>(l.out_channels) * spatial;
      break;
  }
  return f * l.repeat;
}

ComplexityReport complexity_report(const LayerManifest& m) {
  ComplexityReport r;
  r.network = m.network;
  r.variant = m.variant;
  r.input_h = m.input_h;
  r.input_w = m.input_w;
  for (const auto& l : m.layers) {
    r.flops += layer_flops(l);
    r.params += l.params;
  }
  return r;
}

double time_inference(const std::function<void()>& run, int warmup, int runs) {
  if (runs < 1) throw ConfigError("complexity.runs must be >= 1");
  for (int i = 0; i < warmup; ++i) run();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < runs; ++i) run();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return elapsed.count() / runs;
}

std::string complexity_to_json(const ComplexityReport& r) {
  nlohmann::ordered_json j;
  j["network"] = r.network;
  j["variant"] = r.variant;
  j["input"] = {r.input_h, r.input_w};
  j["flops"] = r.flops;
  j["gflops"] = static_cast<double>(r.flops) / 1e9;
  j["params"] = r.params;
  j["mparams"] = static_cast<double>(r.params) / 1e6;
  j["seconds_per_image"] = r.seconds_per_image;
  j["timed_runs"] = r.timed_runs;
  return j.dump(2) + "\n";
}

}  // namespace crackgan
