#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "crackgan/manifest.hpp"

namespace crackgan {

struct ComplexityReport {
  std::string network;
  std::string variant;
  int input_h = 0;
  int input_w = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  double seconds_per_image = 0.0;  // 0 when not timed
  int timed_runs = 0;
};

// conv: 2·K²·Cin·Cout·Ho·Wo; linear: 2·in·out; matmul: 2·macs; concat: 0;
// everything else one op per output element. All multiplied by `repeat`.
std::int64_t layer_flops(const LayerRecord& layer);

// Throws InputError when a record lacks the shapes its kind needs.
ComplexityReport complexity_report(const LayerManifest& manifest);

// Mean wall-clock seconds of `run` over `runs` calls after `warmup` calls.
double time_inference(const std::function<void()>& run, int warmup = 10, int runs = 100);

std::string complexity_to_json(const ComplexityReport& report);

}  // namespace crackgan
