#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace crackgan {

enum class LayerKind { conv, linear, batch_norm, activation, pool, upsample, elementwise, matmul, concat };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& text);

// One row of a network's layer table. Spatial fields describe the output;
// vector-valued layers use out_h = out_w = 1.
struct LayerRecord {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::string role;  // core, side, fuse, attention, head
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int out_h = 0;
  int out_w = 0;
  std::int64_t params = 0;
  std::int64_t repeat = 1;  // applications per forward pass (shared weights count once)
  std::int64_t macs = 0;    // multiply-adds, matmul rows only
};

struct LayerManifest {
  std::string network;  // generator, discriminator, auxiliary
  std::string variant;  // attention kind or discriminator kind
  int input_channels = 0;
  int input_h = 0;
  int input_w = 0;
  std::vector<LayerRecord> layers;

  std::int64_t total_params() const;
  int count(LayerKind kind, const std::string& role = "") const;
};

void write_manifest(std::ostream& os, const LayerManifest& manifest);
LayerManifest read_manifest(std::istream& is);
void save_manifest(const std::string& path, const LayerManifest& manifest);
LayerManifest load_manifest(const std::string& path);

}  // namespace crackgan
