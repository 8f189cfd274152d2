#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crackgan/layers.hpp"

namespace crackgan {

// On-disk layout (little-endian):
//   8 bytes   magic "CRKGCKPT"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header {version, iteration, config{...}, tensors[{name, shape, offset}]}
//   payload   float64 blobs, offsets in elements from the payload start
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::int64_t iteration = 0;
  std::map<std::string, std::string> config;  // effective key=value configuration
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  std::int64_t parameter_elements(const std::string& prefix) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Adds every parameter ("<prefix>/param/<name>") and buffer
// ("<prefix>/buffer/<name>") of `network`.
void append_network(Checkpoint& checkpoint, const std::string& prefix, const Network& network);

// Copies stored values back into `network`; throws InputError on missing
// names or shape mismatches.
void restore_network(const Checkpoint& checkpoint, const std::string& prefix, Network& network);

}  // namespace crackgan
