#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crackgan/auxiliary.hpp"
#include "crackgan/data_pipeline.hpp"
#include "crackgan/discriminators.hpp"
#include "crackgan/generator.hpp"
#include "crackgan/losses.hpp"
#include "crackgan/training.hpp"

namespace crackgan {

// Flat key=value configuration with dotted section names. Every key has a
// default; reading or setting a key that does not exist is a ConfigError.
//
// File syntax: one `key = value` per line, `#` starts a comment, blank lines
// are ignored.
class Config {
 public:
  Config();

  static const std::vector<std::pair<std::string, std::string>>& defaults();

  void load_file(const std::string& path);
  void parse(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // True when the key was set by a file, an override or set().
  bool is_explicit(const std::string& key) const { return explicit_.count(key) != 0; }

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  static Config from_entries(const std::map<std::string, std::string>& entries);

  // Sorted key = value lines; parse() of the result reproduces the config.
  std::string to_text() const;
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

GeneratorSpec generator_spec(const Config& c);
DiscriminatorSpec discriminator_spec(const Config& c);
AuxiliarySpec auxiliary_spec(const Config& c);
LossConfig loss_config(const Config& c);
TrainConfig train_config(const Config& c);
// data.preset first, then any explicitly set data.* key on top.
DatasetSpec dataset_spec(const Config& c);

// Writes the preset-derived data.* values back as explicit keys so the saved
// effective config reproduces the run on its own.
void resolve_presets(Config& c);

}  // namespace crackgan
