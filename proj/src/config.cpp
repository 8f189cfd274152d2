#include "crackgan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "crackgan/error.hpp"

namespace crackgan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& Config::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table{
      {"seed", "0"},
      {"device", "cpu"},
      {"data.root", ""},
      {"data.dir", ""},
      {"data.preset", "custom"},
      {"data.tile_h", "0"},
      {"data.tile_w", "0"},
      {"data.overlap_w", "0"},
      {"data.overlap_h", "0"},
      {"data.min_crack_pixels", "1000"},
      {"data.test_fraction", "0.1"},
      {"data.val_fraction", "0.1"},
      {"generator.base_width", "32"},
      {"generator.attention", "cbam"},
      {"generator.use_attention", "true"},
      {"generator.lsa_window", "8"},
      {"generator.channel_reduction", "8"},
      {"discriminator.kind", "pixel"},
      {"discriminator.base_width", "64"},
      {"discriminator.max_width", "512"},
      {"discriminator.leaky_slope", "0.2"},
      {"auxiliary.base_width", "64"},
      {"auxiliary.leaky_slope", "0.2"},
      {"loss.alpha", "0.3"},
      {"loss.beta", "0.7"},
      {"loss.gamma", "0.25"},
      {"loss.beta_p", "1"},
      {"loss.eps", "1e-7"},
      {"loss.enabled", "cgan,kl,ce,side,tversky"},
      {"loss.generator_form", "non_saturating"},
      {"loss.kl_form", "as_printed"},
      {"train.lr", "1e-4"},
      {"train.beta1", "0.2"},
      {"train.beta2", "0.999"},
      {"train.iterations", "50000"},
      {"train.batch_size", "8"},
      {"train.eval_every", "2000"},
      {"train.stage_ratio", "1"},
      {"train.stage2", "true"},
      {"train.stage2_extra_losses", "false"},
      {"complexity.network", "generator"},
      {"complexity.height", "512"},
      {"complexity.width", "512"},
      {"complexity.warmup", "10"},
      {"complexity.runs", "100"},
  };
  return table;
}

Config::Config() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  parse(ss.str(), path);
}

void Config::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": unknown config key '" + key + "'");
    }
    set(key, trim(line.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
  explicit_.insert(key);
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

int Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t Config::get_uint(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

Config Config::from_entries(const std::map<std::string, std::string>& entries) {
  Config c;
  for (const auto& [k, v] : entries) c.set(k, v);
  return c;
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << to_text();
}

namespace {

template <typename Parse>
auto parse_key(const Config& c, const std::string& key, Parse parse) {
  try {
    return parse(c.get(key));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

GeneratorSpec generator_spec(const Config& c) {
  GeneratorSpec s;
  s.base_width = c.get_int("generator.base_width");
  s.attention.kind = parse_key(c, "generator.attention", parse_attention_kind);
  s.attention.lsa_window = c.get_int("generator.lsa_window");
  s.attention.channel_reduction = c.get_int("generator.channel_reduction");
  s.use_attention = c.get_bool("generator.use_attention");
  s.seed = c.get_uint("seed");
  s.validate();
  return s;
}

DiscriminatorSpec discriminator_spec(const Config& c) {
  DiscriminatorSpec s;
  s.kind = parse_key(c, "discriminator.kind", parse_discriminator_kind);
  s.base_width = c.get_int("discriminator.base_width");
  s.max_width = c.get_int("discriminator.max_width");
  s.leaky_slope = c.get_double("discriminator.leaky_slope");
  s.seed = c.get_uint("seed") + 1;
  s.validate();
  return s;
}

AuxiliarySpec auxiliary_spec(const Config& c) {
  AuxiliarySpec s;
  s.base_width = c.get_int("auxiliary.base_width");
  s.leaky_slope = c.get_double("auxiliary.leaky_slope");
  s.seed = c.get_uint("seed") + 2;
  if (s.base_width < 1) throw ConfigError("auxiliary.base_width must be >= 1");
  return s;
}

LossConfig loss_config(const Config& c) {
  LossConfig l;
  l.alpha = c.get_double("loss.alpha");
  l.beta = c.get_double("loss.beta");
  l.gamma = c.get_double("loss.gamma");
  l.beta_p = c.get_double("loss.beta_p");
  l.eps = c.get_double("loss.eps");
  l.enabled.clear();
  std::istringstream terms(c.get("loss.enabled"));
  std::string term;
  while (std::getline(terms, term, ',')) {
    term = trim(term);
    if (!term.empty()) l.enabled.insert(parse_key(c, "loss.enabled", [&](const std::string&) {
      return parse_loss_term(term);
    }));
  }
  l.generator_form = parse_key(c, "loss.generator_form", parse_generator_loss_form);
  l.kl_form = parse_key(c, "loss.kl_form", parse_kl_form);
  l.validate();
  return l;
}

TrainConfig train_config(const Config& c) {
  TrainConfig t;
  t.lr = c.get_double("train.lr");
  t.beta1 = c.get_double("train.beta1");
  t.beta2 = c.get_double("train.beta2");
  t.iterations = c.get_int("train.iterations");
  t.batch_size = c.get_int("train.batch_size");
  t.eval_every = c.get_int("train.eval_every");
  t.stage_ratio = c.get_int("train.stage_ratio");
  t.stage2 = c.get_bool("train.stage2");
  t.stage2_extra_losses = c.get_bool("train.stage2_extra_losses");
  t.seed = c.get_uint("seed");
  t.validate();
  return t;
}

DatasetSpec dataset_spec(const Config& c) {
  DatasetSpec s = DatasetSpec::preset(c.get("data.preset"));
  if (c.is_explicit("data.tile_h")) s.tile_h = c.get_int("data.tile_h");
  if (c.is_explicit("data.tile_w")) s.tile_w = c.get_int("data.tile_w");
  if (c.is_explicit("data.overlap_w")) s.overlap_w = c.get_double("data.overlap_w");
  if (c.is_explicit("data.overlap_h")) s.overlap_h = c.get_double("data.overlap_h");
  s.min_crack_pixels = c.get_int("data.min_crack_pixels");
  s.test_fraction = c.get_double("data.test_fraction");
  s.val_fraction = c.get_double("data.val_fraction");
  s.seed = c.get_uint("seed");
  s.validate();
  return s;
}

void resolve_presets(Config& c) {
  const DatasetSpec s = dataset_spec(c);
  auto num = [](double v) {
    for (int precision = 15;; ++precision) {
      std::ostringstream os;
      os.precision(precision);
      os << v;
      if (precision == 17 || std::stod(os.str()) == v) return os.str();
    }
  };
  c.set("data.tile_h", std::to_string(s.tile_h));
  c.set("data.tile_w", std::to_string(s.tile_w));
  c.set("data.overlap_w", num(s.overlap_w));
  c.set("data.overlap_h", num(s.overlap_h));
}

}  // namespace crackgan
