#include "crackgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "crackgan/error.hpp"

namespace crackgan {

namespace {
constexpr char kMagic[8] = {'C', 'R', 'K', 'G', 'C', 'K', 'P', 'T'};
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::int64_t Checkpoint::parameter_elements(const std::string& prefix) const {
  const std::string key = prefix + "/param/";
  std::int64_t n = 0;
  for (const auto& [name, t] : tensors) {
    if (name.rfind(key, 0) == 0) n += static_cast<std::int64_t>(t.size());
  }
  return n;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json header;
  header["version"] = Checkpoint::kVersion;
  header["iteration"] = ck.iteration;
  header["config"] = ck.config;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ck.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write checkpoint " + path);
  const std::uint32_t version = Checkpoint::kVersion;
  const std::uint64_t length = text.size();
  os.write(kMagic, sizeof(kMagic));
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  os.write(reinterpret_cast<const char*>(&length), sizeof(length));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : ck.tensors) {
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw InputError("failed while writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read checkpoint " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  is.read(magic, sizeof(magic));
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw InputError(path + ": not a checkpoint file");
  if (version != Checkpoint::kVersion) {
    throw InputError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(length, '\0');
  is.read(text.data(), static_cast<std::streamsize>(length));
  if (!is) throw InputError(path + ": truncated header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.iteration = header.at("iteration").get<std::int64_t>();
    ck.config = header.at("config").get<std::map<std::string, std::string>>();
    for (const auto& entry : header.at("tensors")) {
      Tensor t(entry.at("shape").get<Shape>());
      is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
      if (!is) throw InputError(path + ": truncated tensor data");
      ck.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": malformed header: " + e.what());
  }
  return ck;
}

void append_network(Checkpoint& ck, const std::string& prefix, const Network& network) {
  for (const auto& p : network.store().parameters()) ck.tensors.emplace_back(prefix + "/param/" + p.name, p.var.value());
  for (const auto& b : network.store().buffers()) ck.tensors.emplace_back(prefix + "/buffer/" + b.name, b.var.value());
}

void restore_network(const Checkpoint& ck, const std::string& prefix, Network& network) {
  auto copy_into = [&](const std::string& kind, const std::vector<NamedVar>& list) {
    for (const auto& nv : list) {
      const std::string key = prefix + "/" + kind + "/" + nv.name;
      const Tensor* t = ck.find(key);
      if (!t) throw InputError("checkpoint has no tensor '" + key + "'");
      if (t->shape() != nv.var.shape()) {
        throw InputError("checkpoint tensor '" + key + "' has shape " + to_string(t->shape()) + ", network expects " +
                         to_string(nv.var.shape()));
      }
      Var v = nv.var;
      v.mutable_value() = *t;
    }
  };
  copy_into("param", network.store().parameters());
  copy_into("buffer", network.store().buffers());
}

}  // namespace crackgan
