#include "crackgan/manifest.hpp"

#include <fstream>
#include <sstream>

#include "crackgan/error.hpp"

namespace crackgan {

namespace {
constexpr const char* kColumns = "name\tkind\trole\tin\tout\tkernel\tout_h\tout_w\tparams\trepeat\tmacs";
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::linear:
      return "linear";
    case LayerKind::batch_norm:
      return "batch_norm";
    case LayerKind::activation:
      return "activation";
    case LayerKind::pool:
      return "pool";
    case LayerKind::upsample:
      return "upsample";
    case LayerKind::elementwise:
      return "elementwise";
    case LayerKind::matmul:
      return "matmul";
    case LayerKind::concat:
      return "concat";
  }
  return "unknown";
}

LayerKind parse_layer_kind(const std::string& text) {
  for (LayerKind k : {LayerKind::conv, LayerKind::linear, LayerKind::batch_norm, LayerKind::activation,
                      LayerKind::pool, LayerKind::upsample, LayerKind::elementwise, LayerKind::matmul,
                      LayerKind::concat}) {
    if (to_string(k) == text) return k;
  }
  throw InputError("unknown layer kind '" + text + "' in manifest");
}

std::int64_t LayerManifest::total_params() const {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.params;
  return total;
}

int LayerManifest::count(LayerKind kind, const std::string& role) const {
  int n = 0;
  for (const auto& l : layers) {
    if (l.kind == kind && (role.empty() || l.role == role)) ++n;
  }
  return n;
}

void write_manifest(std::ostream& os, const LayerManifest& m) {
  os << "# network=" << m.network << " variant=" << m.variant << " input=" << m.input_channels << 'x'
     << m.input_h << 'x' << m.input_w << " params=" << m.total_params() << '\n';
  os << kColumns << '\n';
  for (const auto& l : m.layers) {
    os << l.name << '\t' << to_string(l.kind) << '\t' << l.role << '\t' << l.in_channels << '\t' << l.out_channels
       << '\t' << l.kernel << '\t' << l.out_h << '\t' << l.out_w << '\t' << l.params << '\t' << l.repeat << '\t'
       << l.macs << '\n';
  }
}

LayerManifest read_manifest(std::istream& is) {
  LayerManifest m;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# network=", 0) != 0) {
    throw InputError("manifest: missing '# network=' header line");
  }
  {
    std::istringstream hs(line.substr(2));
    std::string field;
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "network") {
        m.network = value;
      } else if (key == "variant") {
        m.variant = value;
      } else if (key == "input") {
        char x1 = 0, x2 = 0;
        std::istringstream vs(value);
        if (!(vs >> m.input_channels >> x1 >> m.input_h >> x2 >> m.input_w) || x1 != 'x' || x2 != 'x') {
          throw InputError("manifest: malformed input shape '" + value + "'");
        }
      }
    }
  }
  if (!std::getline(is, line) || line != kColumns) throw InputError("manifest: missing column header");
  int line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    LayerRecord r;
    std::string kind;
    if (!(std::getline(ls, r.name, '\t') && std::getline(ls, kind, '\t') && std::getline(ls, r.role, '\t'))) {
      throw InputError("manifest line " + std::to_string(line_no) + ": missing name/kind/role");
    }
    r.kind = parse_layer_kind(kind);
    if (!(ls >> r.in_channels >> r.out_channels >> r.kernel >> r.out_h >> r.out_w >> r.params >> r.repeat >>
          r.macs)) {
      throw InputError("manifest line " + std::to_string(line_no) + " (" + r.name + "): missing shapes");
    }
    m.layers.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const std::string& path, const LayerManifest& manifest) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write manifest " + path);
  write_manifest(os, manifest);
}

LayerManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read manifest " + path);
  return read_manifest(is);
}

}  // namespace crackgan
