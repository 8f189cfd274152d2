#include "crackgan/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "crackgan/error.hpp"
#include "crackgan/image_io.hpp"

namespace crackgan {

namespace fs = std::filesystem;

std::string TilePair::name() const {
  return source_id + "_r" + std::to_string(row) + "_c" + std::to_string(col) + "_rot" + std::to_string(rotation);
}

void TilePair::validate() const {
  require_rank(image, 3, "tile image");
  if (image.dim(0) != 3 || image.dim(1) != mask.height || image.dim(2) != mask.width) {
    throw ShapeError("tile " + name() + ": image " + to_string(image.shape()) + " vs mask " +
                     std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
  if (rotation % 90 != 0 || rotation < 0 || rotation > 270) {
    throw InputError("tile " + name() + ": rotation must be 0, 90, 180 or 270");
  }
  for (auto v : mask.pixels) {
    if (v > 1) throw InputError("tile " + name() + ": mask is not binary");
  }
}

void DatasetSpec::validate() const {
  if (tile_h < 0 || tile_w < 0 || (tile_h == 0) != (tile_w == 0)) {
    throw ConfigError("data.tile_h / data.tile_w must both be positive, or both 0 for uncropped");
  }
  if (!(overlap_w >= 0 && overlap_w < 1)) throw ConfigError("data.overlap_w must lie in [0, 1)");
  if (!(overlap_h >= 0 && overlap_h < 1)) throw ConfigError("data.overlap_h must lie in [0, 1)");
  if (!(test_fraction >= 0 && test_fraction < 1)) throw ConfigError("data.test_fraction must lie in [0, 1)");
  if (!(val_fraction >= 0 && val_fraction < 1)) throw ConfigError("data.val_fraction must lie in [0, 1)");
}

DatasetSpec DatasetSpec::preset(const std::string& name) {
  DatasetSpec s;
  s.name = name;
  if (name == "CRACK500") {
    s.tile_h = s.tile_w = 512;
    s.overlap_w = s.overlap_h = 0.1;
  } else if (name == "CrackTree260") {
    s.tile_h = s.tile_w = 512;
    s.overlap_w = 0.3;
    s.overlap_h = 0.1;
  } else if (name == "CrackLS315" || name == "CRKWH100" || name == "custom") {
  } else if (name == "CFD") {
    s.tile_h = s.tile_w = 320;
    s.overlap_w = 0.2;
  } else if (name == "DeepCrack") {
    s.tile_h = s.tile_w = 384;
    s.overlap_w = 0.2;
  } else {
    throw ConfigError("data.preset: unknown dataset '" + name + "'");
  }
  return s;
}

std::vector<std::string> DatasetSpec::preset_names() {
  return {"CRACK500", "CrackTree260", "CrackLS315", "CFD", "DeepCrack", "CRKWH100", "custom"};
}

std::vector<int> tile_starts(int dim, int tile, double overlap) {
  if (tile < 1 || tile > dim) {
    throw InputError("tile size " + std::to_string(tile) + " does not fit in dimension " + std::to_string(dim));
  }
  if (!(overlap >= 0 && overlap < 1)) throw InputError("overlap must lie in [0, 1)");
  const int stride = std::max(1, static_cast<int>(std::floor(tile * (1.0 - overlap))));
  std::vector<int> starts;
  int s = 0;
  for (; s + tile <= dim; s += stride) starts.push_back(s);
  if (starts.back() + tile < dim) starts.push_back(dim - tile);
  return starts;
}

std::vector<TilePair> crop_with_overlap(const Tensor& image, const BinaryMask& mask, const std::string& source_id,
                                        int tile_h, int tile_w, double overlap_w, double overlap_h) {
  require_rank(image, 3, "crop_with_overlap image");
  const int h = image.dim(1), w = image.dim(2);
  if (image.dim(0) != 3 || mask.height != h || mask.width != w) {
    throw InputError("source '" + source_id + "': image and mask sizes differ");
  }
  if (tile_h > h || tile_w > w) {
    throw InputError("source '" + source_id + "': tile " + std::to_string(tile_h) + "x" + std::to_string(tile_w) +
                     " larger than image " + std::to_string(h) + "x" + std::to_string(w));
  }
  const auto rows = tile_starts(h, tile_h, overlap_h);
  const auto cols = tile_starts(w, tile_w, overlap_w);
  std::vector<TilePair> tiles;
  tiles.reserve(rows.size() * cols.size());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t tile_plane = static_cast<std::size_t>(tile_h) * tile_w;
  for (int r0 : rows) {
    for (int c0 : cols) {
      TilePair t;
      t.source_id = source_id;
      t.row = r0;
      t.col = c0;
      t.image = Tensor({3, tile_h, tile_w});
      t.mask = BinaryMask(tile_h, tile_w);
      for (int ch = 0; ch < 3; ++ch) {
        for (int r = 0; r < tile_h; ++r) {
          const double* src = image.data() + ch * plane + static_cast<std::size_t>(r0 + r) * w + c0;
          std::copy(src, src + tile_w, t.image.data() + ch * tile_plane + static_cast<std::size_t>(r) * tile_w);
        }
      }
      for (int r = 0; r < tile_h; ++r) {
        for (int c = 0; c < tile_w; ++c) t.mask.at(r, c) = mask.at(r0 + r, c0 + c);
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<TilePair> filter_min_crack(const std::vector<TilePair>& tiles, std::int64_t min_crack_pixels) {
  std::vector<TilePair> kept;
  for (const auto& t : tiles) {
    if (t.mask.count() > min_crack_pixels) kept.push_back(t);
  }
  return kept;
}

TilePair rotate90(const TilePair& tile) {
  const int h = tile.mask.height, w = tile.mask.width;
  TilePair out;
  out.source_id = tile.source_id;
  out.row = tile.row;
  out.col = tile.col;
  out.rotation = (tile.rotation + 90) % 360;
  out.image = Tensor({3, w, h});
  out.mask = BinaryMask(w, h);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t src = static_cast<std::size_t>(r) * w + c;
      const std::size_t dst = static_cast<std::size_t>(c) * h + (h - 1 - r);
      for (int ch = 0; ch < 3; ++ch) out.image[ch * plane + dst] = tile.image[ch * plane + src];
      out.mask.pixels[dst] = tile.mask.pixels[src];
    }
  }
  return out;
}

std::vector<TilePair> augment_rotations(const TilePair& tile) {
  std::vector<TilePair> out{tile};
  for (int k = 1; k < 4; ++k) out.push_back(rotate90(out.back()));
  return out;
}

namespace {

using GroupKey = std::tuple<std::string, int, int>;

GroupKey group_key(const TilePair& t) { return {t.source_id, t.row, t.col}; }

}  // namespace

Split split_dataset(const std::vector<TilePair>& tiles, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0 && test_fraction < 1)) throw ConfigError("data.test_fraction must lie in [0, 1)");
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < tiles.size(); ++i) groups[group_key(tiles[i])].push_back(i);
  std::vector<GroupKey> keys;
  for (const auto& [k, _] : groups) keys.push_back(k);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own index draw so the order does not depend on the
  // standard library's shuffle.
  for (std::size_t i = keys.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(keys[i - 1], keys[j]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(keys.size())));
  std::vector<char> in_test(tiles.size(), 0);
  for (std::size_t g = 0; g < n_test; ++g) {
    for (auto i : groups[keys[g]]) in_test[i] = 1;
  }
  Split s;
  for (std::size_t i = 0; i < tiles.size(); ++i) (in_test[i] ? s.test : s.train_val).push_back(tiles[i]);
  return s;
}

void sort_tiles(std::vector<TilePair>& tiles) {
  std::stable_sort(tiles.begin(), tiles.end(), [](const TilePair& a, const TilePair& b) {
    return std::tie(a.source_id, a.row, a.col, a.rotation) < std::tie(b.source_id, b.row, b.col, b.rotation);
  });
}

namespace {

std::string find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG"}) {
    const auto p = dir / (stem + ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

}  // namespace

PrepareSummary prepare_dataset(const std::string& root, const std::string& out, const DatasetSpec& spec) {
  spec.validate();
  const fs::path image_dir = fs::path(root) / "images";
  const fs::path mask_dir = fs::path(root) / "masks";
  if (!fs::is_directory(image_dir)) throw ConfigError("data.root: missing directory '" + image_dir.string() + "'");
  if (!fs::is_directory(mask_dir)) throw ConfigError("data.root: missing directory '" + mask_dir.string() + "'");

  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(mask_dir)) {
    if (e.path().extension() == ".png") stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw InputError("no masks found in '" + mask_dir.string() + "'");

  PrepareSummary summary;
  std::vector<TilePair> tiles;
  for (const auto& stem : stems) {
    const std::string image_path = find_image(image_dir, stem);
    if (image_path.empty()) throw InputError("mask '" + stem + ".png' has no matching image");
    const Tensor image = read_rgb(image_path);
    const BinaryMask mask = read_mask((mask_dir / (stem + ".png")).string());
    const int th = spec.tile_h ? spec.tile_h : image.dim(1);
    const int tw = spec.tile_w ? spec.tile_w : image.dim(2);
    auto cropped = crop_with_overlap(image, mask, stem, th, tw, spec.overlap_w, spec.overlap_h);
    summary.tiles_cropped += static_cast<int>(cropped.size());
    for (auto& t : filter_min_crack(cropped, spec.min_crack_pixels)) {
      for (auto& r : augment_rotations(t)) tiles.push_back(std::move(r));
    }
    ++summary.sources;
  }
  sort_tiles(tiles);

  Split outer = split_dataset(tiles, spec.test_fraction, spec.seed);
  Split inner = split_dataset(outer.train_val, spec.val_fraction, spec.seed + 1);

  const fs::path out_dir(out);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  std::vector<std::pair<const TilePair*, const char*>> rows;
  for (const auto& t : inner.train_val) rows.emplace_back(&t, "train");
  for (const auto& t : inner.test) rows.emplace_back(&t, "val");
  for (const auto& t : outer.test) rows.emplace_back(&t, "test");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first->source_id, a.first->row, a.first->col, a.first->rotation) <
           std::tie(b.first->source_id, b.first->row, b.first->col, b.first->rotation);
  });

  std::ofstream manifest(out_dir / "manifest.csv");
  if (!manifest) throw InputError("cannot write '" + (out_dir / "manifest.csv").string() + "'");
  manifest << "name,split,crack_pixels\n";
  for (const auto& [t, split] : rows) {
    const std::string name = t->name();
    write_rgb((out_dir / "images" / (name + ".png")).string(), t->image);
    write_mask((out_dir / "masks" / (name + ".png")).string(), t->mask);
    manifest << name << ',' << split << ',' << t->mask.count() << '\n';
  }
  summary.tiles_kept = static_cast<int>(tiles.size());
  summary.train = static_cast<int>(inner.train_val.size());
  summary.val = static_cast<int>(inner.test.size());
  summary.test = static_cast<int>(outer.test.size());
  return summary;
}

std::vector<ManifestEntry> read_tile_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.csv";
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "name,split,crack_pixels") {
    throw InputError("'" + path.string() + "': expected header 'name,split,crack_pixels'");
  }
  std::vector<ManifestEntry> entries;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string count;
    if (!std::getline(ls, e.name, ',') || !std::getline(ls, e.split, ',') || !std::getline(ls, count)) {
      throw InputError("'" + path.string() + "': malformed row " + std::to_string(row));
    }
    try {
      e.crack_pixels = std::stoll(count);
    } catch (const std::exception&) {
      throw InputError("'" + path.string() + "': bad crack_pixels in row " + std::to_string(row));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<Sample> load_split(const std::string& dir, const std::string& split) {
  std::vector<Sample> out;
  for (const auto& e : read_tile_manifest(dir)) {
    if (e.split != split) continue;
    Sample s;
    s.id = e.name;
    s.image = read_rgb((fs::path(dir) / "images" / (e.name + ".png")).string());
    s.mask = read_mask((fs::path(dir) / "masks" / (e.name + ".png")).string());
    out.push_back(std::move(s));
  }
  return out;
}

void assemble_batch(const std::vector<Sample>& samples, const std::vector<int>& indices, Tensor& images,
                    Tensor& masks) {
  if (indices.empty()) throw InputError("assemble_batch: empty batch");
  const Sample& first = samples.at(indices.front());
  const int h = first.mask.height, w = first.mask.width;
  const int n = static_cast<int>(indices.size());
  images = Tensor({n, 3, h, w});
  masks = Tensor({n, 1, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < n; ++b) {
    const Sample& s = samples.at(indices[b]);
    if (s.mask.height != h || s.mask.width != w) {
      throw ShapeError("batch mixes tile sizes: '" + s.id + "' differs from '" + first.id + "'");
    }
    std::copy(s.image.data(), s.image.data() + 3 * plane, images.data() + b * 3 * plane);
    for (std::size_t i = 0; i < plane; ++i) masks[b * plane + i] = s.mask.pixels[i];
  }
}

}  // namespace crackgan
