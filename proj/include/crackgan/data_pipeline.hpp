#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crackgan/maps.hpp"
#include "crackgan/tensor.hpp"

namespace crackgan {

struct TilePair {
  Tensor image;  // 3×H×W in [0, 1]
  BinaryMask mask;
  std::string source_id;
  int row = 0;  // origin in the source image
  int col = 0;
  int rotation = 0;  // 0, 90, 180, 270

  // <stem>_r<row>_c<col>_rot<deg>
  std::string name() const;
  void validate() const;
};

struct DatasetSpec {
  std::string name = "custom";
  int tile_h = 0;  // 0 keeps the full image
  int tile_w = 0;
  double overlap_w = 0.0;
  double overlap_h = 0.0;
  std::int64_t min_crack_pixels = 1000;
  double test_fraction = 0.1;
  double val_fraction = 0.1;  // of train_val
  std::uint64_t seed = 0;

  void validate() const;
  static DatasetSpec preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

// 0, s, 2s, … with s = floor(tile·(1 − overlap)) plus a final start at
// dim − tile when the regular windows stop short of the edge.
std::vector<int> tile_starts(int dim, int tile, double overlap);

std::vector<TilePair> crop_with_overlap(const Tensor& image, const BinaryMask& mask, const std::string& source_id,
                                        int tile_h, int tile_w, double overlap_w, double overlap_h);

// Keeps tiles with strictly more than `min_crack_pixels` crack pixels.
std::vector<TilePair> filter_min_crack(const std::vector<TilePair>& tiles, std::int64_t min_crack_pixels);

// Clockwise quarter turn: pixel (r, c) of an H×W tile lands at (c, H−1−r).
TilePair rotate90(const TilePair& tile);
// The tile and its 90, 180 and 270 degree rotations.
std::vector<TilePair> augment_rotations(const TilePair& tile);

struct Split {
  std::vector<TilePair> train_val;
  std::vector<TilePair> test;
};

// Rotations of one source window (same source_id and origin) form a group;
// round(test_fraction · groups) groups go to the test side.
Split split_dataset(const std::vector<TilePair>& tiles, double test_fraction, std::uint64_t seed);

// Deterministic order: source_id, row, col, rotation.
void sort_tiles(std::vector<TilePair>& tiles);

struct PrepareSummary {
  int sources = 0;
  int tiles_cropped = 0;
  int tiles_kept = 0;
  int train = 0, val = 0, test = 0;
};

// Reads <root>/images/<stem>.{png,jpg,jpeg} with <root>/masks/<stem>.png and
// writes <out>/{images,masks}/<tile>.png plus <out>/manifest.csv.
PrepareSummary prepare_dataset(const std::string& root, const std::string& out, const DatasetSpec& spec);

struct ManifestEntry {
  std::string name;
  std::string split;  // train, val, test
  std::int64_t crack_pixels = 0;
};

std::vector<ManifestEntry> read_tile_manifest(const std::string& dir);

struct Sample {
  std::string id;
  Tensor image;  // 3×H×W
  BinaryMask mask;
};

// Tiles of one split ("train", "val", "test") of a prepared directory.
std::vector<Sample> load_split(const std::string& dir, const std::string& split);

// Stacks samples[indices] into N×3×H×W images and N×1×H×W masks.
void assemble_batch(const std::vector<Sample>& samples, const std::vector<int>& indices, Tensor& images,
                    Tensor& masks);

}  // namespace crackgan
