#include "crackgan/image_io.hpp"

#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "crackgan/error.hpp"

namespace crackgan {

namespace {

cv::Mat load(const std::string& path, int flags) {
  cv::Mat m = cv::imread(path, flags);
  if (m.empty()) throw InputError("cannot read image '" + path + "'");
  if (m.depth() != CV_8U) throw InputError("image '" + path + "' is not 8-bit");
  return m;
}

void store(const std::string& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path, m);
  } catch (const cv::Exception& e) {
    throw InputError("cannot write image '" + path + "': " + e.what());
  }
  if (!ok) throw InputError("cannot write image '" + path + "'");
}

std::uint8_t quantize(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw NumericError("pixel value " + std::to_string(v) + " outside [0, 1]");
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

Tensor read_rgb(const std::string& path) {
  cv::Mat bgr = load(path, cv::IMREAD_COLOR);
  Tensor t({3, bgr.rows, bgr.cols});
  double* d = t.data();
  const std::size_t plane = static_cast<std::size_t>(bgr.rows) * bgr.cols;
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * bgr.cols + c;
      for (int ch = 0; ch < 3; ++ch) d[ch * plane + i] = row[c][2 - ch] / 255.0;
    }
  }
  return t;
}

void write_rgb(const std::string& path, const Tensor& image) {
  require_rank(image, 3, "write_rgb");
  if (image.dim(0) != 3) throw ShapeError("write_rgb expects 3 channels, got " + to_string(image.shape()));
  const int h = image.dim(1), w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  cv::Mat bgr(h, w, CV_8UC3);
  const double* d = image.data();
  for (int r = 0; r < h; ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      for (int ch = 0; ch < 3; ++ch) row[c][2 - ch] = quantize(d[ch * plane + i]);
    }
  }
  store(path, bgr);
}

BinaryMask read_mask(const std::string& path) {
  cv::Mat g = load(path, cv::IMREAD_GRAYSCALE);
  double max_value = 0;
  cv::minMaxLoc(g, nullptr, &max_value);
  const int cut = max_value <= 1 ? 0 : 127;
  BinaryMask m(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    const auto* row = g.ptr<std::uint8_t>(r);
    for (int c = 0; c < g.cols; ++c) m.at(r, c) = row[c] > cut ? 1 : 0;
  }
  return m;
}

void write_mask(const std::string& path, const BinaryMask& mask) {
  cv::Mat g(mask.height, mask.width, CV_8UC1);
  for (int r = 0; r < mask.height; ++r) {
    auto* row = g.ptr<std::uint8_t>(r);
    for (int c = 0; c < mask.width; ++c) row[c] = mask.at(r, c) ? 255 : 0;
  }
  store(path, g);
}

void write_probability(const std::string& path, const ProbabilityMap& map) {
  cv::Mat g(map.height, map.width, CV_8UC1);
  for (int r = 0; r < map.height; ++r) {
    auto* row = g.ptr<std::uint8_t>(r);
    for (int c = 0; c < map.width; ++c) row[c] = quantize(map.at(r, c));
  }
  store(path, g);
}

ProbabilityMap read_probability(const std::string& path) {
  cv::Mat g = load(path, cv::IMREAD_GRAYSCALE);
  ProbabilityMap p(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    const auto* row = g.ptr<std::uint8_t>(r);
    for (int c = 0; c < g.cols; ++c) p.at(r, c) = row[c] / 255.0;
  }
  return p;
}

}  // namespace crackgan
