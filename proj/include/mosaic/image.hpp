// Dense real-valued rasters shared by the latent and pixel pipelines.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mosaic {

struct LatentSpace {};
struct PixelSpace {};

/// Row-major H x W x C grid of doubles. The Space tag keeps latent and pixel
/// rasters from being mixed up at call sites.
template <typename Space>
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || channels <= 0) {
      throw std::invalid_argument("Image: dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& operator()(int y, int x, int c) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c) const { return data_[index(y, x, c)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

using LatentImage = Image<LatentSpace>;
using PixelImage = Image<PixelSpace>;

template <typename Space>
void require_same_shape(const Image<Space>& a, const Image<Space>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

/// Four-tap bilinear stencil at a continuous pixel coordinate. Pixel centres
/// sit on integer coordinates, so a stencil exists iff x in [0, W-1] and
/// y in [0, H-1].
struct BilinearTaps {
  std::size_t pixel[4];
  double weight[4];
};

inline bool bilinear_taps(double x, double y, int height, int width, BilinearTaps& out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return false;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 > width - 2) x0 = width - 2;
  if (y0 > height - 2) y0 = height - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = width > 1 ? x - x0 : 0.0;
  const double fy = height > 1 ? y - y0 : 0.0;
  const int x1 = width > 1 ? x0 + 1 : x0;
  const int y1 = height > 1 ? y0 + 1 : y0;
  out.pixel[0] = static_cast<std::size_t>(y0) * width + x0;
  out.pixel[1] = static_cast<std::size_t>(y0) * width + x1;
  out.pixel[2] = static_cast<std::size_t>(y1) * width + x0;
  out.pixel[3] = static_cast<std::size_t>(y1) * width + x1;
  out.weight[0] = (1.0 - fx) * (1.0 - fy);
  out.weight[1] = fx * (1.0 - fy);
  out.weight[2] = (1.0 - fx) * fy;
  out.weight[3] = fx * fy;
  return true;
}

template <typename Space>
double sample_channel(const Image<Space>& img, const BilinearTaps& taps, int c) {
  const int nc = img.channels();
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += taps.weight[k] * img[taps.pixel[k] * nc + c];
  return v;
}

}  // namespace mosaic
