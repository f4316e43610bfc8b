// Toy latent <-> pixel codec standing in for a VAE.
//
// decode: 2x upsample, then the pointwise map phi(z) = (1 + tanh z) / 2.
// encode: phi^-1, then 2x2 area averaging.
//
// The upsampler interpolates linearly inside each latent cell using the
// central-difference slope, so every 2x2 output block averages back to its
// source value and encode(decode(z)) == z up to rounding.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "mosaic/image.hpp"

namespace mosaic {

struct ToyCodec {
  double beta = 1.0;  // scale applied when re-encoding fused pixels into targets

  static double phi(double z) { return 0.5 + 0.5 * std::tanh(z); }
  static double phi_inverse(double x) { return std::atanh(2.0 * x - 1.0); }
  static double phi_derivative(double z) {
    const double t = std::tanh(z);
    return 0.5 * (1.0 - t * t);
  }
  // encode clamps into this interval before inverting
  static constexpr double kPixelLo = 1e-9;
  static constexpr double kPixelHi = 1.0 - 1e-9;
};

namespace detail {

template <typename In, typename Out>
void upsample_rows(const Image<In>& in, Image<Out>& out) {
  const int w = in.width(), nc = in.channels();
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      const double span = static_cast<double>(xr - xl);
      for (int c = 0; c < nc; ++c) {
        const double slope = span > 0 ? (in(y, xr, c) - in(y, xl, c)) / span : 0.0;
        out(y, 2 * x, c) = in(y, x, c) - 0.25 * slope;
        out(y, 2 * x + 1, c) = in(y, x, c) + 0.25 * slope;
      }
    }
  }
}

template <typename In, typename Out>
void upsample_cols(const Image<In>& in, Image<Out>& out) {
  const int h = in.height(), nc = in.channels();
  for (int y = 0; y < h; ++y) {
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
    const double span = static_cast<double>(yd - yu);
    for (int x = 0; x < in.width(); ++x) {
      for (int c = 0; c < nc; ++c) {
        const double slope = span > 0 ? (in(yd, x, c) - in(yu, x, c)) / span : 0.0;
        out(2 * y, x, c) = in(y, x, c) - 0.25 * slope;
        out(2 * y + 1, x, c) = in(y, x, c) + 0.25 * slope;
      }
    }
  }
}

}  // namespace detail

/// Mean-preserving 2x linear upsampling (before the pointwise map).
inline PixelImage upsample2(const LatentImage& z) {
  Image<LatentSpace> wide(z.height(), 2 * z.width(), z.channels());
  detail::upsample_rows(z, wide);
  PixelImage out(2 * z.height(), 2 * z.width(), z.channels());
  detail::upsample_cols(wide, out);
  return out;
}

inline LatentImage area_downsample2(const PixelImage& x) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw std::invalid_argument("area_downsample2: pixel dimensions must be even");
  }
  LatentImage out(x.height() / 2, x.width() / 2, x.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int u = 0; u < out.width(); ++u) {
      for (int c = 0; c < x.channels(); ++c) {
        out(y, u, c) = 0.25 * (x(2 * y, 2 * u, c) + x(2 * y, 2 * u + 1, c) + x(2 * y + 1, 2 * u, c) +
                               x(2 * y + 1, 2 * u + 1, c));
      }
    }
  }
  return out;
}

inline PixelImage decode(const LatentImage& z, const ToyCodec&) {
  PixelImage out = upsample2(z);
  for (double& v : out.data()) v = ToyCodec::phi(v);
  return out;
}

struct Encoded {
  LatentImage latent;
  std::size_t clamped = 0;  // pixels outside phi's open range that were clamped
};

inline Encoded encode_checked(const PixelImage& x, const ToyCodec&) {
  PixelImage pre(x.height(), x.width(), x.channels());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    if (!(v >= ToyCodec::kPixelLo && v <= ToyCodec::kPixelHi)) {
      v = std::isnan(v) ? 0.5 : std::clamp(v, ToyCodec::kPixelLo, ToyCodec::kPixelHi);
      ++clamped;
    }
    pre[i] = ToyCodec::phi_inverse(v);
  }
  return {area_downsample2(pre), clamped};
}

inline LatentImage encode(const PixelImage& x, const ToyCodec& codec) { return encode_checked(x, codec).latent; }

}  // namespace mosaic
