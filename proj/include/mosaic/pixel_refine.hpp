// Depth-weighted pixel fusion and the pixel-space refinement loss.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/codec.hpp"
#include "mosaic/image.hpp"
#include "mosaic/warp.hpp"

namespace mosaic {

/// For each view i: softmax(-alpha * depth) weighted blend over every view j
/// whose warp into i is valid at the pixel (j = i uses its own depth, j != i
/// uses the point's depth in view j). Pixels seen only by i are unchanged.
inline std::vector<PixelImage> fuse_views_pixel(const std::vector<PixelImage>& decoded, const WarpTable& warps,
                                                const std::vector<DepthMap>& depths, double alpha) {
  const std::size_t n = decoded.size();
  if (warps.size() != n || depths.size() != n) {
    throw std::invalid_argument("fuse_views_pixel: views, warps and depths disagree on N");
  }
  struct Contribution {
    double logit;
    std::size_t view;
    BilinearTaps taps;
  };
  std::vector<PixelImage> out;
  out.reserve(n);
  std::vector<Contribution> contrib;
  contrib.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PixelImage& xi = decoded[i];
    const int nc = xi.channels();
    PixelImage fused = xi;
    std::vector<double> acc(static_cast<std::size_t>(nc));
    for (std::size_t p = 0; p < xi.pixel_count(); ++p) {
      contrib.clear();
      if (depths[i].valid(p)) contrib.push_back({-alpha * depths[i].depth(p), i, {}});
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const WarpField& w = warps[i][j];
        if (w.size() == 0 || !w.valid[p]) continue;
        Contribution c{-alpha * w.tz[p], j, {}};
        if (!bilinear_taps(w.tx[p], w.ty[p], decoded[j].height(), decoded[j].width(), c.taps)) continue;
        contrib.push_back(c);
      }
      if (contrib.size() <= 1) continue;
      double mx = contrib.front().logit;
      for (const auto& c : contrib) mx = std::max(mx, c.logit);
      double norm = 0.0;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& c : contrib) {
        const double wgt = std::exp(c.logit - mx);
        norm += wgt;
        for (int ch = 0; ch < nc; ++ch) {
          const double v = c.view == i ? xi[p * nc + ch] : sample_channel(decoded[c.view], c.taps, ch);
          acc[static_cast<std::size_t>(ch)] += wgt * v;
        }
      }
      for (int ch = 0; ch < nc; ++ch) fused[p * nc + ch] = acc[static_cast<std::size_t>(ch)] / norm;
    }
    out.push_back(std::move(fused));
  }
  return out;
}

struct LossWithGradient {
  double value = 0.0;
  std::vector<LatentImage> gradient;
  std::size_t terms = 0;  // normalising count
  bool no_overlap = false;
};

/// Re-encoded fusion targets z* = beta * f(x*).
inline std::vector<LatentImage> pixel_targets(const std::vector<PixelImage>& fused, const ToyCodec& codec) {
  std::vector<LatentImage> out;
  out.reserve(fused.size());
  for (const auto& x : fused) {
    LatentImage z = encode(x, codec);
    for (double& v : z.data()) v *= codec.beta;
    out.push_back(std::move(z));
  }
  return out;
}

/// Mean squared distance between predictions and constant targets.
inline LossWithGradient pixel_refinement_loss_targets(const std::vector<LatentImage>& z0_hats,
                                                      const std::vector<LatentImage>& targets) {
  if (z0_hats.size() != targets.size()) throw std::invalid_argument("pixel_refinement_loss: N mismatch");
  LossWithGradient out;
  for (std::size_t i = 0; i < z0_hats.size(); ++i) {
    require_same_shape(z0_hats[i], targets[i], "pixel_refinement_loss");
    out.terms += z0_hats[i].size();
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < z0_hats.size(); ++i) {
    LatentImage g(z0_hats[i].height(), z0_hats[i].width(), z0_hats[i].channels());
    for (std::size_t e = 0; e < g.size(); ++e) {
      const double d = z0_hats[i][e] - targets[i][e];
      sum += d * d;
      g[e] = out.terms ? 2.0 * d / static_cast<double>(out.terms) : 0.0;
    }
    out.gradient.push_back(std::move(g));
  }
  out.value = out.terms ? sum / static_cast<double>(out.terms) : 0.0;
  return out;
}

inline LossWithGradient pixel_refinement_loss(const std::vector<LatentImage>& z0_hats,
                                              const std::vector<PixelImage>& fused_pixels, const ToyCodec& codec) {
  return pixel_refinement_loss_targets(z0_hats, pixel_targets(fused_pixels, codec));
}

}  // namespace mosaic
