// Depth-weighted cross-view projection loss on predicted clean latents.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/image.hpp"
#include "mosaic/pixel_refine.hpp"
#include "mosaic/warp.hpp"

namespace mosaic {

/// exp(-a d_i) / (exp(-a d_i) + exp(-a d_j)) evaluated as a logistic; the
/// closer view gets the larger weight.
inline double depth_weight(double d_i, double d_j, double alpha) {
  const double x = alpha * (d_j - d_i);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Per ordered pair (i, j), per source pixel of i: w_ij with d_i from view i's
/// depth and d_j the depth of the same point in view j.
using WeightTable = std::vector<std::vector<std::vector<double>>>;

inline WeightTable compute_pair_weights(const WarpTable& warps, const std::vector<DepthMap>& depths, double alpha) {
  const std::size_t n = warps.size();
  WeightTable out(n, std::vector<std::vector<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const WarpField& w = warps[i][j];
      auto& wt = out[i][j];
      wt.assign(w.size(), 0.0);
      for (std::size_t p = 0; p < w.size(); ++p) {
        if (w.valid[p] && depths[i].valid(p)) wt[p] = depth_weight(depths[i].depth(p), w.tz[p], alpha);
      }
    }
  }
  return out;
}

/// sum over ordered pairs and co-visible pixels of w * |z_j(pi_ij p) - z_i(p)|^2,
/// divided by the number of (pair, pixel) terms, with its exact gradient.
/// Pass weights = nullptr for the unweighted loss.
inline LossWithGradient projection_loss(const std::vector<LatentImage>& z0_hats, const WarpTable& warps,
                                        const WeightTable* weights) {
  const std::size_t n = z0_hats.size();
  LossWithGradient out;
  for (const auto& z : z0_hats) {
    require_same_shape(z, z0_hats.front(), "projection_loss");
    out.gradient.emplace_back(z.height(), z.width(), z.channels());
  }
  if (n < 2) {
    out.no_overlap = true;
    return out;
  }
  if (warps.size() != n) throw std::invalid_argument("projection_loss: warp table does not match N");
  const int h = z0_hats.front().height(), w = z0_hats.front().width(), nc = z0_hats.front().channels();

  std::size_t terms = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& wf = warps[i][j];
      if (wf.height != h || wf.width != w) throw std::invalid_argument("projection_loss: warp resolution mismatch");
      for (std::size_t p = 0; p < wf.size(); ++p) {
        BilinearTaps taps;
        if (wf.valid[p] && bilinear_taps(wf.tx[p], wf.ty[p], h, w, taps)) ++terms;
      }
    }
  }
  if (terms == 0) {
    out.no_overlap = true;
    return out;
  }
  out.terms = terms;
  const double inv = 1.0 / static_cast<double>(terms);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& wf = warps[i][j];
      const LatentImage& zi = z0_hats[i];
      const LatentImage& zj = z0_hats[j];
      LatentImage& gi = out.gradient[i];
      LatentImage& gj = out.gradient[j];
      for (std::size_t p = 0; p < wf.size(); ++p) {
        BilinearTaps taps;
        if (!wf.valid[p] || !bilinear_taps(wf.tx[p], wf.ty[p], h, w, taps)) continue;
        const double wt = weights ? (*weights)[i][j][p] : 1.0;
        for (int c = 0; c < nc; ++c) {
          const double diff = sample_channel(zj, taps, c) - zi[p * nc + c];
          sum += wt * diff * diff;
          const double g = 2.0 * wt * diff * inv;
          gi[p * nc + c] -= g;
          for (int k = 0; k < 4; ++k) gj[taps.pixel[k] * nc + c] += g * taps.weight[k];
        }
      }
    }
  }
  out.value = sum * inv;
  return out;
}

}  // namespace mosaic
