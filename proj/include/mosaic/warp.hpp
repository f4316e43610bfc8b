// Dense correspondences between two views of the same world.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mosaic/camera.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

/// For every pixel p of the source view i, the continuous coordinate of the
/// same surface point in target view j (this realises pi_ij: resampling view
/// j at these coordinates brings it into view i's frame), plus the point's
/// depth in view j and a validity mask (in frustum and unoccluded).
struct WarpField {
  int source = 0;
  int target = 0;
  int height = 0;
  int width = 0;
  int target_height = 0;
  int target_width = 0;
  std::vector<double> tx, ty, tz;
  std::vector<std::uint8_t> valid;

  WarpField() = default;
  WarpField(int src, int tgt, int h, int w, int th, int tw)
      : source(src), target(tgt), height(h), width(w), target_height(th), target_width(tw),
        tx(static_cast<std::size_t>(h) * w, 0.0), ty(tx), tz(tx), valid(tx.size(), 0) {}

  std::size_t size() const { return valid.size(); }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v;
    return n;
  }
};

namespace detail {

// Depth of view j at a continuous location, interpolating inverse depth so
// that planar surfaces are reproduced exactly. Requires four valid taps.
inline std::optional<double> sample_depth(const DepthMap& d, double x, double y) {
  BilinearTaps taps;
  if (!bilinear_taps(x, y, d.height(), d.width(), taps)) return std::nullopt;
  double inv = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (!d.valid(taps.pixel[k])) return std::nullopt;
    inv += taps.weight[k] / d.depth(taps.pixel[k]);
  }
  return 1.0 / inv;
}

// Rounding can push a border pixel a hair outside the image.
inline double snap_to_range(double x, double hi) {
  constexpr double kSnap = 1e-9;
  if (x < 0.0 && x > -kSnap) return 0.0;
  if (x > hi && x < hi + kSnap) return hi;
  return x;
}

}  // namespace detail

inline WarpField compute_warp(const CameraPose& pose_i, const DepthMap& depth_i, const CameraPose& pose_j,
                              const DepthMap& depth_j, double tau_occ, int source_id = 0, int target_id = 1) {
  WarpField w(source_id, target_id, depth_i.height(), depth_i.width(), depth_j.height(), depth_j.width());
  const Eigen::Matrix3d rel = pose_j.rotation.transpose() * pose_i.rotation;
  const Eigen::Vector3d off = pose_j.rotation.transpose() * (pose_i.translation - pose_j.translation);
  for (int v = 0; v < depth_i.height(); ++v) {
    for (int u = 0; u < depth_i.width(); ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * depth_i.width() + u;
      if (!depth_i.valid(i)) continue;
      const double d = depth_i.depth(i);
      const Eigen::Vector3d ci((u - pose_i.cx) / pose_i.fx * d, (v - pose_i.cy) / pose_i.fy * d, d);
      const Eigen::Vector3d cj = rel * ci + off;
      if (!(cj.z() > 0.0)) continue;
      const double x = detail::snap_to_range(pose_j.fx * cj.x() / cj.z() + pose_j.cx, depth_j.width() - 1);
      const double y = detail::snap_to_range(pose_j.fy * cj.y() / cj.z() + pose_j.cy, depth_j.height() - 1);
      const auto dj = detail::sample_depth(depth_j, x, y);
      if (!dj || std::abs(*dj - cj.z()) > tau_occ) continue;
      w.tx[i] = x;
      w.ty[i] = y;
      w.tz[i] = cj.z();
      w.valid[i] = 1;
    }
  }
  return w;
}

inline double overlap_ratio(const WarpField& w) {
  if (w.size() == 0) return 0.0;
  return static_cast<double>(w.valid_count()) / static_cast<double>(w.size());
}

/// Half-resolution warp: a latent pixel is valid when all four of its source
/// pixels are; its target is the mean of theirs mapped to latent coordinates.
inline WarpField downsample_warp(const WarpField& w) {
  WarpField out(w.source, w.target, w.height / 2, w.width / 2, w.target_height / 2, w.target_width / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double sx = 0.0, sy = 0.0, sz = 0.0;
      bool ok = true;
      for (int dy = 0; dy < 2 && ok; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t i = static_cast<std::size_t>(2 * y + dy) * w.width + 2 * x + dx;
          if (!w.valid[i]) {
            ok = false;
            break;
          }
          sx += w.tx[i];
          sy += w.ty[i];
          sz += w.tz[i];
        }
      }
      if (!ok) continue;
      const double lx = detail::snap_to_range((sx / 4.0 - 0.5) / 2.0, out.target_width - 1);
      const double ly = detail::snap_to_range((sy / 4.0 - 0.5) / 2.0, out.target_height - 1);
      if (!(lx >= 0.0 && ly >= 0.0 && lx <= out.target_width - 1 && ly <= out.target_height - 1)) continue;
      const std::size_t o = static_cast<std::size_t>(y) * out.width + x;
      out.tx[o] = lx;
      out.ty[o] = ly;
      out.tz[o] = sz / 4.0;
      out.valid[o] = 1;
    }
  }
  return out;
}

/// Target coordinate of a warp at a continuous source location, given the
/// source view's depth. The homogeneous targets (tx, ty, 1) * tz / depth are
/// interpolated, which reproduces a planar surface exactly. The four taps
/// must be valid and lie on one plane: inverse depth and homogeneous targets
/// affine over the stencil and its valid 4x4 neighbourhood. Locations near
/// depth edges or creases have no value.
inline std::optional<Eigen::Vector2d> interpolate_warp(const WarpField& w, const DepthMap& source_depth, double x,
                                                       double y) {
  if (source_depth.height() != w.height || source_depth.width() != w.width) {
    throw std::invalid_argument("interpolate_warp: depth does not match the warp's source");
  }
  BilinearTaps taps;
  if (!bilinear_taps(x, y, w.height, w.width, taps)) return std::nullopt;
  // homogeneous target and inverse depth
  const auto sample = [&](int u, int v) -> std::optional<Eigen::Vector4d> {
    if (u < 0 || v < 0 || u >= w.width || v >= w.height) return std::nullopt;
    const std::size_t q = static_cast<std::size_t>(v) * w.width + u;
    if (!w.valid[q] || !source_depth.valid(q)) return std::nullopt;
    const double inv = 1.0 / source_depth.depth(q);
    const double s = w.tz[q] * inv;
    return Eigen::Vector4d(w.tx[q] * s, w.ty[q] * s, s, inv);
  };
  // a + d == b + c, to a tolerance loose enough for float32 depth rasters
  const auto affine = [](const Eigen::Vector4d& a, const Eigen::Vector4d& b, const Eigen::Vector4d& c,
                         const Eigen::Vector4d& d) {
    const Eigen::Vector4d scale = a.cwiseAbs().cwiseMax(b.cwiseAbs()).cwiseMax(c.cwiseAbs()).cwiseMax(d.cwiseAbs());
    return ((a + d - b - c).cwiseAbs().array() <= 1e-6 * scale.array()).all();
  };

  const int x0 = static_cast<int>(taps.pixel[0] % static_cast<std::size_t>(w.width));
  const int y0 = static_cast<int>(taps.pixel[0] / static_cast<std::size_t>(w.width));
  const int x1 = static_cast<int>(taps.pixel[3] % static_cast<std::size_t>(w.width));
  const int y1 = static_cast<int>(taps.pixel[3] / static_cast<std::size_t>(w.width));
  std::optional<Eigen::Vector4d> g[4] = {sample(x0, y0), sample(x1, y0), sample(x0, y1), sample(x1, y1)};
  for (const auto& gk : g) {
    if (!gk) return std::nullopt;
  }
  if (!affine(*g[0], *g[1], *g[2], *g[3])) return std::nullopt;
  // second differences through the stencil along each axis
  for (int v : {y0, y1}) {
    const auto left = sample(x0 - 1, v), right = sample(x1 + 1, v);
    const auto& a = v == y0 ? *g[0] : *g[2];
    const auto& b = v == y0 ? *g[1] : *g[3];
    if (x1 > x0 && left && !affine(*left, a, a, b)) return std::nullopt;
    if (x1 > x0 && right && !affine(a, b, b, *right)) return std::nullopt;
  }
  for (int u : {x0, x1}) {
    const auto up = sample(u, y0 - 1), down = sample(u, y1 + 1);
    const auto& a = u == x0 ? *g[0] : *g[1];
    const auto& b = u == x0 ? *g[2] : *g[3];
    if (y1 > y0 && up && !affine(*up, a, a, b)) return std::nullopt;
    if (y1 > y0 && down && !affine(a, b, b, *down)) return std::nullopt;
  }
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  for (int k = 0; k < 4; ++k) h += taps.weight[k] * *g[k];
  return Eigen::Vector2d(h[0] / h[2], h[1] / h[2]);
}

/// Brings `img` (view j) into view i's frame; pixels with an invalid warp stay
/// zero and are cleared in `mask`.
template <typename Space>
Image<Space> resample(const Image<Space>& img, const WarpField& w, std::vector<std::uint8_t>& mask) {
  Image<Space> out(w.height, w.width, img.channels());
  mask.assign(w.size(), 0);
  const int nc = img.channels();
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (!w.valid[p]) continue;
    BilinearTaps taps;
    if (!bilinear_taps(w.tx[p], w.ty[p], img.height(), img.width(), taps)) continue;
    for (int c = 0; c < nc; ++c) out[p * nc + c] = sample_channel(img, taps, c);
    mask[p] = 1;
  }
  return out;
}

/// Ordered-pair warps for a view set; entry [i][j] maps view i's pixels into
/// view j. Diagonal entries are empty.
using WarpTable = std::vector<std::vector<WarpField>>;

inline WarpTable compute_all_warps(const std::vector<CameraPose>& poses, const std::vector<DepthMap>& depths,
                                   double tau_occ) {
  const std::size_t n = poses.size();
  WarpTable table(n, std::vector<WarpField>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      table[i][j] = compute_warp(poses[i], depths[i], poses[j], depths[j], tau_occ, static_cast<int>(i),
                                 static_cast<int>(j));
    }
  }
  return table;
}

inline WarpTable downsample_warps(const WarpTable& table) {
  WarpTable out(table.size(), std::vector<WarpField>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < table.size(); ++j) {
      if (i != j) out[i][j] = downsample_warp(table[i][j]);
    }
  }
  return out;
}

}  // namespace mosaic
