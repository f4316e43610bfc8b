// Cross-view consistency and style metrics.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mosaic/image.hpp"
#include "mosaic/warp.hpp"

namespace mosaic {

inline constexpr double kPsnrCap = 99.0;

/// PSNR in dB with MAX = 1 over pixels where mask is non-zero; an empty vector
/// selects every pixel. Zero error returns the 99 dB cap.
inline double psnr(const PixelImage& a, const PixelImage& b, const std::vector<std::uint8_t>& mask) {
  require_same_shape(a, b, "psnr");
  if (!mask.empty() && mask.size() != a.pixel_count()) throw std::invalid_argument("psnr: mask size mismatch");
  const int nc = a.channels();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (!mask.empty() && !mask[p]) continue;
    for (int c = 0; c < nc; ++c) {
      const double d = a[p * nc + c] - b[p * nc + c];
      sum += d * d;
    }
    count += static_cast<std::size_t>(nc);
  }
  if (count == 0) throw std::invalid_argument("psnr: empty mask");
  const double mse = sum / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

/// View j resampled into view i's frame along warps[i][j]; mask marks pixels
/// of i whose warp is valid with four in-frame taps.
struct PairResample {
  PixelImage image;
  std::vector<std::uint8_t> mask;
  std::size_t count = 0;
};

inline PairResample resample_pair(const std::vector<PixelImage>& views, const WarpTable& warps, std::size_t i,
                                  std::size_t j) {
  const PixelImage& vi = views[i];
  const PixelImage& vj = views[j];
  const WarpField& w = warps[i][j];
  if (w.height != vi.height() || w.width != vi.width()) {
    throw std::invalid_argument("metrics: warp resolution does not match the views");
  }
  PairResample out{PixelImage(vi.height(), vi.width(), vi.channels()), std::vector<std::uint8_t>(w.size(), 0), 0};
  const int nc = vi.channels();
  for (std::size_t p = 0; p < w.size(); ++p) {
    BilinearTaps taps;
    if (!w.valid[p] || !bilinear_taps(w.tx[p], w.ty[p], vj.height(), vj.width(), taps)) continue;
    for (int c = 0; c < nc; ++c) out.image[p * nc + c] = sample_channel(vj, taps, c);
    out.mask[p] = 1;
    ++out.count;
  }
  return out;
}

/// Mean masked PSNR over ordered co-visible pairs; nullopt when no pair is
/// co-visible.
inline std::optional<double> warped_psnr(const std::vector<PixelImage>& views, const WarpTable& gt_warps) {
  if (gt_warps.size() != views.size()) throw std::invalid_argument("warped_psnr: warp table does not match N");
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = 0; j < views.size(); ++j) {
      if (i == j) continue;
      const auto r = resample_pair(views, gt_warps, i, j);
      if (r.count == 0) continue;
      sum += psnr(r.image, views[i], r.mask);
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return sum / pairs;
}

inline double warped_ratio(double method_db, double gt_db) {
  if (!(gt_db > 0.0)) throw std::invalid_argument("warped_ratio: GT warped PSNR must be positive");
  return std::max(0.0, method_db / gt_db);
}

/// Mean absolute cross-view discrepancy over ordered pairs, co-visible pixels
/// and channels (pooled over all terms). 0 when nothing is co-visible.
inline double consistency_error(const std::vector<PixelImage>& views, const WarpTable& gt_warps) {
  if (gt_warps.size() != views.size()) throw std::invalid_argument("consistency_error: warp table does not match N");
  double sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = 0; j < views.size(); ++j) {
      if (i == j) continue;
      const auto r = resample_pair(views, gt_warps, i, j);
      const int nc = views[i].channels();
      for (std::size_t p = 0; p < r.mask.size(); ++p) {
        if (!r.mask[p]) continue;
        for (int c = 0; c < nc; ++c) sum += std::abs(r.image[p * nc + c] - views[i][p * nc + c]);
        terms += static_cast<std::size_t>(nc);
      }
    }
  }
  return terms ? sum / static_cast<double>(terms) : 0.0;
}

/// Index of the reference nearest (L2) to the image; ties go to the lower index.
inline int nearest_reference(const PixelImage& image, const std::vector<PixelImage>& references) {
  if (references.empty()) throw std::invalid_argument("nearest_reference: no references");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < references.size(); ++k) {
    require_same_shape(image, references[k], "nearest_reference");
    double d = 0.0;
    for (std::size_t e = 0; e < image.size(); ++e) {
      const double x = image[e] - references[k][e];
      d += x * x;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

/// Largest fraction of views classified to the same palette. references[i][k]
/// is palette k rendered for view i.
inline double palette_agreement(const std::vector<PixelImage>& views,
                                const std::vector<std::vector<PixelImage>>& references,
                                std::vector<int>* labels = nullptr) {
  if (views.empty()) throw std::invalid_argument("palette_agreement: no views");
  if (references.size() != views.size()) throw std::invalid_argument("palette_agreement: references do not match N");
  const std::size_t k = references.front().size();
  std::vector<int> counts(k, 0);
  std::vector<int> cls;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (references[i].size() != k) throw std::invalid_argument("palette_agreement: palette count differs per view");
    cls.push_back(nearest_reference(views[i], references[i]));
    ++counts[static_cast<std::size_t>(cls.back())];
  }
  if (labels) *labels = cls;
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(views.size());
}

}  // namespace mosaic
