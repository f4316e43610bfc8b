// Fusion of per-view images onto the world's surface atlas.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/image.hpp"
#include "mosaic/scene.hpp"

namespace mosaic {

/// One colour per atlas cell. Cells no view saw have hits == 0 and value 0.
struct SceneCanvas {
  int channels = 3;
  std::vector<double> values;         // cell-major, channels per cell
  std::vector<std::uint32_t> hits;    // contributing pixels per cell

  SceneCanvas() = default;
  SceneCanvas(std::int64_t cells, int nc)
      : channels(nc), values(static_cast<std::size_t>(cells) * nc, 0.0), hits(static_cast<std::size_t>(cells), 0) {}

  std::size_t cells() const { return hits.size(); }
  bool covered(std::size_t cell) const { return hits[cell] > 0; }
  double value(std::size_t cell, int c) const { return values[cell * channels + c]; }
  std::size_t covered_count() const {
    std::size_t n = 0;
    for (auto h : hits) n += h > 0;
    return n;
  }
};

/// Per-cell softmax(-alpha * depth) average over every pixel of every view
/// that landed in the cell. cell_maps hold the atlas cell per pixel (-1 for
/// none), as produced by render_view_detailed.
inline SceneCanvas fuse_canvas(const std::vector<PixelImage>& images, const std::vector<DepthMap>& depths,
                               const std::vector<std::vector<std::int64_t>>& cell_maps, std::int64_t total_cells,
                               double alpha) {
  if (images.empty()) throw std::invalid_argument("fuse_canvas: no views");
  if (depths.size() != images.size() || cell_maps.size() != images.size()) {
    throw std::invalid_argument("fuse_canvas: images, depths and cell maps disagree on N");
  }
  const int nc = images.front().channels();
  SceneCanvas canvas(total_cells, nc);
  // running max logit per cell keeps the exponentials in range for any alpha
  std::vector<double> top(canvas.cells(), -std::numeric_limits<double>::infinity());
  std::vector<double> norm(canvas.cells(), 0.0);
  for (std::size_t v = 0; v < images.size(); ++v) {
    const auto& img = images[v];
    if (img.channels() != nc) throw std::invalid_argument("fuse_canvas: channel count differs between views");
    if (depths[v].size() != img.pixel_count() || cell_maps[v].size() != img.pixel_count()) {
      throw std::invalid_argument("fuse_canvas: depth or cell map does not match image " + std::to_string(v));
    }
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      const std::int64_t cell = cell_maps[v][p];
      if (cell < 0 || !depths[v].valid(p)) continue;
      if (cell >= total_cells) throw std::out_of_range("fuse_canvas: atlas cell out of range");
      const auto k = static_cast<std::size_t>(cell);
      const double logit = -alpha * depths[v].depth(p);
      if (logit > top[k]) {
        const double scale = std::exp(top[k] - logit);
        norm[k] *= scale;
        for (int c = 0; c < nc; ++c) canvas.values[k * nc + c] *= scale;
        top[k] = logit;
      }
      const double w = std::exp(logit - top[k]);
      norm[k] += w;
      for (int c = 0; c < nc; ++c) canvas.values[k * nc + c] += w * img[p * nc + c];
      ++canvas.hits[k];
    }
  }
  for (std::size_t k = 0; k < canvas.cells(); ++k) {
    if (canvas.hits[k] == 0) continue;
    for (int c = 0; c < nc; ++c) canvas.values[k * nc + c] /= norm[k];
  }
  return canvas;
}

}  // namespace mosaic
