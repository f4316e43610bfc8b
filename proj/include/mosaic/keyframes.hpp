// Greedy region-coverage key-frame selection.
#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/scene.hpp"
#include "mosaic/warp.hpp"

namespace mosaic {

struct KeyFrameSelection {
  std::vector<int> indices;
  double coverage = 0.0;          // covered atlas cells / cells seen by the whole trajectory
  bool target_unreached = false;  // best effort: coverage_target was not met
};

struct KeyFrameParams {
  double min_overlap = 0.3;
  double coverage_target = 0.9;
  int max_frames = 0;  // 0 = unlimited
  double tau_occ = 0.01;
};

/// Atlas cells visible in a rendered view.
inline std::unordered_set<std::int64_t> visible_cells(const ViewRender& r) {
  std::unordered_set<std::int64_t> cells;
  for (auto c : r.cell) {
    if (c >= 0) cells.insert(c);
  }
  return cells;
}

/// Repeatedly adds the frame that covers the most new world surface, among
/// frames overlapping at least one selected frame by min_overlap (the first
/// pick is exempt). Ties go to the lower trajectory index.
inline KeyFrameSelection select_key_frames(const std::vector<CameraPose>& trajectory, const SceneWorld& world,
                                           const KeyFrameParams& params) {
  if (trajectory.empty()) throw std::invalid_argument("select_key_frames: trajectory is empty");
  if (!(params.min_overlap > 0.0 && params.min_overlap < 1.0)) {
    throw std::invalid_argument("select_key_frames: min_overlap must lie in (0, 1)");
  }
  const std::size_t n = trajectory.size();
  std::vector<ViewRender> renders;
  std::vector<std::unordered_set<std::int64_t>> cells;
  std::unordered_set<std::int64_t> reachable;
  for (const auto& pose : trajectory) {
    renders.push_back(render_view_detailed(world, pose));
    cells.push_back(visible_cells(renders.back()));
    reachable.insert(cells.back().begin(), cells.back().end());
  }

  KeyFrameSelection sel;
  if (reachable.empty()) {
    sel.target_unreached = true;
    return sel;
  }
  std::unordered_set<std::int64_t> covered;
  std::vector<char> chosen(n, 0);
  // overlap[c][s] caches candidate -> selected overlap ratios
  std::vector<std::vector<double>> overlap(n, std::vector<double>(n, -1.0));
  auto overlap_of = [&](std::size_t c, std::size_t s) {
    if (overlap[c][s] < 0.0) {
      overlap[c][s] = overlap_ratio(compute_warp(trajectory[c], renders[c].depth, trajectory[s],
                                                 renders[s].depth, params.tau_occ));
    }
    return overlap[c][s];
  };

  while (true) {
    if (params.max_frames > 0 && static_cast<int>(sel.indices.size()) >= params.max_frames) break;
    if (static_cast<double>(covered.size()) / reachable.size() >= params.coverage_target) break;
    std::size_t best = n;
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < n; ++c) {
      if (chosen[c]) continue;
      std::size_t gain = 0;
      for (auto cell : cells[c]) gain += covered.count(cell) == 0 ? 1 : 0;
      if (gain <= best_gain) continue;
      if (!sel.indices.empty()) {
        bool admissible = false;
        for (int s : sel.indices) {
          if (overlap_of(c, static_cast<std::size_t>(s)) >= params.min_overlap) {
            admissible = true;
            break;
          }
        }
        if (!admissible) continue;
      }
      best = c;
      best_gain = gain;
    }
    if (best == n) break;
    chosen[best] = 1;
    sel.indices.push_back(static_cast<int>(best));
    covered.insert(cells[best].begin(), cells[best].end());
  }
  sel.coverage = static_cast<double>(covered.size()) / static_cast<double>(reachable.size());
  sel.target_unreached = sel.coverage < params.coverage_target;
  return sel;
}

}  // namespace mosaic
