// End-to-end pipeline: scene -> views -> sampling -> metrics. Every function
// here is a pure function of the config and seed.
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mosaic/canvas.hpp"
#include "mosaic/codec.hpp"
#include "mosaic/config.hpp"
#include "mosaic/ddim.hpp"
#include "mosaic/denoiser.hpp"
#include "mosaic/keyframes.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/sampler.hpp"
#include "mosaic/scene.hpp"
#include "mosaic/variance.hpp"

namespace mosaic {

enum class SampleMode { kIndependent, kMosaic };

inline SampleMode parse_sample_mode(const std::string& s) {
  if (s == "independent") return SampleMode::kIndependent;
  if (s == "mosaic") return SampleMode::kMosaic;
  throw std::invalid_argument("mode: expected independent or mosaic, got '" + s + "'");
}

inline const char* to_string(SampleMode m) { return m == SampleMode::kMosaic ? "mosaic" : "independent"; }

inline std::vector<Palette> resolve_palettes(const std::vector<std::string>& names,
                                             const std::vector<Palette>& tables = {}) {
  const auto library = palette_library(tables);
  std::vector<Palette> out;
  for (const auto& n : names) {
    auto it = library.find(n);
    if (it == library.end()) throw std::invalid_argument("unknown palette '" + n + "'");
    out.push_back(it->second);
  }
  return out;
}

inline GmmDenoiser make_denoiser(const PriorConfig& p) {
  std::vector<double> w = p.weights.empty() ? std::vector<double>(p.palettes.size(), 1.0) : p.weights;
  return GmmDenoiser(std::move(w), p.component_std);
}

inline DdimSchedule make_schedule(const ScheduleConfig& s) { return make_schedule(s.num_steps, s.kind, s.eta); }

/// The generated world plus the views chosen for sampling.
struct PreparedScene {
  SceneWorld world;
  std::vector<CameraPose> trajectory;
  KeyFrameSelection keyframes;
  std::vector<CameraPose> poses;  // views to sample
  std::vector<int> view_ids;      // noise keys: trajectory indices (or explicit pose indices)
};

/// views > 0 overrides keyframes.max_frames.
inline PreparedScene prepare_scene(const RunConfig& cfg, int views = 0) {
  PreparedScene s{generate_scene(cfg.scene, cfg.scene_seed), {}, {}, {}, {}};
  if (!cfg.poses.empty()) {
    const std::size_t n = views > 0 ? std::min<std::size_t>(static_cast<std::size_t>(views), cfg.poses.size())
                                    : cfg.poses.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cfg.poses[i];
      s.poses.push_back(CameraPose::look(p.position, p.yaw_deg * std::numbers::pi / 180.0,
                                         p.pitch_deg * std::numbers::pi / 180.0, cfg.trajectory.width,
                                         cfg.trajectory.height, cfg.trajectory.hfov_deg));
      s.view_ids.push_back(static_cast<int>(i));
    }
    s.trajectory = s.poses;
    s.keyframes.indices = s.view_ids;
    s.keyframes.coverage = 1.0;
    return s;
  }
  s.trajectory = make_trajectory(s.world, cfg.trajectory);
  KeyFrameParams kp = cfg.keyframes;
  if (views > 0) kp.max_frames = views;
  s.keyframes = select_key_frames(s.trajectory, s.world, kp);
  for (int i : s.keyframes.indices) {
    s.poses.push_back(s.trajectory[static_cast<std::size_t>(i)]);
    s.view_ids.push_back(i);
  }
  return s;
}

struct RenderedViews {
  std::vector<DepthMap> depths;
  std::vector<PixelImage> gt;
  std::vector<std::vector<std::int64_t>> cells;
};

inline RenderedViews render_views(const SceneWorld& world, const std::vector<CameraPose>& poses) {
  RenderedViews r;
  for (const auto& p : poses) {
    auto v = render_view_detailed(world, p);
    if (v.inside_wall) throw std::invalid_argument("render_views: a camera sits inside a wall");
    r.depths.push_back(std::move(v.depth));
    r.gt.push_back(std::move(v.rgb));
    r.cells.push_back(std::move(v.cell));
  }
  return r;
}

inline std::shared_ptr<const ViewSet> make_view_set(const RunConfig& cfg, const std::vector<CameraPose>& poses,
                                                    const std::vector<DepthMap>& depths, const std::vector<int>& ids,
                                                    const std::vector<std::string>& palettes) {
  return std::make_shared<const ViewSet>(build_view_set(poses, depths, resolve_palettes(palettes, cfg.prior.tables), ids,
                                                        cfg.keyframes.tau_occ));
}

inline MosaicResult run_sampler(const RunConfig& cfg, std::shared_ptr<const ViewSet> views, SampleMode mode,
                                std::uint64_t seed, const GmmDenoiser& denoiser, const DdimSchedule& sched) {
  const ToyCodec codec{cfg.codec_beta};
  if (mode == SampleMode::kIndependent) return sample_independent_views(*views, denoiser, sched, codec, seed);
  return sample_mosaic(std::move(views), denoiser, sched, cfg.guidance, codec, seed);
}

/// Palette k's mixture mean for view i, decoded to pixels.
inline std::vector<std::vector<PixelImage>> palette_references(const ViewSet& views, const ToyCodec& codec) {
  std::vector<std::vector<PixelImage>> out;
  for (const auto& c : views.conditions) {
    std::vector<PixelImage> refs;
    for (const auto& m : c.means()) refs.push_back(decode(m, codec));
    out.push_back(std::move(refs));
  }
  return out;
}

struct MetricsRow {
  double consistency_error = 0.0;
  double warped_psnr = 0.0;
  double gt_warped_psnr = 0.0;
  double warped_ratio = 0.0;
  double palette_agreement = 0.0;
  bool covisible = true;  // false: no co-visible pair, PSNR columns are NaN
};

inline MetricsRow evaluate_views(const std::vector<PixelImage>& images, const ViewSet& views,
                                 const std::vector<PixelImage>& gt, const ToyCodec& codec) {
  MetricsRow m;
  m.consistency_error = consistency_error(images, views.pixel_warps);
  const auto w = warped_psnr(images, views.pixel_warps);
  const auto g = warped_psnr(gt, views.pixel_warps);
  m.palette_agreement = palette_agreement(images, palette_references(views, codec));
  if (!w || !g) {
    m.covisible = false;
    m.warped_psnr = m.gt_warped_psnr = m.warped_ratio = std::nan("");
    return m;
  }
  m.warped_psnr = *w;
  m.gt_warped_psnr = *g;
  m.warped_ratio = warped_ratio(*w, *g);
  return m;
}

/// Views for the variance experiment: one camera in the centre of room 0,
/// heading offsets of k * yaw_step for k = 0 .. max(view_counts) - 1.
struct VarianceViews {
  std::vector<CameraPose> poses;
  RenderedViews renders;
  std::vector<std::shared_ptr<const ViewSet>> sets;  // nested, one per view count
  double min_pair_overlap = 1.0;                    // over ordered pairs of the largest set
};

inline VarianceViews make_variance_views(const RunConfig& cfg, const SceneWorld& world) {
  VarianceViews v;
  Eigen::Vector3d c = world.rooms().front().centre();
  c.y() = cfg.trajectory.eye_height;
  const int n = cfg.variance.view_counts.back();
  for (int k = 0; k < n; ++k) {
    v.poses.push_back(CameraPose::look(c, k * cfg.variance.yaw_step_deg * std::numbers::pi / 180.0, 0.0,
                                       cfg.trajectory.width, cfg.trajectory.height, cfg.trajectory.hfov_deg));
  }
  v.renders = render_views(world, v.poses);
  for (int count : cfg.variance.view_counts) {
    std::vector<int> ids(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) ids[static_cast<std::size_t>(i)] = i;
    v.sets.push_back(make_view_set(cfg, {v.poses.begin(), v.poses.begin() + count},
                                   {v.renders.depths.begin(), v.renders.depths.begin() + count}, ids,
                                   cfg.variance.palettes));
  }
  const auto& largest = *v.sets.back();
  for (std::size_t i = 0; i < largest.size(); ++i) {
    for (std::size_t j = 0; j < largest.size(); ++j) {
      if (i != j) v.min_pair_overlap = std::min(v.min_pair_overlap, overlap_ratio(largest.pixel_warps[i][j]));
    }
  }
  return v;
}

/// Runs the nested-set variance experiment: repeat r of every set uses seed
/// seed_base + r, and each set's outputs are fused onto the surface atlas.
inline VarianceReport run_variance_experiment(const RunConfig& cfg, const SceneWorld& world, const VarianceViews& v) {
  PriorConfig prior = cfg.prior;
  prior.palettes = cfg.variance.palettes;
  prior.weights.clear();
  const GmmDenoiser den = make_denoiser(prior);
  const DdimSchedule sched = make_schedule(cfg.schedule);
  const ToyCodec codec{cfg.codec_beta};
  return variance_experiment(v.sets.size(), cfg.variance.repeats, [&](std::size_t s, int r) {
    const auto res = sample_mosaic(v.sets[s], den, sched, cfg.guidance, codec, cfg.variance.seed_base + r);
    const std::size_t n = v.sets[s]->size();
    return fuse_canvas(res.images, {v.renders.depths.begin(), v.renders.depths.begin() + n},
                       {v.renders.cells.begin(), v.renders.cells.begin() + n}, world.total_cells(),
                       cfg.guidance.alpha_depth);
  });
}

}  // namespace mosaic
