// Synchronized multi-view DDIM sampling with inference-time guidance.
//
// Every reverse step first takes the ordinary per-view DDIM step, then runs a
// few rounds of gradient descent on the stepped latents so that their clean
// predictions agree across views (and, late in sampling, with the fused
// pixel rendering).
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/codec.hpp"
#include "mosaic/ddim.hpp"
#include "mosaic/denoiser.hpp"
#include "mosaic/parallel.hpp"
#include "mosaic/pixel_refine.hpp"
#include "mosaic/projection_loss.hpp"
#include "mosaic/warp.hpp"

namespace mosaic {

enum class GradMode { kApproxIdentity, kExactJacobian };

inline GradMode parse_grad_mode(const std::string& s) {
  if (s == "approx_identity") return GradMode::kApproxIdentity;
  if (s == "exact_jacobian") return GradMode::kExactJacobian;
  throw std::invalid_argument("grad_mode: expected approx_identity or exact_jacobian, got '" + s + "'");
}

inline const char* to_string(GradMode m) {
  return m == GradMode::kApproxIdentity ? "approx_identity" : "exact_jacobian";
}

struct GuidanceConfig {
  double alpha_depth = 1.0;
  int inner_steps = 3;
  double step_size = 0.1;
  GradMode grad_mode = GradMode::kApproxIdentity;
  double pixel_refine_window = 0.2;  // fraction of the schedule, counted from t = 0
  bool depth_weighting = true;       // false: every co-visible pair weighs 1
  bool pixel_refine = true;
  int max_halvings = 4;
  bool allow_isolated_views = false;

  void validate() const {
    if (!(alpha_depth >= 0.0) || !std::isfinite(alpha_depth)) {
      throw std::invalid_argument("guidance.alpha_depth must be finite and >= 0");
    }
    if (inner_steps < 0) throw std::invalid_argument("guidance.inner_steps must be >= 0");
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) {
      throw std::invalid_argument("guidance.step_size must be finite and >= 0");
    }
    if (!(pixel_refine_window >= 0.0 && pixel_refine_window <= 1.0)) {
      throw std::invalid_argument("guidance.pixel_refine_window must lie in [0, 1]");
    }
    if (max_halvings < 0) throw std::invalid_argument("guidance.max_halvings must be >= 0");
  }
};

/// Geometry and conditioning of a view set, at both resolutions.
struct ViewSet {
  std::vector<CameraPose> poses;          // pixel resolution
  std::vector<DepthMap> pixel_depths;
  std::vector<DepthMap> latent_depths;
  WarpTable pixel_warps;
  WarpTable latent_warps;
  std::vector<Condition> conditions;

  std::size_t size() const { return conditions.size(); }
};

/// Builds a view set from pixel-resolution poses and depths. view_ids key the
/// per-view noise streams; pass trajectory frame indices so that nested sets
/// share noise.
inline ViewSet build_view_set(std::vector<CameraPose> poses, std::vector<DepthMap> pixel_depths,
                              const std::vector<Palette>& palettes, const std::vector<int>& view_ids,
                              double tau_occ = 0.01) {
  if (poses.empty()) throw std::invalid_argument("build_view_set: no views");
  if (pixel_depths.size() != poses.size() || view_ids.size() != poses.size()) {
    throw std::invalid_argument("build_view_set: poses, depths and view ids disagree on N");
  }
  ViewSet vs;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    poses[i].validate();
    const DepthMap& d = pixel_depths[i];
    if (d.height() != poses[i].height || d.width() != poses[i].width) {
      throw std::invalid_argument("build_view_set: depth " + std::to_string(i) + " does not match its camera");
    }
    if (d.height() % 2 != 0 || d.width() % 2 != 0) {
      throw std::invalid_argument("build_view_set: pixel dimensions must be even");
    }
    vs.latent_depths.push_back(d.min_pool2());
  }
  vs.pixel_warps = compute_all_warps(poses, pixel_depths, tau_occ);
  vs.latent_warps = downsample_warps(vs.pixel_warps);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    vs.conditions.emplace_back(vs.latent_depths[i], palettes, view_ids[i]);
  }
  vs.poses = std::move(poses);
  vs.pixel_depths = std::move(pixel_depths);
  return vs;
}

/// Indices of views with no co-visible latent pixel in any other view.
inline std::vector<int> isolated_views(const ViewSet& vs) {
  std::vector<int> out;
  const std::size_t n = vs.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool linked = false;
    for (std::size_t j = 0; j < n && !linked; ++j) {
      if (i == j) continue;
      linked = vs.latent_warps[i][j].valid_count() > 0 || vs.latent_warps[j][i].valid_count() > 0;
    }
    if (!linked && n > 1) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// One reverse step's guidance outcome; losses are the mean-normalised values
/// at the final accepted latents.
struct StepRecord {
  int step = 0;
  int t = 0;
  double l_proj = 0.0;
  double l_pixel = 0.0;
  double total = 0.0;
  int accepted = 0;
  bool pixel_active = false;
  bool no_overlap = false;
};

/// The N synchronized channels at noise level t.
struct ChannelState {
  std::vector<LatentImage> latents;
  int t = 0;
  std::shared_ptr<const ViewSet> views;
  std::shared_ptr<const WeightTable> weights;  // null: unweighted loss
};

template <typename D>
  requires NoisePredictor<D, Condition>
ChannelState initial_state(std::shared_ptr<const ViewSet> views, const D&, const DdimSchedule& sched,
                           const GuidanceConfig& cfg, std::uint64_t seed) {
  if (!views || views->size() == 0) throw std::invalid_argument("initial_state: empty view set");
  ChannelState s;
  s.t = sched.num_steps();
  for (const auto& c : views->conditions) s.latents.push_back(initial_latent(c, seed, sched));
  if (cfg.depth_weighting) {
    s.weights = std::make_shared<const WeightTable>(
        compute_pair_weights(views->latent_warps, views->latent_depths, cfg.alpha_depth));
  }
  s.views = std::move(views);
  return s;
}

namespace detail {

struct Objective {
  std::vector<LatentImage> z0;
  LossWithGradient proj;
  LossWithGradient pixel;
  bool pixel_active = false;

  double value() const {
    double v = proj.value * static_cast<double>(proj.terms);
    if (pixel_active) v += pixel.value * static_cast<double>(pixel.terms);
    return v;
  }
};

// Clean predictions for latents at noise level `level` (identity at level 0).
template <typename D>
std::vector<LatentImage> clean_predictions(const D& denoiser, const ViewSet& vs, const std::vector<LatentImage>& y,
                                           int level, const DdimSchedule& sched) {
  if (level == 0) return y;
  std::vector<LatentImage> out(y.size());
  parallel_for(y.size(), [&](std::size_t i) {
    out[i] = predict_z0(y[i], denoiser.predict_eps(y[i], level, vs.conditions[i], sched), level, sched);
  });
  return out;
}

inline std::vector<LatentImage> refinement_targets(const std::vector<LatentImage>& z0, const ViewSet& vs,
                                                   double alpha, const ToyCodec& codec) {
  std::vector<PixelImage> decoded;
  decoded.reserve(z0.size());
  for (const auto& z : z0) decoded.push_back(decode(z, codec));
  return pixel_targets(fuse_views_pixel(decoded, vs.pixel_warps, vs.pixel_depths, alpha), codec);
}

template <typename D>
Objective evaluate(const D& denoiser, const ChannelState& s, const std::vector<LatentImage>& y, int level,
                   const DdimSchedule& sched, const std::vector<LatentImage>* targets) {
  Objective o;
  o.z0 = clean_predictions(denoiser, *s.views, y, level, sched);
  o.proj = projection_loss(o.z0, s.views->latent_warps, s.weights.get());
  if (targets) {
    o.pixel = pixel_refinement_loss_targets(o.z0, *targets);
    o.pixel_active = true;
  }
  return o;
}

}  // namespace detail

/// Gradient of the summed objective with respect to the latents y at noise
/// level `level`, given the gradient g with respect to their clean predictions.
template <typename D>
std::vector<LatentImage> chain_to_latents(const D& denoiser, const ViewSet& vs, const std::vector<LatentImage>& y,
                                          std::vector<LatentImage> g, int level, const DdimSchedule& sched,
                                          GradMode mode) {
  if (level == 0) return g;
  if (mode == GradMode::kApproxIdentity) {
    const double k = 1.0 / std::sqrt(sched.alpha(level));
    for (auto& gi : g) {
      for (double& v : gi.data()) v *= k;
    }
    return g;
  }
  if constexpr (ExactJacobianDenoiser<D, Condition>) {
    // the posterior-mean Jacobian is symmetric, so J^T g = J g
    std::vector<LatentImage> out(g.size());
    parallel_for(g.size(), [&](std::size_t i) {
      out[i] = denoiser.z0_jacobian_vecprod(y[i], level, vs.conditions[i], sched, g[i]);
    });
    return out;
  } else {
    throw std::invalid_argument("grad_mode exact_jacobian: denoiser exposes no Jacobian-vector product");
  }
}

/// True when step t falls inside the late pixel-refinement window.
inline bool pixel_window_active(const GuidanceConfig& cfg, int t, int num_steps) {
  return cfg.pixel_refine && cfg.pixel_refine_window > 0.0 &&
         static_cast<double>(t) <= cfg.pixel_refine_window * static_cast<double>(num_steps);
}

/// Advances all channels from t to t - 1.
template <typename D>
  requires NoisePredictor<D, Condition>
ChannelState guided_step(const ChannelState& state, const D& denoiser, const DdimSchedule& sched,
                         const GuidanceConfig& cfg, const ToyCodec& codec, std::uint64_t seed,
                         StepRecord* record = nullptr) {
  const ViewSet& vs = *state.views;
  const int t = state.t;
  sched.require_step(t, "guided_step");
  if (state.latents.size() != vs.size()) throw std::invalid_argument("guided_step: latent count does not match views");

  ChannelState next{std::vector<LatentImage>(vs.size()), t - 1, state.views, state.weights};
  parallel_for(vs.size(), [&](std::size_t i) {
    next.latents[i] = denoise_step(denoiser, vs.conditions[i], state.latents[i], t, sched, seed);
  });
  StepRecord rec;
  rec.step = sched.num_steps() - t;
  rec.t = t;

  const int level = t - 1;
  const bool pixel_on = pixel_window_active(cfg, t, sched.num_steps());
  rec.pixel_active = pixel_on;
  if (vs.size() >= 2 && cfg.inner_steps > 0) {
    std::vector<LatentImage> targets;
    auto current = detail::evaluate(denoiser, state, next.latents, level, sched, nullptr);
    if (current.proj.no_overlap) {
      rec.no_overlap = true;
    } else {
      const double step = cfg.step_size * std::sqrt(1.0 - sched.alpha(t));
      for (int it = 0; it < cfg.inner_steps; ++it) {
        if (pixel_on) {
          targets = detail::refinement_targets(current.z0, vs, cfg.alpha_depth, codec);
          current.pixel = pixel_refinement_loss_targets(current.z0, targets);
          current.pixel_active = true;
        }
        std::vector<LatentImage> g = std::move(current.proj.gradient);
        const double np = static_cast<double>(current.proj.terms);
        for (std::size_t i = 0; i < g.size(); ++i) {
          for (std::size_t e = 0; e < g[i].size(); ++e) {
            double v = g[i][e] * np;
            if (pixel_on) v += current.pixel.gradient[i][e] * static_cast<double>(current.pixel.terms);
            g[i][e] = v;
          }
        }
        current.proj.gradient.clear();
        g = chain_to_latents(denoiser, vs, next.latents, std::move(g), level, sched, cfg.grad_mode);

        const double before = current.value();
        bool accepted = false;
        double eta = step;
        for (int h = 0; h <= cfg.max_halvings && !accepted; ++h, eta *= 0.5) {
          std::vector<LatentImage> y = next.latents;
          for (std::size_t i = 0; i < y.size(); ++i) {
            for (std::size_t e = 0; e < y[i].size(); ++e) y[i][e] -= eta * g[i][e];
          }
          auto trial = detail::evaluate(denoiser, state, y, level, sched, pixel_on ? &targets : nullptr);
          if (trial.value() <= before) {
            next.latents = std::move(y);
            current = std::move(trial);
            accepted = true;
          }
        }
        if (!accepted) break;
        ++rec.accepted;
      }
      rec.l_proj = current.proj.value;
      rec.l_pixel = pixel_on ? current.pixel.value : 0.0;
    }
  }
  rec.total = rec.l_proj + rec.l_pixel;

  for (std::size_t i = 0; i < next.latents.size(); ++i) {
    if (!next.latents[i].all_finite()) {
      throw std::runtime_error("guided_step: non-finite latent in view " + std::to_string(i) + " at t = " +
                               std::to_string(t) + " (step_size " + std::to_string(cfg.step_size) + ")");
    }
  }
  if (record) *record = rec;
  return next;
}

struct MosaicResult {
  std::vector<LatentImage> latents;  // z_0 per view
  std::vector<PixelImage> images;    // decoded
  std::vector<StepRecord> trace;
  bool no_overlap = false;           // at least one step found nothing to align
};

/// Full synchronized sampling run.
template <typename D>
  requires NoisePredictor<D, Condition>
MosaicResult sample_mosaic(std::shared_ptr<const ViewSet> views, const D& denoiser, const DdimSchedule& sched,
                           const GuidanceConfig& cfg, const ToyCodec& codec, std::uint64_t seed) {
  cfg.validate();
  if (!views) throw std::invalid_argument("sample_mosaic: null view set");
  if (!cfg.allow_isolated_views) {
    const auto lonely = isolated_views(*views);
    if (!lonely.empty()) {
      throw std::invalid_argument("sample_mosaic: view " + std::to_string(lonely.front()) +
                                  " overlaps no other view (set allow_isolated_views to sample anyway)");
    }
  }
  ChannelState s = initial_state(std::move(views), denoiser, sched, cfg, seed);
  MosaicResult out;
  out.trace.reserve(static_cast<std::size_t>(sched.num_steps()));
  while (s.t > 0) {
    StepRecord rec;
    s = guided_step(s, denoiser, sched, cfg, codec, seed, &rec);
    out.no_overlap = out.no_overlap || rec.no_overlap;
    out.trace.push_back(rec);
  }
  out.latents = std::move(s.latents);
  for (const auto& z : out.latents) out.images.push_back(decode(z, codec));
  return out;
}

/// Independent per-view sampling of the same view set (the baseline).
template <typename D>
  requires NoisePredictor<D, Condition>
MosaicResult sample_independent_views(const ViewSet& views, const D& denoiser, const DdimSchedule& sched,
                                      const ToyCodec& codec, std::uint64_t seed) {
  MosaicResult out;
  out.latents.resize(views.size());
  parallel_for(views.size(), [&](std::size_t i) {
    out.latents[i] = sample_independent(denoiser, views.conditions[i], sched, seed);
  });
  for (const auto& z : out.latents) out.images.push_back(decode(z, codec));
  return out;
}

}  // namespace mosaic
