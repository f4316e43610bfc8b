// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mosaic/harness.hpp"
#include "mosaic/io.hpp"
#include "test_support.hpp"

using namespace mosaic;
namespace mt = mosaic::testing;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void verdict(int n, const char* name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", n, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <typename... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

void note(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Expected share of the most common palette when each of n views draws a
// palette independently with probabilities w, by enumerating every assignment.
struct AgreementBaseline {
  double mean = 0.0;
  double var = 0.0;
};

AgreementBaseline enumerate_agreement(const std::vector<double>& w, int n) {
  const std::size_t k = w.size();
  std::vector<std::size_t> pick(static_cast<std::size_t>(n), 0);
  double m1 = 0.0, m2 = 0.0;
  while (true) {
    double prob = 1.0;
    std::vector<int> counts(k, 0);
    for (std::size_t p : pick) {
      prob *= w[p];
      ++counts[p];
    }
    const double a = static_cast<double>(*std::max_element(counts.begin(), counts.end())) / n;
    m1 += prob * a;
    m2 += prob * a * a;
    std::size_t i = 0;
    while (i < pick.size() && ++pick[i] == k) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  return {m1, m2 - m1 * m1};
}

// ---------------------------------------------------------------- 1 and 2

struct ModeRuns {
  std::vector<double> consistency, warped, agreement;
  int undefined = 0;  // runs without a co-visible pair
};

void criteria_1_and_2() {
  constexpr int kScenes = 10, kSeeds = 20;
  ModeRuns mos, ind;
  std::vector<double> scene_mos_wr, scene_ind_wr;
  double worst_seconds = 0.0;
  int short_scenes = 0;
  for (int s = 0; s < kScenes; ++s) {
    RunConfig cfg;
    cfg.scene_seed = static_cast<std::uint64_t>(s);
    const auto prep_start = Clock::now();
    const PreparedScene scene = prepare_scene(cfg);
    if (scene.poses.size() != 4) ++short_scenes;
    const RenderedViews r = render_views(scene.world, scene.poses);
    const auto views = make_view_set(cfg, scene.poses, r.depths, scene.view_ids, cfg.prior.palettes);
    const GmmDenoiser den = make_denoiser(cfg.prior);
    const DdimSchedule sched = make_schedule(cfg.schedule);
    const ToyCodec codec{cfg.codec_beta};
    const double prep_seconds = seconds_since(prep_start);
    std::vector<double> wm, wi;
    for (int seed = 0; seed < kSeeds; ++seed) {
      for (SampleMode mode : {SampleMode::kMosaic, SampleMode::kIndependent}) {
        const auto t0 = Clock::now();
        const auto res = run_sampler(cfg, views, mode, static_cast<std::uint64_t>(seed), den, sched);
        const MetricsRow m = evaluate_views(res.images, *views, r.gt, codec);
        if (mode == SampleMode::kMosaic) worst_seconds = std::max(worst_seconds, prep_seconds + seconds_since(t0));
        ModeRuns& acc = mode == SampleMode::kMosaic ? mos : ind;
        acc.consistency.push_back(m.consistency_error);
        acc.agreement.push_back(m.palette_agreement);
        if (!m.covisible) {
          ++acc.undefined;
          continue;
        }
        acc.warped.push_back(m.warped_ratio);
        (mode == SampleMode::kMosaic ? wm : wi).push_back(m.warped_ratio);
      }
    }
    scene_mos_wr.push_back(wm.empty() ? std::nan("") : mean(wm));
    scene_ind_wr.push_back(wi.empty() ? std::nan("") : mean(wi));
    note(fmt("scene %d: %zu views, key-frame coverage %.3f, warped ratio mosaic %.3f independent %.3f", s,
             scene.poses.size(), scene.keyframes.coverage, scene_mos_wr.back(), scene_ind_wr.back()));
  }

  const double med_m = median(mos.consistency), med_i = median(ind.consistency);
  std::vector<double> paired;
  for (std::size_t k = 0; k < mos.consistency.size(); ++k) paired.push_back(mos.consistency[k] / ind.consistency[k]);
  const double wr_m = mos.warped.empty() ? 0.0 : mean(mos.warped);
  int scenes_lower = 0;
  for (int s = 0; s < kScenes; ++s) scenes_lower += scene_ind_wr[s] < scene_mos_wr[s];
  note(fmt("consistency error median: mosaic %.4f, independent %.4f (median paired ratio %.4f)", med_m, med_i,
           median(paired)));
  note(fmt("slowest mosaic scene-seed %.2f s (scene preparation included)", worst_seconds));
  const bool pass1 = short_scenes == 0 && mos.undefined == 0 && ind.undefined == 0 && med_m <= 0.2 * med_i &&
                     wr_m >= 0.9 && scenes_lower == kScenes && worst_seconds <= 120.0;
  verdict(1, "consistency gain", pass1,
          fmt("median consistency ratio %.4f (<= 0.2), mosaic mean warped ratio %.3f (>= 0.9), independent lower "
              "in %d/%d scenes, max %.1f s per scene-seed (<= 120), %d scenes short of 4 views, %d runs without "
              "co-visible pairs",
              med_m / med_i, wr_m, scenes_lower, kScenes, worst_seconds, short_scenes, mos.undefined + ind.undefined));

  const RunConfig defaults;
  const auto base = enumerate_agreement(std::vector<double>(defaults.prior.palettes.size(), 1.0 / 4.0), 4);
  const double ag_m = mean(mos.agreement), ag_i = mean(ind.agreement);
  const double se_i = std::sqrt(base.var / static_cast<double>(ind.agreement.size()));
  note(fmt("enumerated independent baseline %.5f (sd of the mean over %zu runs %.4f)", base.mean,
           ind.agreement.size(), se_i));
  const bool pass2 = ag_m >= 0.95 && std::abs(ag_i - base.mean) <= 0.05;
  verdict(2, "style synchronization", pass2,
          fmt("mosaic agreement %.4f (>= 0.95), independent %.4f vs baseline %.4f (|diff| %.4f <= 0.05)", ag_m, ag_i,
              base.mean, std::abs(ag_i - base.mean)));
}

// ---------------------------------------------------------------- 3

void criterion_3() {
  RunConfig cfg;
  cfg.variance.repeats = 200;
  cfg.variance.view_counts = {1, 2, 4};
  cfg.variance.palettes = {"ember"};
  const auto t0 = Clock::now();
  const SceneWorld world = generate_scene(cfg.scene, cfg.scene_seed);
  const VarianceViews v = make_variance_views(cfg, world);
  const VarianceReport rep = run_variance_experiment(cfg, world, v);
  bool pass = v.min_pair_overlap > 0.5 && !rep.degenerate && rep.repeats == 200;
  std::string detail = fmt("min pairwise overlap %.3f (> 0.5)", v.min_pair_overlap);
  for (std::size_t s = 0; s < rep.sets.size(); ++s) {
    note(fmt("%d views: trace %.6g, se %.3g", cfg.variance.view_counts[s], rep.sets[s].trace, rep.sets[s].se));
  }
  for (std::size_t s = 0; s < rep.decrease.size(); ++s) {
    const double z = rep.decrease[s] / rep.decrease_se[s];
    pass = pass && rep.decrease[s] > 0.0 && z > 2.0;
    detail += fmt(", %d->%d views decrease %.4g = %.1f SE", cfg.variance.view_counts[s],
                  cfg.variance.view_counts[s + 1], rep.decrease[s], z);
  }
  note(fmt("variance experiment: %zu region cells, %.0f s", rep.region_cells, seconds_since(t0)));
  verdict(3, "variance reduction", pass, detail + " (each > 2 SE)");
}

// ---------------------------------------------------------------- 4

void criterion_4() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  for (double alpha : {0.1, 0.5, 0.9}) {
    for (int trial = 0; trial < 3; ++trial) {
      const GmmPrior prior = mt::random_prior(rng, 4, 2, 2, 1, 0.25);
      // a typical z_t: forward-noised draw from the prior
      std::discrete_distribution<int> pick(prior.weights.begin(), prior.weights.end());
      const auto& mu = prior.means[static_cast<std::size_t>(pick(rng))];
      LatentImage zt(2, 2, 1);
      for (std::size_t e = 0; e < zt.size(); ++e) {
        zt[e] = std::sqrt(alpha) * (mu[e] + prior.component_std * n01(rng)) + std::sqrt(1.0 - alpha) * n01(rng);
      }
      const auto exact = gmm_posterior_mean(zt, alpha, prior);
      const auto mc = mt::monte_carlo_posterior_mean(prior, zt, alpha, 1'000'000, rng());
      double num = 0.0, den = 0.0;
      for (std::size_t e = 0; e < zt.size(); ++e) {
        num += (mc[e] - exact[e]) * (mc[e] - exact[e]);
        den += exact[e] * exact[e];
      }
      const double rel = std::sqrt(num / den);
      note(fmt("alpha %.1f trial %d: relative error %.2e", alpha, trial, rel));
      worst = std::max(worst, rel);
    }
  }
  verdict(4, "denoiser exactness", worst <= 1e-2,
          fmt("worst relative error %.2e over alpha {0.1, 0.5, 0.9} x 3 priors, 1e6 samples each (<= 1e-2)", worst));
}

// ---------------------------------------------------------------- 5

std::vector<std::size_t> all_coords(std::size_t n) {
  std::vector<std::size_t> c(n);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

void criterion_5() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> nv(2, 4), dim(3, 6);
  double worst_proj = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(nv(rng));
    const int h = dim(rng), w = dim(rng), c = 1 + trial % 3;
    std::vector<LatentImage> z;
    for (std::size_t i = 0; i < n; ++i) z.push_back(mt::random_image(rng, h, w, c));
    const auto warps = mt::random_warps(rng, n, h, w);
    const auto wt = compute_pair_weights(warps, mt::random_depths(rng, n, h, w), 1.0);
    const auto r = projection_loss(z, warps, &wt);
    const auto f = [&](const std::vector<double>& x) {
      return projection_loss(mt::unflatten(x, n, h, w, c), warps, &wt).value;
    };
    const auto x = mt::flatten(z);
    worst_proj = std::max(worst_proj, mt::max_fd_error(f, x, mt::flatten(r.gradient), all_coords(x.size())));
  }

  const ToyCodec codec;
  std::uniform_real_distribution<double> u(0.05, 0.95);
  double worst_pixel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 4);
    const int h = 2 + trial % 3, w = 2 + (trial / 3) % 3;
    std::vector<LatentImage> z;
    std::vector<PixelImage> fused;
    for (std::size_t i = 0; i < n; ++i) {
      z.push_back(mt::random_image(rng, h, w, 3));
      PixelImage px(2 * h, 2 * w, 3);
      for (double& v : px.data()) v = u(rng);
      fused.push_back(px);
    }
    const auto r = pixel_refinement_loss(z, fused, codec);
    const auto f = [&](const std::vector<double>& x) {
      return pixel_refinement_loss(mt::unflatten(x, n, h, w, 3), fused, codec).value;
    };
    const auto x = mt::flatten(z);
    worst_pixel = std::max(worst_pixel, mt::max_fd_error(f, x, mt::flatten(r.gradient), all_coords(x.size())));
  }

  // guided-step objective through the denoiser, on small views of a room
  const auto world = mt::test_room();
  const auto den = GmmDenoiser::uniform(4, 0.25);
  const auto sched = make_schedule(20, ScheduleKind::kLinear, 0.0);
  GuidanceConfig cfg;
  cfg.grad_mode = GradMode::kExactJacobian;
  double worst_chain = 0.0;
  int chain_cases = 0;
  std::uniform_real_distribution<double> yaw(-3.0, 3.0), off(-0.5, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const double y0 = yaw(rng);
    std::vector<CameraPose> poses;
    for (int k = 0; k < 2; ++k) {
      poses.push_back(CameraPose::look({off(rng), 1.5, off(rng)}, y0 + 0.3 * k, 0.0, 8, 8, 80.0));
    }
    std::vector<DepthMap> depths;
    for (const auto& p : poses) depths.push_back(render_view(world, p).first);
    const auto vs = std::make_shared<const ViewSet>(build_view_set(poses, depths, default_palette_set(), {0, 1}));
    if (!isolated_views(*vs).empty()) continue;
    const auto state = initial_state(vs, den, sched, cfg, static_cast<std::uint64_t>(trial));
    for (int level : {18, 10, 4}) {
      std::vector<LatentImage> y;
      for (std::size_t i = 0; i < 2; ++i) y.push_back(mt::random_image(rng, 4, 4, 3));
      for (bool pixel : {false, true}) {
        std::vector<LatentImage> targets;
        auto obj = detail::evaluate(den, state, y, level, sched, nullptr);
        if (pixel) {
          targets = detail::refinement_targets(obj.z0, *vs, cfg.alpha_depth, ToyCodec{});
          obj = detail::evaluate(den, state, y, level, sched, &targets);
        }
        auto g = obj.proj.gradient;
        for (std::size_t i = 0; i < g.size(); ++i) {
          for (std::size_t e = 0; e < g[i].size(); ++e) {
            g[i][e] *= static_cast<double>(obj.proj.terms);
            if (pixel) g[i][e] += obj.pixel.gradient[i][e] * static_cast<double>(obj.pixel.terms);
          }
        }
        const auto grad = chain_to_latents(den, *vs, y, g, level, sched, GradMode::kExactJacobian);
        const auto f = [&](const std::vector<double>& x) {
          return detail::evaluate(den, state, mt::unflatten(x, y), level, sched, pixel ? &targets : nullptr).value();
        };
        const auto x = mt::flatten(y);
        worst_chain = std::max(worst_chain, mt::max_fd_error(f, x, mt::flatten(grad), all_coords(x.size()), 1e-5, 1e-4));
        ++chain_cases;
      }
    }
  }
  verdict(5, "gradient correctness", worst_proj <= 1e-4 && worst_pixel <= 1e-4 && worst_chain <= 1e-3 && chain_cases >= 30,
          fmt("projection loss %.2e and pixel loss %.2e over 100 configs each (<= 1e-4), exact-Jacobian step %.2e over "
              "%d cases (<= 1e-3)",
              worst_proj, worst_pixel, worst_chain, chain_cases));
}

// ---------------------------------------------------------------- 6

void criterion_6() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u01(0.0, 1.0), depth(0.1, 20.0), pos(-1.0, 1.0), ang(-3.1, 3.1);
  double worst_cam = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto pose = CameraPose::look({pos(rng), 1.5 + 0.5 * pos(rng), pos(rng)}, ang(rng), 0.5 * pos(rng), 128, 128,
                                       40.0 + 70.0 * u01(rng));
    const double x = u01(rng) * 127, y = u01(rng) * 127;
    const auto back = pose.project(pose.unproject(x, y, depth(rng)));
    worst_cam = std::max({worst_cam, std::abs(back.x() - x), std::abs(back.y() - y)});
  }

  // warps between the key frames of the consistency scenes
  double worst_trip = 0.0, worst_comp = 0.0;
  std::size_t trips = 0, comps = 0, forward = 0;
  for (int s = 0; s < 10; ++s) {
    RunConfig cfg;
    cfg.scene_seed = static_cast<std::uint64_t>(s);
    const PreparedScene scene = prepare_scene(cfg);
    const RenderedViews r = render_views(scene.world, scene.poses);
    const WarpTable t = compute_all_warps(scene.poses, r.depths, cfg.keyframes.tau_occ);
    const std::size_t n = scene.poses.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto& ij = t[i][j];
        for (std::size_t p = 0; p < ij.size(); ++p) {
          if (!ij.valid[p]) continue;
          ++forward;
          const Eigen::Vector2d src(static_cast<double>(p % static_cast<std::size_t>(ij.width)),
                                    static_cast<double>(p / static_cast<std::size_t>(ij.width)));
          if (const auto back = interpolate_warp(t[j][i], r.depths[j], ij.tx[p], ij.ty[p])) {
            worst_trip = std::max(worst_trip, (*back - src).norm());
            ++trips;
          }
          for (std::size_t k = 0; k < n; ++k) {
            if (k == i || k == j || !t[i][k].valid[p]) continue;
            if (const auto via = interpolate_warp(t[j][k], r.depths[j], ij.tx[p], ij.ty[p])) {
              worst_comp = std::max(worst_comp, (*via - Eigen::Vector2d(t[i][k].tx[p], t[i][k].ty[p])).norm());
              ++comps;
            }
          }
        }
      }
    }
  }

  note(fmt("off-grid warp evaluable at %zu of %zu forward-valid pixels (%.1f%%); the rest border depth edges or "
           "creases",
           trips, forward, 100.0 * static_cast<double>(trips) / static_cast<double>(std::max<std::size_t>(forward, 1))));

  const ToyCodec codec;
  double worst_codec = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = mt::band_limited(rng, 64, 64, 3, 3.0);
    const auto back = encode(decode(z, codec), codec);
    for (std::size_t i = 0; i < z.size(); ++i) worst_codec = std::max(worst_codec, std::abs(back[i] - z[i]));
  }
  const bool pass = worst_trip <= 0.5 && worst_comp <= 0.5 && worst_cam <= 1e-6 && worst_codec <= 1e-6 &&
                    trips > 0 && comps > 0;
  verdict(6, "geometry", pass,
          fmt("warp round trip %.3f px over %zu pixels, composition %.3f px over %zu (<= 0.5); unproject/project "
              "%.2e px (<= 1e-6); codec round trip %.2e (<= 1e-6)",
              worst_trip, trips, worst_comp, comps, worst_cam, worst_codec));
}

// ---------------------------------------------------------------- 7

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion_7() {
  RunConfig cfg;
  const PreparedScene scene = prepare_scene(cfg);
  const RenderedViews r = render_views(scene.world, scene.poses);
  const auto views = make_view_set(cfg, scene.poses, r.depths, scene.view_ids, cfg.prior.palettes);
  const GmmDenoiser den = make_denoiser(cfg.prior);
  const ToyCodec codec{cfg.codec_beta};

  bool reduce = true;
  GuidanceConfig off = cfg.guidance;
  off.inner_steps = 0;
  for (double eta : {0.0, 0.5}) {
    const auto sched = make_schedule(cfg.schedule.num_steps, cfg.schedule.kind, eta);
    for (std::uint64_t seed : {0u, 1u, 2u}) {
      const auto m = sample_mosaic(views, den, sched, off, codec, seed);
      const auto ind = sample_independent_views(*views, den, sched, codec, seed);
      for (std::size_t i = 0; i < views->size(); ++i) reduce = reduce && m.latents[i] == ind.latents[i];
    }
  }

  const DdimSchedule sched = make_schedule(cfg.schedule);
  bool single = true;
  const auto one = make_view_set(cfg, {scene.poses[0]}, {r.depths[0]}, {scene.view_ids[0]}, cfg.prior.palettes);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto m = sample_mosaic(one, den, sched, cfg.guidance, codec, seed);
    single = single && m.latents[0] == sample_independent(den, one->conditions[0], sched, seed);
  }

  const auto a = sample_mosaic(views, den, sched, cfg.guidance, codec, 7);
  const auto b = sample_mosaic(views, den, sched, cfg.guidance, codec, 7);
  bool repro = a.latents == b.latents && a.images == b.images;
  const auto dir = std::filesystem::temp_directory_path() / "mosaic_acceptance";
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    write_png(dir / "a.png", a.images[i]);
    write_png(dir / "b.png", b.images[i]);
    repro = repro && file_bytes(dir / "a.png") == file_bytes(dir / "b.png");
  }

  bool any_n = true;
  Eigen::Vector3d c = scene.world.rooms().front().centre();
  c.y() = cfg.trajectory.eye_height;
  for (int n = 1; n <= 8; ++n) {
    std::vector<CameraPose> poses;
    std::vector<int> ids;
    for (int k = 0; k < n; ++k) {
      poses.push_back(CameraPose::look(c, 0.26 * k, 0.0, cfg.trajectory.width, cfg.trajectory.height,
                                       cfg.trajectory.hfov_deg));
      ids.push_back(k);
    }
    const RenderedViews rn = render_views(scene.world, poses);
    const auto vs = make_view_set(cfg, poses, rn.depths, ids, cfg.prior.palettes);
    const auto res = sample_mosaic(vs, den, sched, cfg.guidance, codec, 3);
    bool finite = res.images.size() == static_cast<std::size_t>(n);
    for (const auto& img : res.images) {
      for (double v : img.data()) finite = finite && std::isfinite(v);
    }
    any_n = any_n && finite;
  }
  verdict(7, "reduction sanity", reduce && single && repro && any_n,
          fmt("inner_steps=0 equals independent: %s; N=1 equals baseline: %s; eta=0 byte-reproducible: %s; N=1..8 "
              "with one config: %s",
              reduce ? "yes" : "no", single ? "yes" : "no", repro ? "yes" : "no", any_n ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const auto guard = [](int n, auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      verdict(n, "error", false, e.what());
    }
  };
  guard(1, criteria_1_and_2);
  guard(3, criterion_3);
  guard(4, criterion_4);
  guard(5, criterion_5);
  guard(6, criterion_6);
  guard(7, criterion_7);
  std::printf("%d criteria failed, %.0f s\n", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
