// mosaic_cli: scene generation, rendering, sampling, evaluation and export.
//
// Exit codes: 0 success, 2 invalid config or arguments, 3 missing or
// unreadable inputs, 4 numerical failure during sampling.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mosaic/harness.hpp"
#include "mosaic/io.hpp"

namespace fs = std::filesystem;
using namespace mosaic;

namespace {

constexpr const char* kManifestFormat = "mosaic-run/1";
constexpr const char* kLossTraceSchema = "loss_trace/1";
constexpr const char* kMetricsSchema = "metrics/1";
constexpr const char* kVarianceSchema = "variance_trace/1";

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string view_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%02zu.%s", i, ext);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

Json pose_json(const CameraPose& p) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(p.rotation(i, j));
  }
  return {{"fx", p.fx},         {"fy", p.fy},
          {"cx", p.cx},         {"cy", p.cy},
          {"width", p.width},   {"height", p.height},
          {"rotation", r},      {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

CameraPose pose_from_json(const Json& j) {
  CameraPose p;
  p.fx = j.at("fx");
  p.fy = j.at("fy");
  p.cx = j.at("cx");
  p.cy = j.at("cy");
  p.width = j.at("width");
  p.height = j.at("height");
  for (int i = 0; i < 3; ++i) {
    for (int j2 = 0; j2 < 3; ++j2) p.rotation(i, j2) = j.at("rotation").at(static_cast<std::size_t>(3 * i + j2));
    p.translation[i] = j.at("translation").at(static_cast<std::size_t>(i));
  }
  p.validate();
  return p;
}

Json views_json(const PreparedScene& s) {
  Json v = Json::array();
  for (std::size_t i = 0; i < s.poses.size(); ++i) {
    v.push_back({{"index", i}, {"view_id", s.view_ids[i]}, {"pose", pose_json(s.poses[i])}});
  }
  return v;
}

Json keyframes_json(const PreparedScene& s) {
  return {{"indices", s.keyframes.indices},
          {"coverage", s.keyframes.coverage},
          {"target_unreached", s.keyframes.target_unreached}};
}

void write_manifest(const fs::path& dir, Json m) {
  m["format"] = kManifestFormat;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

Json read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("missing " + (dir / "manifest.json").string());
  Json m = Json::parse(in);
  if (m.value("format", "") != kManifestFormat) throw InputError("unsupported manifest format in " + dir.string());
  return m;
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode = "mosaic";
  int views = 0;
  std::string run;
};

RunConfig load(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw InputError("config file not found: " + o.config);
    cfg = load_config(o.config);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output = o.out;
  return cfg;
}

void write_views(const fs::path& dir, const char* sub, const std::vector<PixelImage>& images) {
  fs::create_directories(dir / sub);
  for (std::size_t i = 0; i < images.size(); ++i) write_png(dir / sub / view_name(i, "png"), images[i]);
}

void write_depths(const fs::path& dir, const std::vector<DepthMap>& depths) {
  fs::create_directories(dir / "depth");
  for (std::size_t i = 0; i < depths.size(); ++i) write_depth(dir / "depth" / view_name(i, "mdep"), depths[i]);
}

int cmd_gen_scene(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  const PreparedScene s = prepare_scene(cfg, o.views);
  Json rooms = Json::array();
  for (const auto& r : s.world.rooms()) {
    rooms.push_back({{"lo", {r.lo.x(), r.lo.y(), r.lo.z()}}, {"hi", {r.hi.x(), r.hi.y(), r.hi.z()}}});
  }
  Json doors = Json::array();
  for (const auto& d : s.world.doors()) doors.push_back({{"room_a", d.room_a}, {"room_b", d.room_b}});
  Json traj = Json::array();
  for (const auto& p : s.trajectory) traj.push_back(pose_json(p));
  const Json scene = {{"rooms", rooms},
                      {"doors", doors},
                      {"surfaces", s.world.surfaces().size()},
                      {"atlas_cells", s.world.total_cells()},
                      {"connected", rooms_connected(s.world)}};
  write_text(dir / "scene.json", scene.dump(2) + "\n");
  write_text(dir / "trajectory.json", traj.dump(2) + "\n");
  write_manifest(dir, {{"command", "gen-scene"},
                       {"config", config_to_json(cfg)},
                       {"views", views_json(s)},
                       {"keyframes", keyframes_json(s)},
                       {"files", {"scene.json", "trajectory.json"}}});
  std::cout << "scene: " << s.world.rooms().size() << " rooms, " << s.trajectory.size() << " poses, "
            << s.poses.size() << " key frames (coverage " << num(s.keyframes.coverage) << ") -> " << dir << "\n";
  return 0;
}

int cmd_render(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  const PreparedScene s = prepare_scene(cfg, o.views);
  const RenderedViews r = render_views(s.world, s.poses);
  write_views(dir, "gt", r.gt);
  write_depths(dir, r.depths);
  write_manifest(dir, {{"command", "render"},
                       {"config", config_to_json(cfg)},
                       {"views", views_json(s)},
                       {"keyframes", keyframes_json(s)}});
  std::cout << "rendered " << s.poses.size() << " views -> " << dir << "\n";
  return 0;
}

int cmd_sample(const Options& o) {
  const SampleMode mode = parse_sample_mode(o.mode);
  const RunConfig cfg = load(o);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  const PreparedScene s = prepare_scene(cfg, o.views);
  if (s.poses.empty()) throw InputError("no views selected");
  const RenderedViews r = render_views(s.world, s.poses);
  const auto views = make_view_set(cfg, s.poses, r.depths, s.view_ids, cfg.prior.palettes);
  const GmmDenoiser den = make_denoiser(cfg.prior);
  const DdimSchedule sched = make_schedule(cfg.schedule);
  const MosaicResult res = run_sampler(cfg, views, mode, cfg.seed, den, sched);

  write_views(dir, "images", res.images);
  write_depths(dir, r.depths);
  std::ostringstream trace;
  trace << "#schema=" << kLossTraceSchema << "\nstep,t,l_proj,l_pixel,total,accepted,pixel_active\n";
  for (const auto& rec : res.trace) {
    trace << rec.step << "," << rec.t << "," << num(rec.l_proj) << "," << num(rec.l_pixel) << "," << num(rec.total)
          << "," << rec.accepted << "," << (rec.pixel_active ? 1 : 0) << "\n";
  }
  write_text(dir / "loss_trace.csv", trace.str());
  const auto isolated = isolated_views(*views);
  write_manifest(dir, {{"command", "sample"},
                       {"mode", to_string(mode)},
                       {"seed", cfg.seed},
                       {"config", config_to_json(cfg)},
                       {"views", views_json(s)},
                       {"keyframes", keyframes_json(s)},
                       {"flags", {{"no_overlap_steps", res.no_overlap}, {"isolated_views", isolated}}},
                       {"csv_schemas", {{"loss_trace.csv", kLossTraceSchema}}}});
  std::cout << to_string(mode) << " sample of " << s.poses.size() << " views (seed " << cfg.seed << ") -> " << dir
            << "\n";
  return 0;
}

struct LoadedRun {
  RunConfig cfg;
  Json manifest;
  std::vector<CameraPose> poses;
  std::vector<int> view_ids;
  std::vector<PixelImage> images;
  std::vector<DepthMap> depths;
};

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.manifest = read_manifest(dir);
  if (run.manifest.value("command", "") != "sample") throw InputError(dir.string() + " is not a sample run");
  run.cfg = config_from_json(run.manifest.at("config"));
  for (const auto& v : run.manifest.at("views")) {
    run.poses.push_back(pose_from_json(v.at("pose")));
    run.view_ids.push_back(v.at("view_id"));
  }
  for (std::size_t i = 0; i < run.poses.size(); ++i) {
    const fs::path img = dir / "images" / view_name(i, "png");
    const fs::path dep = dir / "depth" / view_name(i, "mdep");
    if (!fs::exists(img)) throw InputError("missing " + img.string());
    if (!fs::exists(dep)) throw InputError("missing " + dep.string());
    run.images.push_back(read_png(img));
    run.depths.push_back(read_depth(dep));
  }
  return run;
}

int cmd_eval(const Options& o) {
  if (o.run.empty()) throw CLI::RequiredError("--run");
  const fs::path dir = o.run;
  const LoadedRun run = load_run(dir);
  const SceneWorld world = generate_scene(run.cfg.scene, run.cfg.scene_seed);
  const RenderedViews gt = render_views(world, run.poses);
  const auto views = make_view_set(run.cfg, run.poses, run.depths, run.view_ids, run.cfg.prior.palettes);
  const MetricsRow m = evaluate_views(run.images, *views, gt.gt, ToyCodec{run.cfg.codec_beta});
  std::ostringstream csv;
  csv << "#schema=" << kMetricsSchema << "\n"
      << "mode,seed,views,consistency_error,warped_psnr,gt_warped_psnr,warped_ratio,palette_agreement\n"
      << run.manifest.value("mode", "") << "," << run.manifest.value("seed", 0) << "," << run.poses.size() << ","
      << num(m.consistency_error) << "," << num(m.warped_psnr) << "," << num(m.gt_warped_psnr) << ","
      << num(m.warped_ratio) << "," << num(m.palette_agreement) << "\n";
  const fs::path out = o.out.empty() ? dir / "metrics.csv" : fs::path(o.out);
  write_text(out, csv.str());
  std::cout << csv.str().substr(csv.str().find('\n') + 1);
  if (!m.covisible) std::cerr << "warning: no co-visible view pair; warped PSNR undefined\n";
  return 0;
}

int cmd_var_exp(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  const SceneWorld world = generate_scene(cfg.scene, cfg.scene_seed);
  const VarianceViews v = make_variance_views(cfg, world);
  const VarianceReport rep = run_variance_experiment(cfg, world, v);
  std::ostringstream csv;
  csv << "#schema=" << kVarianceSchema << "\nviews,trace,se,decrease,decrease_se,region_cells,repeats\n";
  for (std::size_t s = 0; s < rep.sets.size(); ++s) {
    csv << cfg.variance.view_counts[s] << "," << num(rep.sets[s].trace) << "," << num(rep.sets[s].se) << ","
        << (s ? num(rep.decrease[s - 1]) : "") << "," << (s ? num(rep.decrease_se[s - 1]) : "") << ","
        << rep.region_cells << "," << rep.repeats << "\n";
  }
  write_text(dir / "variance_trace.csv", csv.str());
  Json poses = Json::array();
  for (const auto& p : v.poses) poses.push_back(pose_json(p));
  write_manifest(dir, {{"command", "var-exp"},
                       {"config", config_to_json(cfg)},
                       {"poses", poses},
                       {"min_pair_overlap", v.min_pair_overlap},
                       {"flags", {{"degenerate", rep.degenerate}, {"few_repeats", rep.few_repeats}}},
                       {"csv_schemas", {{"variance_trace.csv", kVarianceSchema}}}});
  std::cout << csv.str().substr(csv.str().find('\n') + 1);
  if (rep.degenerate) std::cerr << "warning: zero variance in every set (degenerate experiment)\n";
  if (rep.few_repeats) std::cerr << "warning: fewer than 50 repeats\n";
  return 0;
}

int cmd_export_ply(const Options& o) {
  if (o.run.empty()) throw CLI::RequiredError("--run");
  const fs::path dir = o.run;
  const LoadedRun run = load_run(dir);
  const WarpTable warps = compute_all_warps(run.poses, run.depths, run.cfg.keyframes.tau_occ);
  const auto fused = fuse_views_pixel(run.images, warps, run.depths, run.cfg.guidance.alpha_depth);
  std::vector<ColouredPoint> points;
  for (std::size_t i = 0; i < run.poses.size(); ++i) {
    const auto& d = run.depths[i];
    for (int y = 0; y < d.height(); ++y) {
      for (int x = 0; x < d.width(); ++x) {
        if (!d.valid(y, x)) continue;
        const Eigen::Vector3d p = run.poses[i].unproject(x, y, d.depth(y, x));
        points.push_back({p.x(), p.y(), p.z(), to_byte(fused[i](y, x, 0)), to_byte(fused[i](y, x, 1)),
                          to_byte(fused[i](y, x, 2))});
      }
    }
  }
  const fs::path out = o.out.empty() ? dir / "fused.ply" : fs::path(o.out);
  write_ply(out, points);
  std::cout << points.size() << " points -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view consistent sampling on procedural indoor scenes"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)");
    sub->add_option("--seed", o.seed, "sampling seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--views", o.views, "number of key frames (overrides keyframes.max_frames)")
        ->check(CLI::NonNegativeNumber);
  };
  auto* gen = app.add_subcommand("gen-scene", "generate the scene, trajectory and key frames");
  common(gen);
  auto* render = app.add_subcommand("render", "render depth rasters and ground-truth images of the key frames");
  common(render);
  auto* sample = app.add_subcommand("sample", "sample one image per key frame");
  common(sample);
  sample->add_option("--mode", o.mode, "independent or mosaic")
      ->check(CLI::IsMember({"independent", "mosaic"}));
  auto* eval = app.add_subcommand("eval", "compute consistency metrics of a sample run");
  eval->add_option("--run", o.run, "sample run directory")->required();
  eval->add_option("--out", o.out, "metrics CSV path (default RUN/metrics.csv)");
  auto* var = app.add_subcommand("var-exp", "variance of the fused canvas over nested view sets");
  common(var);
  auto* ply = app.add_subcommand("export-ply", "fused coloured point cloud of a sample run");
  ply->add_option("--run", o.run, "sample run directory")->required();
  ply->add_option("--out", o.out, "PLY path (default RUN/fused.ply)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (*gen) return cmd_gen_scene(o);
    if (*render) return cmd_render(o);
    if (*sample) return cmd_sample(o);
    if (*eval) return cmd_eval(o);
    if (*var) return cmd_var_exp(o);
    if (*ply) return cmd_export_ply(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::string(e.what()).find("non-finite") != std::string::npos ? 4 : 3;
  }
  return 0;
}
