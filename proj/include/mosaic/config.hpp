// Run configuration: JSON (de)serialisation with field-named validation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosaic/ddim.hpp"
#include "mosaic/denoiser.hpp"
#include "mosaic/keyframes.hpp"
#include "mosaic/sampler.hpp"
#include "mosaic/scene.hpp"

namespace mosaic {

using Json = nlohmann::ordered_json;

/// Thrown for any schema violation; the message starts with the field path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExplicitPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
};

struct ScheduleConfig {
  int num_steps = 50;
  ScheduleKind kind = ScheduleKind::kLinear;
  double eta = 0.0;
};

struct PriorConfig {
  std::vector<std::string> palettes{"ember", "glacier", "ink", "moss"};
  std::vector<Palette> tables;  // inline palettes, named alongside the presets
  std::vector<double> weights;  // empty: uniform
  double component_std = 0.25;
};

struct VarianceConfig {
  int repeats = 200;
  std::vector<int> view_counts{1, 2, 4};
  double yaw_step_deg = 10.0;  // heading offset between consecutive views
  std::vector<std::string> palettes{"ember"};
  std::uint64_t seed_base = 1000;
};

struct RunConfig {
  SceneSpec scene;
  std::uint64_t scene_seed = 0;
  TrajectorySpec trajectory;
  std::vector<ExplicitPose> poses;  // non-empty: replaces trajectory and key frames
  KeyFrameParams keyframes{0.3, 0.9, 4, 0.01};
  ScheduleConfig schedule;
  PriorConfig prior;
  GuidanceConfig guidance;
  double codec_beta = 1.0;
  std::uint64_t seed = 0;
  VarianceConfig variance;
  std::string output = "runs/default";

  void validate() const;
};

namespace detail {

// Strict reader over one JSON object: typed access by key, and a final check
// that no unknown keys were supplied.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0) {
          out = v->get<Int>();
          return;
        }
        throw ConfigError(field(key), "expected a non-negative integer");
      } else {
        out = v->get<Int>();
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <typename T>
  void list(const std::string& key, std::vector<T>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const Json& e = (*v)[i];
        const std::string f = field(key) + "[" + std::to_string(i) + "]";
        if constexpr (std::is_same_v<T, std::string>) {
          if (!e.is_string()) throw ConfigError(f, "expected a string");
        } else if constexpr (std::is_integral_v<T>) {
          if (!e.is_number_integer()) throw ConfigError(f, "expected an integer");
        } else {
          if (!e.is_number()) throw ConfigError(f, "expected a number");
        }
        out.push_back(e.get<T>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(field(it.key()), "unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void section(ObjectReader& parent, const std::string& key, F&& body) {
  if (const Json* v = parent.find(key)) {
    ObjectReader r(*v, parent.field(key));
    body(r);
    r.finish();
  }
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  RunConfig c;
  detail::ObjectReader root(j, "");
  detail::section(root, "scene", [&](detail::ObjectReader& r) {
    r.integer("rooms", c.scene.rooms);
    r.integer("grid_cols", c.scene.grid_cols);
    r.integer("grid_rows", c.scene.grid_rows);
    r.number("size_min", c.scene.size_min);
    r.number("size_max", c.scene.size_max);
    r.number("height", c.scene.height);
    r.number("door_width", c.scene.door_width);
    r.number("door_height", c.scene.door_height);
    r.string("texture_family", c.scene.texture_family);
    r.number("atlas_cell", c.scene.atlas_cell);
    r.integer("seed", c.scene_seed);
  });
  detail::section(root, "trajectory", [&](detail::ObjectReader& r) {
    r.integer("num_poses", c.trajectory.num_poses);
    r.integer("width", c.trajectory.width);
    r.integer("height", c.trajectory.height);
    r.number("hfov_deg", c.trajectory.hfov_deg);
    r.number("eye_height", c.trajectory.eye_height);
    r.number("sweep_deg", c.trajectory.sweep_deg);
    r.number("sweep_period", c.trajectory.sweep_period);
  });
  if (const Json* poses = root.find("poses")) {
    if (!poses->is_array()) throw ConfigError("poses", "expected an array");
    for (std::size_t i = 0; i < poses->size(); ++i) {
      const std::string f = "poses[" + std::to_string(i) + "]";
      detail::ObjectReader r((*poses)[i], f);
      ExplicitPose p;
      std::vector<double> pos;
      r.list("position", pos);
      if (pos.size() != 3) throw ConfigError(f + ".position", "expected [x, y, z]");
      p.position = Eigen::Vector3d(pos[0], pos[1], pos[2]);
      r.number("yaw_deg", p.yaw_deg);
      r.number("pitch_deg", p.pitch_deg);
      r.finish();
      c.poses.push_back(p);
    }
  }
  detail::section(root, "keyframes", [&](detail::ObjectReader& r) {
    r.number("min_overlap", c.keyframes.min_overlap);
    r.number("coverage_target", c.keyframes.coverage_target);
    r.integer("max_frames", c.keyframes.max_frames);
    r.number("tau_occ", c.keyframes.tau_occ);
  });
  detail::section(root, "schedule", [&](detail::ObjectReader& r) {
    r.integer("num_steps", c.schedule.num_steps);
    std::string kind = c.schedule.kind == ScheduleKind::kLinear ? "linear" : "cosine";
    r.string("kind", kind);
    try {
      c.schedule.kind = parse_schedule_kind(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("schedule.kind", e.what());
    }
    r.number("eta", c.schedule.eta);
  });
  detail::section(root, "prior", [&](detail::ObjectReader& r) {
    r.list("palettes", c.prior.palettes);
    if (const Json* t = r.find("tables")) {
      if (!t->is_object()) throw ConfigError("prior.tables", "expected an object of name: [[channel values], ...]");
      for (auto it = t->begin(); it != t->end(); ++it) {
        const std::string f = "prior.tables." + it.key();
        if (!it->is_array()) throw ConfigError(f, "expected an array of colour stops");
        Palette pal{it.key(), {}};
        for (std::size_t i = 0; i < it->size(); ++i) {
          const Json& stop = (*it)[i];
          const std::string fs = f + "[" + std::to_string(i) + "]";
          if (!stop.is_array()) throw ConfigError(fs, "expected an array of channel values");
          std::vector<double> v;
          for (const Json& e : stop) {
            if (!e.is_number()) throw ConfigError(fs, "expected numbers");
            v.push_back(e.get<double>());
          }
          pal.stops.push_back(std::move(v));
        }
        c.prior.tables.push_back(std::move(pal));
      }
    }
    r.list("weights", c.prior.weights);
    r.number("component_std", c.prior.component_std);
  });
  detail::section(root, "guidance", [&](detail::ObjectReader& r) {
    r.number("alpha_depth", c.guidance.alpha_depth);
    r.integer("inner_steps", c.guidance.inner_steps);
    r.number("step_size", c.guidance.step_size);
    std::string mode = to_string(c.guidance.grad_mode);
    r.string("grad_mode", mode);
    try {
      c.guidance.grad_mode = parse_grad_mode(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("guidance.grad_mode", e.what());
    }
    r.number("pixel_refine_window", c.guidance.pixel_refine_window);
    r.boolean("depth_weighting", c.guidance.depth_weighting);
    r.boolean("pixel_refine", c.guidance.pixel_refine);
    r.integer("max_halvings", c.guidance.max_halvings);
    r.boolean("allow_isolated_views", c.guidance.allow_isolated_views);
  });
  detail::section(root, "codec", [&](detail::ObjectReader& r) { r.number("beta", c.codec_beta); });
  root.integer("seed", c.seed);
  detail::section(root, "variance", [&](detail::ObjectReader& r) {
    r.integer("repeats", c.variance.repeats);
    r.list("view_counts", c.variance.view_counts);
    r.number("yaw_step_deg", c.variance.yaw_step_deg);
    r.list("palettes", c.variance.palettes);
    r.integer("seed_base", c.variance.seed_base);
  });
  root.string("output", c.output);
  root.finish();
  c.validate();
  return c;
}

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["scene"] = {{"rooms", c.scene.rooms},
                {"grid_cols", c.scene.grid_cols},
                {"grid_rows", c.scene.grid_rows},
                {"size_min", c.scene.size_min},
                {"size_max", c.scene.size_max},
                {"height", c.scene.height},
                {"door_width", c.scene.door_width},
                {"door_height", c.scene.door_height},
                {"texture_family", c.scene.texture_family},
                {"atlas_cell", c.scene.atlas_cell},
                {"seed", c.scene_seed}};
  j["trajectory"] = {{"num_poses", c.trajectory.num_poses},     {"width", c.trajectory.width},
                     {"height", c.trajectory.height},           {"hfov_deg", c.trajectory.hfov_deg},
                     {"eye_height", c.trajectory.eye_height},   {"sweep_deg", c.trajectory.sweep_deg},
                     {"sweep_period", c.trajectory.sweep_period}};
  j["poses"] = Json::array();
  for (const auto& p : c.poses) {
    j["poses"].push_back({{"position", {p.position.x(), p.position.y(), p.position.z()}},
                          {"yaw_deg", p.yaw_deg},
                          {"pitch_deg", p.pitch_deg}});
  }
  j["keyframes"] = {{"min_overlap", c.keyframes.min_overlap},
                    {"coverage_target", c.keyframes.coverage_target},
                    {"max_frames", c.keyframes.max_frames},
                    {"tau_occ", c.keyframes.tau_occ}};
  j["schedule"] = {{"num_steps", c.schedule.num_steps},
                   {"kind", c.schedule.kind == ScheduleKind::kLinear ? "linear" : "cosine"},
                   {"eta", c.schedule.eta}};
  Json tables = Json::object();
  for (const auto& t : c.prior.tables) tables[t.name] = t.stops;
  j["prior"] = {{"palettes", c.prior.palettes},
                {"tables", tables},
                {"weights", c.prior.weights},
                {"component_std", c.prior.component_std}};
  j["guidance"] = {{"alpha_depth", c.guidance.alpha_depth},
                   {"inner_steps", c.guidance.inner_steps},
                   {"step_size", c.guidance.step_size},
                   {"grad_mode", to_string(c.guidance.grad_mode)},
                   {"pixel_refine_window", c.guidance.pixel_refine_window},
                   {"depth_weighting", c.guidance.depth_weighting},
                   {"pixel_refine", c.guidance.pixel_refine},
                   {"max_halvings", c.guidance.max_halvings},
                   {"allow_isolated_views", c.guidance.allow_isolated_views}};
  j["codec"] = {{"beta", c.codec_beta}};
  j["seed"] = c.seed;
  j["variance"] = {{"repeats", c.variance.repeats},
                   {"view_counts", c.variance.view_counts},
                   {"yaw_step_deg", c.variance.yaw_step_deg},
                   {"palettes", c.variance.palettes},
                   {"seed_base", c.variance.seed_base}};
  j["output"] = c.output;
  return j;
}

namespace detail {

inline void rethrow_as_field(const std::string& field, const std::invalid_argument& e) {
  throw ConfigError(field, e.what());
}

inline void check_palettes(const std::vector<std::string>& names, const std::map<std::string, Palette>& library,
                           const std::string& field) {
  if (names.empty()) throw ConfigError(field, "at least one palette is required");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!library.contains(names[i])) {
      throw ConfigError(field + "[" + std::to_string(i) + "]", "unknown palette '" + names[i] + "'");
    }
  }
}

}  // namespace detail

/// Presets plus the config's inline tables.
inline std::map<std::string, Palette> palette_library(const std::vector<Palette>& tables) {
  auto lib = palette_presets();
  for (const auto& t : tables) lib[t.name] = t;
  return lib;
}

inline void RunConfig::validate() const {
  try {
    scene.validate();
  } catch (const std::invalid_argument& e) {
    detail::rethrow_as_field("scene", e);
  }
  if (trajectory.num_poses < 1) throw ConfigError("trajectory.num_poses", "must be >= 1");
  if (trajectory.width < 2 || trajectory.height < 2 || trajectory.width % 2 || trajectory.height % 2) {
    throw ConfigError("trajectory.width", "width and height must be even and >= 2");
  }
  if (!(trajectory.hfov_deg > 0.0 && trajectory.hfov_deg < 180.0)) {
    throw ConfigError("trajectory.hfov_deg", "must lie in (0, 180)");
  }
  if (!(trajectory.eye_height > 0.0 && trajectory.eye_height < scene.height)) {
    throw ConfigError("trajectory.eye_height", "must lie between floor and ceiling");
  }
  if (!(trajectory.sweep_period > 0.0)) throw ConfigError("trajectory.sweep_period", "must be positive");
  if (!(keyframes.min_overlap > 0.0 && keyframes.min_overlap < 1.0)) {
    throw ConfigError("keyframes.min_overlap", "must lie in (0, 1)");
  }
  if (!(keyframes.coverage_target > 0.0 && keyframes.coverage_target <= 1.0)) {
    throw ConfigError("keyframes.coverage_target", "must lie in (0, 1]");
  }
  if (keyframes.max_frames < 0) throw ConfigError("keyframes.max_frames", "must be >= 0 (0 = unlimited)");
  if (!(keyframes.tau_occ > 0.0)) throw ConfigError("keyframes.tau_occ", "must be positive");
  if (schedule.num_steps < 1) throw ConfigError("schedule.num_steps", "must be >= 1");
  if (!(schedule.eta >= 0.0)) throw ConfigError("schedule.eta", "must be >= 0");
  const auto presets = palette_presets();
  std::set<std::string> table_names;
  for (const auto& t : prior.tables) {
    const std::string f = "prior.tables." + t.name;
    if (presets.contains(t.name)) throw ConfigError(f, "name clashes with a preset palette");
    if (!table_names.insert(t.name).second) throw ConfigError(f, "duplicate table name");
    try {
      t.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(f, e.what());
    }
    if (t.channels() != 3) throw ConfigError(f, "stops need 3 channel values");
  }
  const auto library = palette_library(prior.tables);
  detail::check_palettes(prior.palettes, library, "prior.palettes");
  if (!prior.weights.empty()) {
    if (prior.weights.size() != prior.palettes.size()) {
      throw ConfigError("prior.weights", "needs one weight per palette");
    }
    for (double w : prior.weights) {
      if (!(w > 0.0)) throw ConfigError("prior.weights", "weights must be positive");
    }
  }
  if (!(prior.component_std > 0.0)) throw ConfigError("prior.component_std", "must be positive");
  try {
    guidance.validate();
  } catch (const std::invalid_argument& e) {
    // GuidanceConfig messages already start with the field path
    const std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(' ')), msg.substr(msg.find(' ') + 1));
  }
  if (!(codec_beta > 0.0)) throw ConfigError("codec.beta", "must be positive");
  if (variance.repeats < 2) throw ConfigError("variance.repeats", "must be >= 2");
  if (variance.view_counts.empty()) throw ConfigError("variance.view_counts", "must be non-empty");
  for (std::size_t i = 0; i < variance.view_counts.size(); ++i) {
    const int prev = i ? variance.view_counts[i - 1] : 0;
    if (variance.view_counts[i] <= prev) {
      throw ConfigError("variance.view_counts", "must be positive and strictly increasing (nested sets)");
    }
  }
  detail::check_palettes(variance.palettes, library, "variance.palettes");
  if (output.empty()) throw ConfigError("output", "must be a non-empty path");
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace mosaic
