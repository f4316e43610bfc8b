// Procedural multi-room worlds made of axis-aligned boxes, with an analytic
// ray caster and a per-surface texture atlas.
//
// World frame: y is up, floors sit at y = 0. Rooms occupy cells of a
// cols x rows grid in the x-z plane; adjacent rooms joined by a door share a
// wall with a rectangular opening.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mosaic/camera.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

enum class Pattern { kChecker, kStripes, kNoise };

struct Material {
  std::array<double, 3> base{0.5, 0.5, 0.5};
  Pattern pattern = Pattern::kChecker;
  double scale = 0.3;     // metres per pattern period
  double contrast = 0.3;  // in [0, 1)
  std::uint64_t noise_seed = 0;
};

/// Axis-aligned rectangle: {p : p[axis] = plane, lo <= p[in-plane] <= hi}.
struct Surface {
  int id = 0;
  int axis = 0;
  double plane = 0.0;
  std::array<double, 2> lo{};
  std::array<double, 2> hi{};
  Material material;
  // atlas bookkeeping
  int cells_u = 1;
  int cells_v = 1;
  std::int64_t cell_offset = 0;

  int axis_u() const { return (axis + 1) % 3; }
  int axis_v() const { return (axis + 2) % 3; }
  double area() const { return (hi[0] - lo[0]) * (hi[1] - lo[1]); }
};

struct Room {
  int col = 0;
  int row = 0;
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();

  Eigen::Vector3d centre() const { return 0.5 * (lo + hi); }
};

struct Door {
  int room_a = 0;
  int room_b = 0;
  int axis = 0;         // normal axis of the wall (0 = x, 2 = z)
  double plane = 0.0;   // wall coordinate along `axis`
  double centre = 0.0;  // along the other horizontal axis
  double width = 1.0;
  double height = 2.0;

  Eigen::Vector3d centre_point(double eye_height) const {
    Eigen::Vector3d p(0.0, eye_height, 0.0);
    p[axis] = plane;
    p[axis == 0 ? 2 : 0] = centre;
    return p;
  }
};

struct SceneSpec {
  int rooms = 2;
  int grid_cols = 3;
  int grid_rows = 3;
  double size_min = 3.5;  // room extent along x and z, metres
  double size_max = 5.0;
  double height = 2.7;
  double door_width = 1.0;
  double door_height = 2.1;
  std::string texture_family = "mixed";  // checker | stripes | noise | mixed
  double atlas_cell = 0.05;              // metres per canvas cell

  void validate() const {
    if (rooms < 1) throw std::invalid_argument("SceneSpec.rooms: must be >= 1");
    if (grid_cols < 1 || grid_rows < 1) throw std::invalid_argument("SceneSpec.grid: must be >= 1 x 1");
    if (rooms > grid_cols * grid_rows) {
      throw std::invalid_argument("SceneSpec.rooms: " + std::to_string(rooms) + " rooms cannot fit a " +
                                  std::to_string(grid_cols) + "x" + std::to_string(grid_rows) + " grid");
    }
    if (!(size_min > 0.0 && size_max >= size_min)) {
      throw std::invalid_argument("SceneSpec.size: need 0 < size_min <= size_max");
    }
    if (!(door_width > 0.0 && door_width + 0.4 < size_min)) {
      throw std::invalid_argument("SceneSpec.door_width: door must fit inside the narrowest wall");
    }
    if (!(height > 0.0 && door_height > 0.0 && door_height < height)) {
      throw std::invalid_argument("SceneSpec.door_height: need 0 < door_height < height");
    }
    if (texture_family != "checker" && texture_family != "stripes" && texture_family != "noise" &&
        texture_family != "mixed") {
      throw std::invalid_argument("SceneSpec.texture_family: unknown family '" + texture_family + "'");
    }
    if (!(atlas_cell > 0.0)) throw std::invalid_argument("SceneSpec.atlas_cell: must be positive");
  }
};

struct RayHit {
  double t = 0.0;
  int surface = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double lattice_value(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) * 0x632be59bd9b4e019ull ^
                                                       static_cast<std::uint64_t>(j)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double value_noise(std::uint64_t seed, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const auto i = static_cast<std::int64_t>(fu), j = static_cast<std::int64_t>(fv);
  auto smooth = [](double x) { return x * x * (3.0 - 2.0 * x); };
  const double a = smooth(u - fu), b = smooth(v - fv);
  const double v00 = lattice_value(seed, i, j), v10 = lattice_value(seed, i + 1, j);
  const double v01 = lattice_value(seed, i, j + 1), v11 = lattice_value(seed, i + 1, j + 1);
  return (1 - a) * (1 - b) * v00 + a * (1 - b) * v10 + (1 - a) * b * v01 + a * b * v11;
}

}  // namespace detail

class SceneWorld {
 public:
  SceneWorld() = default;
  SceneWorld(std::vector<Room> rooms, std::vector<Door> doors, std::vector<Surface> surfaces,
             std::uint64_t seed, double atlas_cell)
      : rooms_(std::move(rooms)), doors_(std::move(doors)), surfaces_(std::move(surfaces)),
        seed_(seed), atlas_cell_(atlas_cell) {
    std::int64_t offset = 0;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (std::size_t i = 0; i < surfaces_.size(); ++i) {
      auto& s = surfaces_[i];
      s.id = static_cast<int>(i);
      s.cells_u = std::max(1, static_cast<int>(std::ceil((s.hi[0] - s.lo[0]) / atlas_cell_ - 1e-9)));
      s.cells_v = std::max(1, static_cast<int>(std::ceil((s.hi[1] - s.lo[1]) / atlas_cell_ - 1e-9)));
      s.cell_offset = offset;
      offset += static_cast<std::int64_t>(s.cells_u) * s.cells_v;
    }
    total_cells_ = offset;
    for (const auto& r : rooms_) {
      lo = lo.cwiseMin(r.lo);
      hi = hi.cwiseMax(r.hi);
    }
    diameter_ = rooms_.empty() ? 0.0 : (hi - lo).norm();
  }

  /// Single closed box room, mostly for tests.
  static SceneWorld box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, double atlas_cell = 0.05,
                        Material material = {}) {
    Room r{0, 0, lo, hi};
    std::vector<Surface> s;
    for (int axis = 0; axis < 3; ++axis) {
      for (double plane : {lo[axis], hi[axis]}) {
        Surface f;
        f.axis = axis;
        f.plane = plane;
        f.lo = {lo[(axis + 1) % 3], lo[(axis + 2) % 3]};
        f.hi = {hi[(axis + 1) % 3], hi[(axis + 2) % 3]};
        f.material = material;
        s.push_back(f);
      }
    }
    return SceneWorld({r}, {}, std::move(s), 0, atlas_cell);
  }

  const std::vector<Room>& rooms() const { return rooms_; }
  const std::vector<Door>& doors() const { return doors_; }
  const std::vector<Surface>& surfaces() const { return surfaces_; }
  std::uint64_t seed() const { return seed_; }
  double atlas_cell() const { return atlas_cell_; }
  std::int64_t total_cells() const { return total_cells_; }
  double diameter() const { return diameter_; }

  std::optional<RayHit> raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
    constexpr double kEdge = 1e-9;
    RayHit best;
    best.t = std::numeric_limits<double>::infinity();
    for (const auto& s : surfaces_) {
      const double d = dir[s.axis];
      if (std::abs(d) < 1e-15) continue;
      const double t = (s.plane - origin[s.axis]) / d;
      if (!(t > 1e-9) || t >= best.t) continue;
      const double u = origin[s.axis_u()] + t * dir[s.axis_u()];
      const double v = origin[s.axis_v()] + t * dir[s.axis_v()];
      if (u < s.lo[0] - kEdge || u > s.hi[0] + kEdge || v < s.lo[1] - kEdge || v > s.hi[1] + kEdge) continue;
      best.t = t;
      best.surface = s.id;
    }
    if (best.surface < 0) return std::nullopt;
    best.point = origin + best.t * dir;
    return best;
  }

  /// True when p lies inside some room and is not on a surface.
  bool in_free_space(const Eigen::Vector3d& p) const {
    constexpr double kClear = 1e-4;
    bool inside = false;
    for (const auto& r : rooms_) {
      if ((p.array() >= r.lo.array() - 1e-12).all() && (p.array() <= r.hi.array() + 1e-12).all()) {
        inside = true;
        break;
      }
    }
    if (!inside) return false;
    for (const auto& s : surfaces_) {
      if (std::abs(p[s.axis] - s.plane) > kClear) continue;
      const double u = p[s.axis_u()], v = p[s.axis_v()];
      if (u >= s.lo[0] - kClear && u <= s.hi[0] + kClear && v >= s.lo[1] - kClear && v <= s.hi[1] + kClear) {
        return false;
      }
    }
    return true;
  }

  /// Surface containing p (within tol), or -1.
  int locate(const Eigen::Vector3d& p, double tol = 1e-6) const {
    for (const auto& s : surfaces_) {
      if (std::abs(p[s.axis] - s.plane) > tol) continue;
      const double u = p[s.axis_u()], v = p[s.axis_v()];
      if (u >= s.lo[0] - tol && u <= s.hi[0] + tol && v >= s.lo[1] - tol && v <= s.hi[1] + tol) return s.id;
    }
    return -1;
  }

  std::int64_t cell_of(int surface, const Eigen::Vector3d& p) const {
    const auto& s = surfaces_.at(static_cast<std::size_t>(surface));
    const int iu = std::clamp(static_cast<int>(std::floor((p[s.axis_u()] - s.lo[0]) / atlas_cell_)), 0, s.cells_u - 1);
    const int iv = std::clamp(static_cast<int>(std::floor((p[s.axis_v()] - s.lo[1]) / atlas_cell_)), 0, s.cells_v - 1);
    return s.cell_offset + static_cast<std::int64_t>(iv) * s.cells_u + iu;
  }

  /// World position of an atlas cell centre.
  Eigen::Vector3d cell_centre(std::int64_t cell) const {
    auto it = std::upper_bound(surfaces_.begin(), surfaces_.end(), cell,
                               [](std::int64_t c, const Surface& s) { return c < s.cell_offset; });
    const auto& s = *std::prev(it);
    const std::int64_t local = cell - s.cell_offset;
    const int iu = static_cast<int>(local % s.cells_u), iv = static_cast<int>(local / s.cells_u);
    Eigen::Vector3d p;
    p[s.axis] = s.plane;
    p[s.axis_u()] = std::min(s.lo[0] + (iu + 0.5) * atlas_cell_, s.hi[0]);
    p[s.axis_v()] = std::min(s.lo[1] + (iv + 0.5) * atlas_cell_, s.hi[1]);
    return p;
  }

  std::array<double, 3> albedo(int surface, const Eigen::Vector3d& p) const {
    const auto& s = surfaces_.at(static_cast<std::size_t>(surface));
    const auto& m = s.material;
    const double u = (p[s.axis_u()] - s.lo[0]) / m.scale;
    const double v = (p[s.axis_v()] - s.lo[1]) / m.scale;
    double pattern = 0.0;
    switch (m.pattern) {
      case Pattern::kChecker:
        pattern = ((static_cast<std::int64_t>(std::floor(u)) + static_cast<std::int64_t>(std::floor(v))) & 1) ? 1.0 : 0.0;
        break;
      case Pattern::kStripes:
        pattern = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u);
        break;
      case Pattern::kNoise:
        pattern = detail::value_noise(m.noise_seed, 2.0 * u, 2.0 * v);
        break;
    }
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) out[c] = std::clamp(m.base[c] * (1.0 - m.contrast * pattern), 0.0, 1.0);
    return out;
  }

  /// Albedo times fixed two-sided Lambertian shading, in [0, 1].
  std::array<double, 3> shaded_colour(int surface, const Eigen::Vector3d& p) const {
    static const Eigen::Vector3d light = Eigen::Vector3d(0.35, 0.8, 0.5).normalized();
    const auto& s = surfaces_.at(static_cast<std::size_t>(surface));
    const double shade = 0.35 + 0.65 * std::abs(light[s.axis]);
    auto a = albedo(surface, p);
    for (double& c : a) c *= shade;
    return a;
  }

  friend bool operator==(const SceneWorld& a, const SceneWorld& b) {
    if (a.seed_ != b.seed_ || a.surfaces_.size() != b.surfaces_.size() || a.rooms_.size() != b.rooms_.size() ||
        a.doors_.size() != b.doors_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.surfaces_.size(); ++i) {
      const auto& x = a.surfaces_[i];
      const auto& y = b.surfaces_[i];
      if (x.axis != y.axis || x.plane != y.plane || x.lo != y.lo || x.hi != y.hi ||
          x.material.base != y.material.base || x.material.pattern != y.material.pattern ||
          x.material.scale != y.material.scale || x.material.contrast != y.material.contrast ||
          x.material.noise_seed != y.material.noise_seed) {
        return false;
      }
    }
    for (std::size_t i = 0; i < a.rooms_.size(); ++i) {
      if (a.rooms_[i].lo != b.rooms_[i].lo || a.rooms_[i].hi != b.rooms_[i].hi) return false;
    }
    return true;
  }

 private:
  std::vector<Room> rooms_;
  std::vector<Door> doors_;
  std::vector<Surface> surfaces_;
  std::uint64_t seed_ = 0;
  double atlas_cell_ = 0.05;
  std::int64_t total_cells_ = 0;
  double diameter_ = 0.0;
};

inline SceneWorld generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> size(spec.size_min, spec.size_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> col_edge{0.0}, row_edge{0.0};
  for (int c = 0; c < spec.grid_cols; ++c) col_edge.push_back(col_edge.back() + size(rng));
  for (int r = 0; r < spec.grid_rows; ++r) row_edge.push_back(row_edge.back() + size(rng));

  const int ncell = spec.grid_cols * spec.grid_rows;
  std::vector<int> room_of(static_cast<std::size_t>(ncell), -1);
  std::vector<std::pair<int, int>> cells;  // (col, row) per room
  std::vector<std::pair<int, int>> tree;   // door edges as room index pairs
  auto cell_id = [&](int c, int r) { return r * spec.grid_cols + c; };

  const int start = std::uniform_int_distribution<int>(0, ncell - 1)(rng);
  room_of[static_cast<std::size_t>(start)] = 0;
  cells.emplace_back(start % spec.grid_cols, start / spec.grid_cols);
  constexpr int dc[4] = {1, -1, 0, 0};
  constexpr int dr[4] = {0, 0, 1, -1};
  while (static_cast<int>(cells.size()) < spec.rooms) {
    std::vector<std::pair<int, int>> frontier;  // (room, target cell)
    for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
      for (int d = 0; d < 4; ++d) {
        const int c = cells[static_cast<std::size_t>(i)].first + dc[d];
        const int r = cells[static_cast<std::size_t>(i)].second + dr[d];
        if (c < 0 || r < 0 || c >= spec.grid_cols || r >= spec.grid_rows) continue;
        if (room_of[static_cast<std::size_t>(cell_id(c, r))] >= 0) continue;
        frontier.emplace_back(i, cell_id(c, r));
      }
    }
    const auto pick = frontier[std::uniform_int_distribution<std::size_t>(0, frontier.size() - 1)(rng)];
    const int idx = static_cast<int>(cells.size());
    room_of[static_cast<std::size_t>(pick.second)] = idx;
    cells.emplace_back(pick.second % spec.grid_cols, pick.second / spec.grid_cols);
    tree.emplace_back(pick.first, idx);
  }

  std::vector<Room> rooms;
  for (const auto& [c, r] : cells) {
    rooms.push_back({c, r, Eigen::Vector3d(col_edge[static_cast<std::size_t>(c)], 0.0, row_edge[static_cast<std::size_t>(r)]),
                     Eigen::Vector3d(col_edge[static_cast<std::size_t>(c) + 1], spec.height,
                                     row_edge[static_cast<std::size_t>(r) + 1])});
  }

  auto random_material = [&]() {
    Material m;
    const double hue = unit(rng);
    for (int c = 0; c < 3; ++c) {
      m.base[static_cast<std::size_t>(c)] =
          0.55 + 0.35 * std::cos(2.0 * std::numbers::pi * (hue + c / 3.0));
    }
    Pattern p = Pattern::kChecker;
    if (spec.texture_family == "stripes") p = Pattern::kStripes;
    else if (spec.texture_family == "noise") p = Pattern::kNoise;
    else if (spec.texture_family == "mixed") p = static_cast<Pattern>(std::uniform_int_distribution<int>(0, 2)(rng));
    m.pattern = p;
    m.scale = 0.25 + 0.35 * unit(rng);
    m.contrast = 0.15 + 0.25 * unit(rng);
    m.noise_seed = rng();
    return m;
  };

  std::vector<Door> doors;
  for (const auto& [a, b] : tree) {
    const auto& ra = rooms[static_cast<std::size_t>(a)];
    const auto& rb = rooms[static_cast<std::size_t>(b)];
    Door d;
    d.room_a = a;
    d.room_b = b;
    d.width = spec.door_width;
    d.height = spec.door_height;
    if (ra.row == rb.row) {
      d.axis = 0;
      d.plane = std::max(ra.lo.x(), rb.lo.x());
      const double lo = ra.lo.z(), hi = ra.hi.z();
      d.centre = lo + spec.door_width / 2 + 0.2 + unit(rng) * (hi - lo - spec.door_width - 0.4);
    } else {
      d.axis = 2;
      d.plane = std::max(ra.lo.z(), rb.lo.z());
      const double lo = ra.lo.x(), hi = ra.hi.x();
      d.centre = lo + spec.door_width / 2 + 0.2 + unit(rng) * (hi - lo - spec.door_width - 0.4);
    }
    doors.push_back(d);
  }

  std::vector<Surface> surfaces;
  auto add = [&](int axis, double plane, double lo0, double hi0, double lo1, double hi1, const Material& m) {
    if (hi0 - lo0 <= 1e-9 || hi1 - lo1 <= 1e-9) return;
    Surface s;
    s.axis = axis;
    s.plane = plane;
    s.lo = {lo0, lo1};
    s.hi = {hi0, hi1};
    s.material = m;
    surfaces.push_back(s);
  };
  // For axis 0 walls the in-plane axes are (y, z); for axis 2 walls they are (x, y).
  auto add_wall = [&](int axis, double plane, double h_lo, double h_hi, const Door* door, const Material& m) {
    auto emit = [&](double a0, double a1, double y0, double y1) {
      if (axis == 0) add(0, plane, y0, y1, a0, a1, m);
      else add(2, plane, a0, a1, y0, y1, m);
    };
    if (door == nullptr) {
      emit(h_lo, h_hi, 0.0, spec.height);
      return;
    }
    const double d0 = door->centre - door->width / 2, d1 = door->centre + door->width / 2;
    emit(h_lo, d0, 0.0, spec.height);
    emit(d1, h_hi, 0.0, spec.height);
    emit(d0, d1, door->height, spec.height);
  };
  auto find_door = [&](int a, int b) -> const Door* {
    for (const auto& d : doors) {
      if ((d.room_a == a && d.room_b == b) || (d.room_a == b && d.room_b == a)) return &d;
    }
    return nullptr;
  };

  for (int i = 0; i < static_cast<int>(rooms.size()); ++i) {
    const auto& room = rooms[static_cast<std::size_t>(i)];
    add(1, 0.0, room.lo.z(), room.hi.z(), room.lo.x(), room.hi.x(), random_material());
    add(1, spec.height, room.lo.z(), room.hi.z(), room.lo.x(), room.hi.x(), random_material());
    for (int d = 0; d < 4; ++d) {
      const int c = room.col + dc[d], r = room.row + dr[d];
      int other = -1;
      if (c >= 0 && r >= 0 && c < spec.grid_cols && r < spec.grid_rows) {
        other = room_of[static_cast<std::size_t>(cell_id(c, r))];
      }
      if (other >= 0 && other < i) continue;  // shared wall already emitted
      const int axis = dc[d] != 0 ? 0 : 2;
      const double plane = axis == 0 ? (dc[d] > 0 ? room.hi.x() : room.lo.x())
                                     : (dr[d] > 0 ? room.hi.z() : room.lo.z());
      const double h_lo = axis == 0 ? room.lo.z() : room.lo.x();
      const double h_hi = axis == 0 ? room.hi.z() : room.hi.x();
      add_wall(axis, plane, h_lo, h_hi, other >= 0 ? find_door(i, other) : nullptr, random_material());
    }
  }
  return SceneWorld(std::move(rooms), std::move(doors), std::move(surfaces), seed, spec.atlas_cell);
}

/// Connected components over the door graph (used by tests and validation).
inline bool rooms_connected(const SceneWorld& world) {
  const auto n = world.rooms().size();
  if (n == 0) return false;
  std::vector<int> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int r = stack.back();
    stack.pop_back();
    for (const auto& d : world.doors()) {
      int o = -1;
      if (d.room_a == r) o = d.room_b;
      if (d.room_b == r) o = d.room_a;
      if (o >= 0 && !seen[static_cast<std::size_t>(o)]) {
        seen[static_cast<std::size_t>(o)] = 1;
        stack.push_back(o);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s != 0; });
}

struct ViewRender {
  DepthMap depth;
  PixelImage rgb;
  std::vector<int> surface;          // per pixel, -1 when invalid
  std::vector<std::int64_t> cell;    // atlas cell per pixel, -1 when invalid
  bool inside_wall = false;
};

inline ViewRender render_view_detailed(const SceneWorld& world, const CameraPose& pose) {
  pose.validate();
  ViewRender out{DepthMap(pose.height, pose.width), PixelImage(pose.height, pose.width, 3),
                 std::vector<int>(static_cast<std::size_t>(pose.height) * pose.width, -1),
                 std::vector<std::int64_t>(static_cast<std::size_t>(pose.height) * pose.width, -1), false};
  if (!world.in_free_space(pose.translation)) {
    out.inside_wall = true;
    return out;
  }
  const double max_depth = world.diameter();
  for (int v = 0; v < pose.height; ++v) {
    for (int u = 0; u < pose.width; ++u) {
      // ray_direction has unit camera-z, so the hit parameter is optical depth
      const auto hit = world.raycast(pose.translation, pose.ray_direction(u, v));
      if (!hit || !(hit->t > 0.0) || !(hit->t < max_depth)) continue;
      const std::size_t i = static_cast<std::size_t>(v) * pose.width + u;
      out.depth.set(i, hit->t);
      out.surface[i] = hit->surface;
      out.cell[i] = world.cell_of(hit->surface, hit->point);
      const auto c = world.shaded_colour(hit->surface, hit->point);
      for (int k = 0; k < 3; ++k) out.rgb(v, u, k) = c[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

inline std::pair<DepthMap, PixelImage> render_view(const SceneWorld& world, const CameraPose& pose) {
  auto r = render_view_detailed(world, pose);
  return {std::move(r.depth), std::move(r.rgb)};
}

struct TrajectorySpec {
  int num_poses = 20;
  int width = 128;
  int height = 128;
  double hfov_deg = 90.0;
  double eye_height = 1.4;
  double sweep_deg = 35.0;  // yaw oscillation amplitude around the walking direction
  double sweep_period = 8.0;  // poses per oscillation
};

/// Walks the door tree depth-first from room 0 (returning through doors when
/// backtracking) and samples evenly spaced poses along the path.
inline std::vector<CameraPose> make_trajectory(const SceneWorld& world, const TrajectorySpec& spec) {
  if (spec.num_poses < 1) throw std::invalid_argument("TrajectorySpec.num_poses: must be >= 1");
  const auto& rooms = world.rooms();
  if (rooms.empty()) throw std::invalid_argument("make_trajectory: world has no rooms");
  std::vector<Eigen::Vector3d> path;
  auto at_eye = [&](Eigen::Vector3d p) {
    p.y() = spec.eye_height;
    return p;
  };
  std::vector<int> visited(rooms.size(), 0);
  std::size_t last_new = 0;
  auto dfs = [&](auto&& self, int r) -> void {
    visited[static_cast<std::size_t>(r)] = 1;
    path.push_back(at_eye(rooms[static_cast<std::size_t>(r)].centre()));
    last_new = path.size() - 1;
    for (const auto& d : world.doors()) {
      int o = -1;
      if (d.room_a == r) o = d.room_b;
      if (d.room_b == r) o = d.room_a;
      if (o < 0 || visited[static_cast<std::size_t>(o)]) continue;
      path.push_back(d.centre_point(spec.eye_height));
      self(self, o);
      path.push_back(d.centre_point(spec.eye_height));
      path.push_back(at_eye(rooms[static_cast<std::size_t>(r)].centre()));
    }
  };
  dfs(dfs, 0);
  // no need to walk back after the last new room
  path.resize(last_new + 1);
  if (path.size() == 1) {
    // single room: orbit in place
    std::vector<CameraPose> poses;
    for (int k = 0; k < spec.num_poses; ++k) {
      const double yaw = 2.0 * std::numbers::pi * k / spec.num_poses;
      poses.push_back(CameraPose::look(path[0], yaw, 0.0, spec.width, spec.height, spec.hfov_deg));
    }
    return poses;
  }
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < path.size(); ++i) cum.push_back(cum.back() + (path[i] - path[i - 1]).norm());
  const double total = cum.back();
  std::vector<CameraPose> poses;
  for (int k = 0; k < spec.num_poses; ++k) {
    // stay off the exact endpoints and door planes
    const double s = total * (k + 0.5) / spec.num_poses;
    std::size_t seg = 1;
    while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
    const double f = (s - cum[seg - 1]) / std::max(cum[seg] - cum[seg - 1], 1e-12);
    Eigen::Vector3d p = path[seg - 1] + f * (path[seg] - path[seg - 1]);
    const Eigen::Vector3d dir = path[seg] - path[seg - 1];
    const double heading = std::atan2(dir.x(), dir.z());
    const double yaw = heading + spec.sweep_deg * std::numbers::pi / 180.0 *
                                     std::sin(2.0 * std::numbers::pi * k / spec.sweep_period);
    if (!world.in_free_space(p)) p += 0.01 * dir.normalized();
    poses.push_back(CameraPose::look(p, yaw, 0.0, spec.width, spec.height, spec.hfov_deg));
  }
  return poses;
}

}  // namespace mosaic
