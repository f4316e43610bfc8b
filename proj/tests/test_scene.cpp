#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <queue>
#include <random>
#include <unordered_set>

#include "mosaic/keyframes.hpp"
#include "mosaic/scene.hpp"
#include "mosaic/warp.hpp"
#include "test_support.hpp"

using namespace mosaic;
using mosaic::testing::test_room;

namespace {

constexpr double kPi = std::numbers::pi;

// Walks a 10 cm grid at knee height, moving between neighbours only when the
// straight segment is not blocked, and reports which room centres are reached.
std::vector<bool> reachable_rooms(const SceneWorld& world) {
  Eigen::Vector3d lo = world.rooms()[0].lo, hi = world.rooms()[0].hi;
  for (const auto& r : world.rooms()) {
    lo = lo.cwiseMin(r.lo);
    hi = hi.cwiseMax(r.hi);
  }
  const double step = 0.1, y = 0.8;
  const int nx = static_cast<int>((hi.x() - lo.x()) / step), nz = static_cast<int>((hi.z() - lo.z()) / step);
  auto point = [&](int i, int k) { return Eigen::Vector3d(lo.x() + (i + 0.5) * step, y, lo.z() + (k + 0.5) * step); };
  std::vector<char> seen(static_cast<std::size_t>(nx * nz), 0);
  const Eigen::Vector3d start = world.rooms()[0].centre();
  const int si = static_cast<int>((start.x() - lo.x()) / step), sk = static_cast<int>((start.z() - lo.z()) / step);
  std::queue<std::pair<int, int>> q;
  q.push({si, sk});
  seen[static_cast<std::size_t>(sk * nx + si)] = 1;
  const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    const auto [i, k] = q.front();
    q.pop();
    for (int d = 0; d < 4; ++d) {
      const int a = i + di[d], b = k + dk[d];
      if (a < 0 || b < 0 || a >= nx || b >= nz || seen[static_cast<std::size_t>(b * nx + a)]) continue;
      const Eigen::Vector3d from = point(i, k), to = point(a, b);
      if (!world.in_free_space(to)) continue;
      const auto hit = world.raycast(from, (to - from) / step);
      if (hit && hit->t < 1.0) continue;
      seen[static_cast<std::size_t>(b * nx + a)] = 1;
      q.push({a, b});
    }
  }
  std::vector<bool> out;
  for (const auto& r : world.rooms()) {
    const Eigen::Vector3d c = r.centre();
    const int i = static_cast<int>((c.x() - lo.x()) / step), k = static_cast<int>((c.z() - lo.z()) / step);
    out.push_back(seen[static_cast<std::size_t>(k * nx + i)] != 0);
  }
  return out;
}

// Exit distance of a ray started inside an axis-aligned box.
double box_exit(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                const Eigen::Vector3d& hi) {
  double t = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0) t = std::min(t, (hi[a] - o[a]) / d[a]);
    if (d[a] < 0) t = std::min(t, (lo[a] - o[a]) / d[a]);
  }
  return t;
}

}  // namespace

TEST(GenerateScene, SameSeedSameWorld) {
  SceneSpec spec;
  spec.rooms = 1;
  EXPECT_EQ(generate_scene(spec, 7), generate_scene(spec, 7));
  spec.rooms = 3;
  EXPECT_EQ(generate_scene(spec, 7), generate_scene(spec, 7));
  EXPECT_FALSE(generate_scene(spec, 7) == generate_scene(spec, 8));
}

TEST(GenerateScene, EveryRoomReachableThroughOpenings) {
  SceneSpec spec;
  spec.rooms = 3;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto world = generate_scene(spec, seed);
    ASSERT_EQ(world.rooms().size(), 3u);
    ASSERT_EQ(world.doors().size(), 2u);
    EXPECT_TRUE(rooms_connected(world));
    const auto reached = reachable_rooms(world);
    for (std::size_t r = 0; r < reached.size(); ++r) EXPECT_TRUE(reached[r]) << "seed " << seed << " room " << r;
  }
}

TEST(GenerateScene, ReachabilityOracleSeesClosedWalls) {
  const auto a = SceneWorld::box({-2.0, 0.0, -2.0}, {2.0, 3.0, 2.0});
  const auto b = SceneWorld::box({2.0, 0.0, -2.0}, {6.0, 3.0, 2.0});
  auto surfaces = a.surfaces();
  surfaces.insert(surfaces.end(), b.surfaces().begin(), b.surfaces().end());
  const SceneWorld sealed({a.rooms()[0], b.rooms()[0]}, {}, surfaces, 0, 0.05);
  EXPECT_FALSE(rooms_connected(sealed));
  const auto reached = reachable_rooms(sealed);
  EXPECT_TRUE(reached[0]);
  EXPECT_FALSE(reached[1]);
}

TEST(GenerateScene, WallsWithoutDoorsSeparateRooms) {
  // Nine rooms in a 3 x 3 grid use a spanning tree of doors: 8 openings, not 12.
  SceneSpec spec;
  spec.rooms = 9;
  const auto world = generate_scene(spec, 5);
  EXPECT_EQ(world.doors().size(), 8u);
  const auto reached = reachable_rooms(world);
  for (bool r : reached) EXPECT_TRUE(r);
}

TEST(GenerateScene, RejectsImpossibleSpecs) {
  SceneSpec spec;
  spec.rooms = 0;
  EXPECT_THROW(generate_scene(spec, 0), std::invalid_argument);
  spec.rooms = 10;  // 3 x 3 grid
  EXPECT_THROW(generate_scene(spec, 0), std::invalid_argument);
  spec = SceneSpec{};
  spec.door_width = 4.0;
  EXPECT_THROW(generate_scene(spec, 0), std::invalid_argument);
  spec = SceneSpec{};
  spec.texture_family = "marble";
  EXPECT_THROW(generate_scene(spec, 0), std::invalid_argument);
}

TEST(GenerateScene, AlbedoStaysInUnitRange) {
  SceneSpec spec;
  spec.rooms = 4;
  const auto world = generate_scene(spec, 11);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (const auto& s : world.surfaces()) {
    for (int k = 0; k < 50; ++k) {
      Eigen::Vector3d p;
      p[s.axis] = s.plane;
      p[s.axis_u()] = s.lo[0] + u01(rng) * (s.hi[0] - s.lo[0]);
      p[s.axis_v()] = s.lo[1] + u01(rng) * (s.hi[1] - s.lo[1]);
      for (double c : world.albedo(s.id, p)) {
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
      }
    }
  }
}

TEST(Atlas, CellCentreMapsBackToItsCell) {
  SceneSpec spec;
  spec.rooms = 2;
  const auto world = generate_scene(spec, 3);
  for (std::int64_t c = 0; c < world.total_cells(); c += 97) {
    const auto p = world.cell_centre(c);
    const int s = world.locate(p);
    ASSERT_GE(s, 0);
    EXPECT_EQ(world.cell_of(s, p), c);
  }
}

TEST(Render, FrontoParallelWallGivesConstantDepth) {
  const auto world = SceneWorld::box({-20.0, -20.0, -20.0}, {20.0, 20.0, 2.0});
  const auto pose = CameraPose::look({0.0, 0.0, 0.0}, 0.0, 0.0, 33, 25, 60.0);
  const auto [depth, rgb] = render_view(world, pose);
  ASSERT_EQ(depth.valid_count(), depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) ASSERT_NEAR(depth.depth(i), 2.0, 1e-12);
}

TEST(Render, CentrePixelMatchesRayBoxIntersection) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-1.5, 1.5), h(0.2, 2.8), yaw(-kPi, kPi), pitch(-1.2, 1.2);
  const Eigen::Vector3d lo(-2.0, 0.0, -2.0), hi(2.0, 3.0, 2.0);
  const auto world = test_room();
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector3d o(pos(rng), h(rng), pos(rng));
    const auto pose = CameraPose::look(o, yaw(rng), pitch(rng), 9, 7, 70.0);
    const auto [depth, rgb] = render_view(world, pose);
    const Eigen::Vector3d fwd = pose.rotation.col(2);
    ASSERT_TRUE(depth.valid(3, 4));
    EXPECT_NEAR(depth.depth(3, 4), box_exit(o, fwd, lo, hi), 1e-9);
  }
}

TEST(Render, DepthIsOpticalAxisDistance) {
  // The corner pixel's ray is longer than its depth by the ray's norm.
  const auto world = SceneWorld::box({-20.0, -20.0, -20.0}, {20.0, 20.0, 3.0});
  const auto pose = CameraPose::look({0.0, 0.0, 0.0}, 0.0, 0.0, 16, 16, 90.0);
  const auto [depth, rgb] = render_view(world, pose);
  EXPECT_NEAR(depth.depth(0, 0), 3.0, 1e-12);
  const auto hit = world.raycast(pose.translation, pose.ray_direction(0, 0).normalized());
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->t, 3.0 * pose.ray_direction(0, 0).norm(), 1e-9);
}

TEST(Render, Deterministic) {
  SceneSpec spec;
  const auto world = generate_scene(spec, 9);
  const auto traj = make_trajectory(world, TrajectorySpec{});
  for (const auto& pose : {traj[0], traj[7], traj[15]}) {
    const auto a = render_view_detailed(world, pose);
    const auto b = render_view_detailed(world, pose);
    EXPECT_EQ(a.depth, b.depth);
    EXPECT_EQ(a.rgb, b.rgb);
    EXPECT_EQ(a.cell, b.cell);
    EXPECT_FALSE(a.inside_wall);
    for (double v : a.rgb.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Render, DepthBoundedBySceneDiameter) {
  SceneSpec spec;
  spec.rooms = 3;
  const auto world = generate_scene(spec, 2);
  for (const auto& pose : make_trajectory(world, TrajectorySpec{12, 32, 32})) {
    const auto [depth, rgb] = render_view(world, pose);
    EXPECT_EQ(depth.valid_count(), depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) {
      ASSERT_GT(depth.depth(i), 0.0);
      ASSERT_LT(depth.depth(i), world.diameter());
    }
  }
}

TEST(Render, CameraInsideWallIsFlagged) {
  const auto world = test_room();
  for (const Eigen::Vector3d& p : {Eigen::Vector3d(2.0, 1.5, 0.0), Eigen::Vector3d(5.0, 1.5, 0.0),
                                   Eigen::Vector3d(0.0, 0.0, 0.0)}) {
    const auto r = render_view_detailed(world, CameraPose::look(p, 0.0, 0.0, 8, 8, 60.0));
    EXPECT_TRUE(r.inside_wall);
    EXPECT_EQ(r.depth.valid_count(), 0u);
  }
}

TEST(Trajectory, PosesStayInFreeSpace) {
  SceneSpec spec;
  spec.rooms = 3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto world = generate_scene(spec, seed);
    const auto traj = make_trajectory(world, TrajectorySpec{});
    ASSERT_EQ(traj.size(), 20u);
    for (const auto& p : traj) EXPECT_TRUE(world.in_free_space(p.translation));
  }
}

TEST(KeyFrames, IdenticalPosesSelectOneFrame) {
  const auto world = test_room();
  const std::vector<CameraPose> traj(6, CameraPose::look({0.0, 1.5, 0.0}, 0.3, 0.0, 32, 32, 80.0));
  const auto sel = select_key_frames(traj, world, {0.3, 0.9, 0, 0.01});
  ASSERT_EQ(sel.indices.size(), 1u);
  EXPECT_EQ(sel.indices[0], 0);
  EXPECT_FALSE(sel.target_unreached);
  EXPECT_DOUBLE_EQ(sel.coverage, 1.0);
}

TEST(KeyFrames, DisjointSecondFrameIsNeverSelected) {
  const auto world = test_room();
  const std::vector<CameraPose> traj{CameraPose::look({0.0, 1.5, 0.0}, 0.0, 0.0, 32, 32, 80.0),
                                     CameraPose::look({0.0, 1.5, 0.0}, kPi, 0.0, 32, 32, 80.0)};
  const auto sel = select_key_frames(traj, world, {0.3, 0.9, 0, 0.01});
  ASSERT_EQ(sel.indices.size(), 1u);
  EXPECT_TRUE(sel.target_unreached);
  EXPECT_LT(sel.coverage, 0.9);
}

TEST(KeyFrames, SweepMeetsCoverageAndOverlap) {
  SceneSpec spec;
  spec.rooms = 2;
  const auto world = generate_scene(spec, 1);
  const auto traj = make_trajectory(world, TrajectorySpec{20, 48, 48});
  const KeyFrameParams params{0.3, 0.9, 0, 0.01};
  const auto sel = select_key_frames(traj, world, params);

  // coverage oracle: union of visible atlas cells, recomputed from scratch
  std::vector<ViewRender> renders;
  std::unordered_set<std::int64_t> all, covered;
  for (const auto& p : traj) {
    renders.push_back(render_view_detailed(world, p));
    for (auto c : renders.back().cell) {
      if (c >= 0) all.insert(c);
    }
  }
  for (int i : sel.indices) {
    for (auto c : renders[static_cast<std::size_t>(i)].cell) {
      if (c >= 0) covered.insert(c);
    }
  }
  const double coverage = static_cast<double>(covered.size()) / static_cast<double>(all.size());
  EXPECT_NEAR(sel.coverage, coverage, 1e-12);
  EXPECT_GE(coverage, 0.9);
  EXPECT_FALSE(sel.target_unreached);

  ASSERT_GE(sel.indices.size(), 2u);
  for (std::size_t k = 1; k < sel.indices.size(); ++k) {
    const auto c = static_cast<std::size_t>(sel.indices[k]);
    double best = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      const auto s = static_cast<std::size_t>(sel.indices[m]);
      best = std::max(best, overlap_ratio(compute_warp(traj[c], renders[c].depth, traj[s], renders[s].depth, 0.01)));
    }
    EXPECT_GE(best, params.min_overlap) << "frame " << c;
  }
}

TEST(KeyFrames, MaxFramesCapsSelection) {
  SceneSpec spec;
  const auto world = generate_scene(spec, 1);
  const auto traj = make_trajectory(world, TrajectorySpec{20, 32, 32});
  const auto sel = select_key_frames(traj, world, {0.3, 0.99, 3, 0.01});
  EXPECT_LE(sel.indices.size(), 3u);
}

TEST(KeyFrames, RejectsBadParameters) {
  const auto world = test_room();
  const std::vector<CameraPose> traj{CameraPose::look({0.0, 1.5, 0.0}, 0.0, 0.0, 8, 8, 80.0)};
  EXPECT_THROW(select_key_frames({}, world, {}), std::invalid_argument);
  EXPECT_THROW(select_key_frames(traj, world, {0.0, 0.9, 0, 0.01}), std::invalid_argument);
  EXPECT_THROW(select_key_frames(traj, world, {1.0, 0.9, 0, 0.01}), std::invalid_argument);
}
