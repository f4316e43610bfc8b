// Pinhole cameras and depth rasters.
//
// Conventions: the camera looks down +z, x points right and y points down in
// the image. Pixel centres lie on integer coordinates. Depth is the camera-z
// coordinate of the surface point (optical-axis depth, not ray length).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mosaic {

struct CameraPose {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world_from_camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // camera centre in world
  int height = 1;
  int width = 1;

  /// Camera at `position` with heading `yaw` (radians, about world +y, 0 looks
  /// down world +z) and `pitch` (positive looks up). World y points up.
  static CameraPose look(const Eigen::Vector3d& position, double yaw, double pitch, int width,
                         int height, double hfov_deg) {
    CameraPose p;
    p.width = width;
    p.height = height;
    p.fx = (width / 2.0) / std::tan(hfov_deg * std::numbers::pi / 360.0);
    p.fy = p.fx;
    p.cx = (width - 1) / 2.0;
    p.cy = (height - 1) / 2.0;
    const Eigen::Vector3d forward(std::sin(yaw) * std::cos(pitch), std::sin(pitch),
                                  std::cos(yaw) * std::cos(pitch));
    const Eigen::Vector3d world_up(0.0, 1.0, 0.0);
    Eigen::Vector3d right = forward.cross(world_up);
    if (right.norm() < 1e-12) right = Eigen::Vector3d(-1.0, 0.0, 0.0);
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);
    p.rotation.col(0) = right;
    p.rotation.col(1) = down;
    p.rotation.col(2) = forward;
    p.translation = position;
    return p;
  }

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("CameraPose: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("CameraPose: resolution must be positive");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9 ||
        !(rotation.transpose() * rotation).isApprox(Eigen::Matrix3d::Identity(), 1e-9)) {
      throw std::invalid_argument("CameraPose: rotation is not a proper rotation");
    }
  }

  Eigen::Vector3d ray_direction(double u, double v) const {
    return rotation * Eigen::Vector3d((u - cx) / fx, (v - cy) / fy, 1.0);
  }

  Eigen::Vector3d unproject(double u, double v, double depth) const {
    return translation + depth * ray_direction(u, v);
  }

  /// Returns (u, v, depth); depth <= 0 means the point is behind the camera.
  Eigen::Vector3d project(const Eigen::Vector3d& world) const {
    const Eigen::Vector3d c = rotation.transpose() * (world - translation);
    if (c.z() <= 0.0) return {0.0, 0.0, c.z()};
    return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy, c.z()};
  }

  /// Same camera at half resolution; pixel (u, v) of the result covers pixels
  /// 2u, 2u + 1 of the original.
  CameraPose downsampled() const {
    CameraPose p = *this;
    p.width = width / 2;
    p.height = height / 2;
    p.fx = fx / 2.0;
    p.fy = fy / 2.0;
    p.cx = (cx - 0.5) / 2.0;
    p.cy = (cy - 0.5) / 2.0;
    return p;
  }
};

class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int height, int width)
      : height_(height), width_(width),
        depth_(static_cast<std::size_t>(height) * width, 0.0),
        valid_(static_cast<std::size_t>(height) * width, 0) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("DepthMap: dimensions must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return depth_.size(); }

  double depth(std::size_t i) const { return depth_[i]; }
  double depth(int y, int x) const { return depth_[idx(y, x)]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  bool valid(int y, int x) const { return valid_[idx(y, x)] != 0; }

  void set(int y, int x, double d) { set(idx(y, x), d); }
  void set(std::size_t i, double d) {
    depth_[i] = d;
    valid_[i] = 1;
  }
  void invalidate(std::size_t i) {
    depth_[i] = 0.0;
    valid_[i] = 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v;
    return n;
  }

  /// Half resolution: min-pooled depth, valid only when all four sources are.
  DepthMap min_pool2() const {
    DepthMap out(height_ / 2, width_ / 2);
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        bool ok = true;
        double m = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = idx(2 * y + dy, 2 * x + dx);
            if (!valid_[i]) ok = false;
            m = (dy == 0 && dx == 0) ? depth_[i] : std::min(m, depth_[i]);
          }
        }
        if (ok) out.set(y, x, m);
      }
    }
    return out;
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * width_ + x; }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> depth_;
  std::vector<std::uint8_t> valid_;
};

}  // namespace mosaic
