#pragma once

#include <Eigen/Core>

namespace splatcull {

/// Pinhole camera. Camera space is x right, y down, z forward; pixel (x, y)
/// samples the image-plane point (x, y) with the principal point at
/// (width / 2, height / 2).
struct Camera {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// World-to-camera rotation; rows are the right, down and forward axes.
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double fov_y = 1.0471975511965976;  // 60 degrees
  int width = 256;
  int height = 256;
  double near_clip = 0.01;
  double far_clip = 1000.0;

  /// Focal length in pixels.
  double focal() const;
  /// Focal length in units of the image height; independent of resolution.
  double focal_normalized() const;
  double tan_half_fov_y() const;
  double tan_half_fov_x() const;

  Eigen::Vector3d right() const { return rotation.row(0).transpose(); }
  Eigen::Vector3d down() const { return rotation.row(1).transpose(); }
  Eigen::Vector3d forward() const { return rotation.row(2).transpose(); }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation * (world - position); }

  /// Pixel coordinates of a world point (no clipping).
  Eigen::Vector2d project(const Eigen::Vector3d& world) const;

  bool is_valid() const;

  /// Camera at `position` looking at `target`. If `up` is (nearly) parallel to
  /// the view direction a perpendicular fallback is used.
  static Camera look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double fov_y, int width, int height,
                        double near_clip = 0.01, double far_clip = 1000.0);
};

/// Any unit vector perpendicular to `v`.
Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& v);

}  // namespace splatcull
