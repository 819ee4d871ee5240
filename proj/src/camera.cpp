#include "splatcull/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace splatcull {

double Camera::tan_half_fov_y() const { return std::tan(0.5 * fov_y); }

double Camera::tan_half_fov_x() const {
  return tan_half_fov_y() * static_cast<double>(width) / static_cast<double>(height);
}

double Camera::focal() const { return static_cast<double>(height) / (2.0 * tan_half_fov_y()); }

double Camera::focal_normalized() const { return 1.0 / (2.0 * tan_half_fov_y()); }

Eigen::Vector2d Camera::project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d c = to_camera(world);
  const double f = focal();
  return {f * c.x() / c.z() + 0.5 * width, f * c.y() / c.z() + 0.5 * height};
}

bool Camera::is_valid() const {
  const double err = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return err < 1e-6 && fov_y > 0.0 && fov_y < 3.14159 && width > 0 && height > 0 && near_clip > 0.0 &&
         far_clip > near_clip && focal() > 0.0;
}

Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& v) {
  const Eigen::Vector3d n = v.normalized();
  const Eigen::Vector3d axis = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return n.cross(axis).normalized();
}

Camera Camera::look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double fov_y, int width, int height, double near_clip,
                       double far_clip) {
  const Eigen::Vector3d to_target = target - position;
  if (!(to_target.norm() > 0.0)) throw std::invalid_argument("look_at: camera position equals target");
  const Eigen::Vector3d forward = to_target.normalized();
  Eigen::Vector3d up_hint = up.normalized();
  if (!(up.norm() > 0.0) || std::abs(forward.dot(up_hint)) > 0.999) {
    up_hint = any_perpendicular(forward);
  }
  const Eigen::Vector3d right = forward.cross(up_hint).normalized();
  const Eigen::Vector3d down = forward.cross(right).normalized();

  Camera cam;
  cam.position = position;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.fov_y = fov_y;
  cam.width = width;
  cam.height = height;
  cam.near_clip = near_clip;
  cam.far_clip = far_clip;
  return cam;
}

}  // namespace splatcull
