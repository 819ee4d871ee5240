#pragma once

#include "splatcull/asset.hpp"
#include "splatcull/camera.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

namespace test {

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("splatcull_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline splatcull::Gaussian random_gaussian(std::mt19937_64& rng, double spread = 1.0, int sh_degree = 0) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::normal_distribution<float> n;
  splatcull::Gaussian g;
  g.mean = Eigen::Vector3f(u(rng), u(rng), u(rng)) * static_cast<float>(spread);
  g.log_scale = Eigen::Vector3f(u(rng), u(rng), u(rng)) * 0.7f - Eigen::Vector3f::Constant(2.5f);
  g.rotation = Eigen::Vector4f(n(rng), n(rng), n(rng), n(rng)).normalized();
  g.opacity_logit = 3.0f * u(rng);
  for (int k = 0; k < splatcull::sh_coeff_count(sh_degree); ++k) g.sh[k] = Eigen::Vector3f(u(rng), u(rng), u(rng));
  return g;
}

inline splatcull::Asset random_asset(std::size_t n, std::uint64_t seed, int sh_degree = 0, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  splatcull::Asset a;
  a.sh_degree = sh_degree;
  for (std::size_t i = 0; i < n; ++i) a.gaussians.push_back(random_gaussian(rng, spread, sh_degree));
  splatcull::update_bounds(a);
  return a;
}

/// Camera on +z looking at the origin.
inline splatcull::Camera front_camera(double distance, int size = 128, double fov = 1.0471975511965976) {
  return splatcull::Camera::look_at({0.0, 0.0, distance}, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), fov,
                                    size, size, 0.01, 1000.0);
}

inline Eigen::Vector4d random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)).normalized();
}

inline Eigen::Matrix3d quaternion_matrix(const Eigen::Vector4d& q) {
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

}  // namespace test
