#include "splatcull/synth.hpp"

#include "splatcull/sampling.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace splatcull {
namespace {

constexpr float kShC0 = 0.28209479177387814f;

/// DC coefficient producing `rgb` after the +0.5 offset.
Eigen::Vector3f dc_for_color(const Eigen::Vector3f& rgb) { return (rgb.array() - 0.5f) / kShC0; }

/// Smooth colour field so renders have structure for SSIM to see.
Eigen::Vector3f color_at(const Eigen::Vector3d& p) {
  return Eigen::Vector3f(static_cast<float>(0.45 + 0.35 * std::sin(3.0 * p.x())),
                         static_cast<float>(0.40 + 0.30 * std::cos(2.0 * p.y() + 1.0)),
                         static_cast<float>(0.35 + 0.30 * std::sin(4.0 * p.z() + 2.0)));
}

void append_sheet(Asset& out, int n, double z, double extent, double alpha, std::mt19937_64& rng) {
  const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  const double spacing = extent / side;
  std::uniform_real_distribution<double> jitter(-0.25 * spacing, 0.25 * spacing);
  const float log_in_plane = static_cast<float>(std::log(spacing));
  const float log_normal = static_cast<float>(std::log(0.1 * spacing));
  for (int i = 0; i < n; ++i) {
    const int row = i / side;
    const int col = i % side;
    const double x = -0.5 * extent + (col + 0.5) * spacing + jitter(rng);
    const double y = -0.5 * extent + (row + 0.5) * spacing + jitter(rng);
    Gaussian g;
    g.mean = Eigen::Vector3f(static_cast<float>(x), static_cast<float>(y), static_cast<float>(z));
    g.log_scale = Eigen::Vector3f(log_in_plane, log_in_plane, log_normal);
    g.opacity_logit = logit(static_cast<float>(alpha));
    g.sh[0] = dc_for_color(color_at({x, y, z}));
    out.gaussians.push_back(g);
  }
}

}  // namespace

Asset make_shell(int n, double radius, double thickness, double alpha, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("shell needs at least one Gaussian");
  if (!(radius > 0.0) || !(thickness > 0.0)) throw std::invalid_argument("shell radius and thickness must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("shell alpha must lie in (0, 1)");

  // A random rotation of the lattice keeps different seeds distinct while the
  // point set stays uniform.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
  q.normalize();
  const Eigen::Matrix3d rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();

  Asset asset;
  asset.gaussians.reserve(static_cast<std::size_t>(n));
  const float log_scale = static_cast<float>(std::log(thickness));
  for (const auto& dir : fibonacci_directions(n)) {
    const Eigen::Vector3d p = radius * (rot * dir).normalized();
    Gaussian g;
    g.mean = p.cast<float>();
    g.log_scale.setConstant(log_scale);
    g.opacity_logit = logit(static_cast<float>(alpha));
    g.sh[0] = dc_for_color(color_at(p / radius));
    asset.gaussians.push_back(g);
  }
  update_bounds(asset);
  return with_sampling_distances(std::move(asset), std::numbers::pi / 3.0);
}

Asset make_slab_pair(const SlabConfig& cfg) {
  if (cfg.n_front < 1 || cfg.n_back < 1) throw std::invalid_argument("slab sheets need at least one Gaussian");
  if (cfg.gap < 0.0) throw std::invalid_argument("slab gap must be >= 0");
  if (!(cfg.extent_front > 0.0 && cfg.extent_back > 0.0)) throw std::invalid_argument("slab extents must be > 0");
  std::mt19937_64 rng(cfg.seed);
  Asset asset;
  asset.gaussians.reserve(static_cast<std::size_t>(cfg.n_front + cfg.n_back));
  append_sheet(asset, cfg.n_front, 0.5 * cfg.gap, cfg.extent_front, cfg.alpha_front, rng);
  append_sheet(asset, cfg.n_back, -0.5 * cfg.gap, cfg.extent_back, cfg.alpha_back, rng);
  update_bounds(asset);
  return with_sampling_distances(std::move(asset), std::numbers::pi / 3.0);
}

}  // namespace splatcull
