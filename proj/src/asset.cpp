#include "splatcull/asset.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace splatcull {

void update_bounds(Asset& asset) {
  if (asset.gaussians.empty()) {
    asset.bbox_min.setZero();
    asset.bbox_max.setZero();
    asset.bound_radius = 0.0;
    return;
  }
  Eigen::Vector3d lo = asset.gaussians.front().mean.cast<double>();
  Eigen::Vector3d hi = lo;
  for (const auto& g : asset.gaussians) {
    const Eigen::Vector3d m = g.mean.cast<double>();
    lo = lo.cwiseMin(m);
    hi = hi.cwiseMax(m);
  }
  asset.bbox_min = lo;
  asset.bbox_max = hi;
  asset.bound_radius = 0.5 * (hi - lo).norm();
}

Asset prune(Asset asset, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("prune threshold must lie in [0, 1)");
  }
  std::erase_if(asset.gaussians, [threshold](const Gaussian& g) {
    return static_cast<double>(g.opacity()) < threshold;
  });
  update_bounds(asset);
  return asset;
}

Asset recenter(Asset asset) {
  if (asset.gaussians.empty()) throw AssetError("cannot recenter an empty asset");
  update_bounds(asset);
  const Eigen::Vector3d center = 0.5 * (asset.bbox_min + asset.bbox_max);
  const Eigen::Vector3f shift = center.cast<float>();
  for (auto& g : asset.gaussians) g.mean -= shift;
  asset.center_offset += shift.cast<double>();
  update_bounds(asset);
  return asset;
}

double distance_for_fraction(double radius, double fov, double fraction) {
  return radius / (std::tan(0.5 * fov) * fraction);
}

SamplingDistances compute_sampling_distances(const Asset& asset, double fov, double p_near,
                                             double p_far) {
  if (!(fov > 0.0 && fov < std::numbers::pi)) {
    throw std::invalid_argument("fov must lie in (0, pi)");
  }
  if (!(p_far > 0.0 && p_far < p_near && p_near <= 1.0)) {
    throw std::invalid_argument("screen fractions must satisfy 0 < p_far < p_near <= 1");
  }
  if (!(asset.bound_radius > 0.0)) {
    throw AssetError("degenerate asset: bounding radius is zero");
  }
  return {distance_for_fraction(asset.bound_radius, fov, p_near),
          distance_for_fraction(asset.bound_radius, fov, p_far)};
}

Asset with_sampling_distances(Asset asset, double fov, double p_near, double p_far) {
  update_bounds(asset);
  const auto d = compute_sampling_distances(asset, fov, p_near, p_far);
  asset.d_near = d.d_near;
  asset.d_far = d.d_far;
  return asset;
}

namespace {

struct Fnv1a {
  std::uint64_t state = 1469598103934665603ull;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 1099511628211ull;
    }
  }
  void f32(float v) { bytes(&v, sizeof v); }
};

}  // namespace

std::uint64_t asset_hash(const Asset& asset) {
  Fnv1a h;
  const std::uint64_t n = asset.gaussians.size();
  h.bytes(&n, sizeof n);
  const std::int32_t deg = asset.sh_degree;
  h.bytes(&deg, sizeof deg);
  const int coeffs = sh_coeff_count(asset.sh_degree);
  for (const auto& g : asset.gaussians) {
    for (int i = 0; i < 3; ++i) h.f32(g.mean[i]);
    for (int i = 0; i < 3; ++i) h.f32(g.log_scale[i]);
    for (int i = 0; i < 4; ++i) h.f32(g.rotation[i]);
    h.f32(g.opacity_logit);
    for (int k = 0; k < coeffs; ++k)
      for (int c = 0; c < 3; ++c) h.f32(g.sh[k][c]);
  }
  return h.state;
}

}  // namespace splatcull
