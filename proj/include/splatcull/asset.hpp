#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatcull {

constexpr int kMaxShDegree = 3;
constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Opacity below which 3DGS assets are pruned before baking.
constexpr double kDefaultPruneThreshold = 1.0 / 255.0;

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }
inline float logit(float p) { return std::log(p / (1.0f - p)); }

/// One splat primitive, stored in its optimisation-space parameterisation:
/// log scales, opacity logit and a raw (w, x, y, z) quaternion.
struct Gaussian {
  Eigen::Vector3f mean = Eigen::Vector3f::Zero();
  Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
  Eigen::Vector4f rotation{1.0f, 0.0f, 0.0f, 0.0f};  // w, x, y, z
  float opacity_logit = 0.0f;
  /// sh[0] is the DC term; coefficients beyond the owning asset's degree are zero.
  std::array<Eigen::Vector3f, kMaxShCoeffs> sh{};

  Gaussian() { sh.fill(Eigen::Vector3f::Zero()); }

  float opacity() const { return sigmoid(opacity_logit); }
  float max_scale() const { return std::exp(log_scale.maxCoeff()); }
};

/// Size in bytes of one instantiated Gaussian with the given SH degree
/// (mean, scale, rotation, opacity and colour coefficients as f32).
constexpr std::int64_t gaussian_payload_bytes(int sh_degree) {
  return static_cast<std::int64_t>(3 + 3 + 4 + 1 + 3 * sh_coeff_count(sh_degree)) * 4;
}

struct Asset {
  std::vector<Gaussian> gaussians;
  /// Total translation applied by recenter() relative to the source file.
  Eigen::Vector3d center_offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Zero();
  /// Half the diagonal of the axis-aligned bounding box of the means.
  double bound_radius = 0.0;
  /// Camera sampling distances; zero until compute_sampling_distances is applied.
  double d_near = 0.0;
  double d_far = 0.0;
  int sh_degree = 0;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
  bool has_distances() const { return d_near > 0.0 && d_far > d_near; }
};

class AssetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public AssetError {
 public:
  using AssetError::AssetError;
};

/// Recomputes bbox_min/bbox_max/bound_radius from the means.
void update_bounds(Asset& asset);

/// Keeps Gaussians whose sigmoid(opacity_logit) >= threshold, order preserved.
Asset prune(Asset asset, double threshold = kDefaultPruneThreshold);

/// Translates the means so the bbox center sits at the origin.
Asset recenter(Asset asset);

struct SamplingDistances {
  double d_near = 0.0;
  double d_far = 0.0;
};

/// Camera distance at which an object of radius r covers the fraction p of
/// the image: d = r / (tan(fov / 2) * p).
double distance_for_fraction(double radius, double fov, double fraction);

SamplingDistances compute_sampling_distances(const Asset& asset, double fov, double p_near = 0.9,
                                             double p_far = 0.05);

/// Returns a copy with d_near/d_far filled in.
Asset with_sampling_distances(Asset asset, double fov, double p_near = 0.9, double p_far = 0.05);

/// Content hash over the Gaussian parameters (FNV-1a over raw f32 bits).
std::uint64_t asset_hash(const Asset& asset);

/// Binary little-endian 3DGS PLY.
Asset load_ply(const std::filesystem::path& path);
void save_ply(const Asset& asset, const std::filesystem::path& path);

}  // namespace splatcull
