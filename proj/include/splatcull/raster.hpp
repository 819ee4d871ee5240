#pragma once

#include "splatcull/asset.hpp"
#include "splatcull/camera.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace splatcull {

/// Low-pass dilation added to the projected covariance (pixels^2).
constexpr float kCovarianceDilation = 0.3f;
/// Upper clamp on per-pixel alpha.
constexpr float kMaxAlpha = 0.99f;
/// Per-pixel alpha below which a splat is skipped.
constexpr float kMinAlpha = 1.0f / 255.0f;
/// Default early-termination transmittance.
constexpr float kDefaultMinTransmittance = 1.0f / 255.0f;
/// Determinants at or below this are treated as singular.
constexpr float kMinCovDeterminant = 1e-12f;

struct Projection {
  Eigen::Vector2f mean2d;
  /// Screen-space covariance including the low-pass dilation.
  Eigen::Matrix2f cov2d;
  /// Screen-space covariance before dilation.
  Eigen::Matrix2f cov2d_raw;
  float depth = 0.0f;
};

/// EWA projection of a Gaussian; nullopt when its depth is not beyond the
/// near plane.
std::optional<Projection> project_gaussian(const Gaussian& g, const Camera& cam);

/// World-space 3D covariance R S S^T R^T.
Eigen::Matrix3f covariance3d(const Gaussian& g);

/// Rotation matrix of a (w, x, y, z) quaternion; the quaternion is normalised first.
Eigen::Matrix3f quaternion_to_matrix(const Eigen::Vector4f& q);

/// Mean-based frustum test. `margin` widens every plane except near.
bool in_frustum(const Eigen::Vector3f& mean, float margin, const Camera& cam);

/// Margin used by the frustum test for a Gaussian: 3 sigma of its largest axis.
inline float frustum_margin(float max_log_scale, bool enabled) {
  return enabled ? 3.0f * std::exp(max_log_scale) : 0.0f;
}

/// Colour of a Gaussian seen along `dir` (unit, camera to Gaussian).
Eigen::Vector3f evaluate_sh(const Gaussian& g, int degree, const Eigen::Vector3f& dir);

struct RenderOptions {
  int sh_degree_eval = 0;
  bool record_contributions = false;
  /// Splats whose undilated covariance determinant is below this are dropped.
  std::optional<float> radius_clip;
  int tile_size = 16;
  float min_transmittance = kDefaultMinTransmittance;
  Eigen::Vector3f background = Eigen::Vector3f::Ones();
  bool frustum_margin = true;
  /// Debug: keep every (pixel, gaussian, C) triple. Expensive.
  bool record_pixel_contributions = false;
  int threads = 0;
};

struct PixelContribution {
  std::uint32_t pixel;
  std::uint32_t gaussian;
  double value;
};

struct RenderOutput {
  int width = 0;
  int height = 0;
  /// Row-major H x W x 3, values in [0, 1].
  std::vector<float> image;
  /// Row-major H x W.
  std::vector<float> final_transmittance;
  /// Per input Gaussian max over pixels of alpha * T; empty unless recorded.
  std::vector<float> contribution_max;
  std::int64_t used_count = 0;
  std::int64_t passed_count = 0;
  std::int64_t skipped_ill_conditioned = 0;
  std::vector<PixelContribution> pixel_contributions;

  Eigen::Vector3f pixel(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {image[i], image[i + 1], image[i + 2]};
  }
};

RenderOutput render(std::span<const Gaussian> gaussians, const Camera& cam, const RenderOptions& opts = {});

/// Flat f32 contribution record: 16-byte header {magic, version, count}.
void write_contributions(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_contributions(const std::filesystem::path& path);

/// 8-bit RGB PNG of an H x W x 3 float image.
void write_png(const std::filesystem::path& path, std::span<const float> image, int width, int height);

}  // namespace splatcull
