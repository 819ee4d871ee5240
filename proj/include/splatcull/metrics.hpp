#pragma once

#include "splatcull/scene.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace splatcull {

enum class Variant : std::uint8_t { full, no_mlp, mlp, mlp_radius_clip };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct SweepRow {
  double distance = 0.0;
  Variant variant = Variant::full;
  double psnr = 0.0;
  double ssim = 0.0;
  std::int64_t passed = 0;
  std::int64_t instantiated = 0;
  std::int64_t used = 0;
  std::int64_t mem_bytes = 0;
  double frame_ms = 0.0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Straight dolly: the camera sits at target + d * direction for n_steps
/// distances spaced evenly in [d_min, d_max].
struct Trajectory {
  int n_steps = 16;
  double d_min = 1.0;
  double d_max = 10.0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  double fov = 1.0471975511965976;
  int width = 256;
  int height = 256;

  std::vector<double> distances() const;
  Camera camera_at(double distance) const;
};

struct SweepOptions {
  std::vector<Variant> variants{Variant::full, Variant::no_mlp, Variant::mlp, Variant::mlp_radius_clip};
  /// Determinant threshold (px^2) used by the mlp+radius_clip variant; about a
  /// 0.07 px standard deviation.
  float radius_clip = 3e-5f;
  RenderOptions raster;
};

/// Renders every variant at every distance. "full" is the reference image for
/// PSNR/SSIM and is always rendered, even if not listed.
SweepResult distance_sweep(const ComposedScene& scene, const Trajectory& trajectory, const SweepOptions& opts = {});

inline constexpr std::string_view kCsvHeader = "distance,variant,psnr,ssim,passed,instantiated,used,mem_bytes,frame_ms";

std::string to_csv(const SweepResult& result);
SweepResult parse_csv(std::string_view text);
void emit_csv(const SweepResult& result, const std::filesystem::path& path);

struct VariantSummary {
  Variant variant = Variant::full;
  std::size_t rows = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double passed = 0.0;
  double instantiated = 0.0;
  double used = 0.0;
  double mem_bytes = 0.0;
  std::int64_t peak_mem_bytes = 0;
  double frame_ms = 0.0;
};

/// Per-variant arithmetic means over all rows, in first-seen variant order.
std::vector<VariantSummary> summarize(const SweepResult& result);
std::string format_summary(const std::vector<VariantSummary>& summary);
void emit_summary(const SweepResult& result, const std::filesystem::path& path);

}  // namespace splatcull
