#pragma once

#include "splatcull/asset.hpp"
#include "splatcull/camera.hpp"
#include "splatcull/raster.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

namespace splatcull {

enum class SamplerKind : std::uint8_t { fibonacci = 0, longlat = 1 };

struct SamplingConfig {
  int n_directions = 256;
  int n_distances = 8;
  double fov = std::numbers::pi / 3.0;
  int image_size = 128;
  int n_aux_views = 6;
  double aux_cone_half_angle = 3.0 * std::numbers::pi / 180.0;
  bool offset_enabled = true;
  /// Overrides the default (min bbox extent / max bbox extent) offset ratio.
  std::optional<double> offset_scale_ratio;
  SamplerKind sampler_kind = SamplerKind::fibonacci;
  std::uint64_t seed = 1;
  /// Forwarded to the label renders.
  int sh_degree_eval = 0;
  float min_transmittance = kDefaultMinTransmittance;

  void validate() const;
};

struct TrainView {
  Camera camera;
  /// Unit vector from the asset origin to the camera.
  Eigen::Vector3d direction_unit;
  double distance = 0.0;
  Eigen::Vector3d target_offset = Eigen::Vector3d::Zero();
  std::vector<Camera> aux_cameras;
};

/// Standard Fibonacci lattice: z_i = 1 - 2(i + 0.5)/n, golden-angle azimuth.
std::vector<Eigen::Vector3d> fibonacci_directions(int n);

/// Equal-angle latitude/longitude grid with exactly n points.
std::vector<Eigen::Vector3d> longlat_directions(int n);

/// Offset magnitude at `distance`: zero at d_near, growing linearly to
/// bound_radius * ratio at d_far.
double offset_magnitude(const Asset& asset, double ratio, double distance);

/// Default offset ratio: smallest over largest bbox extent.
double default_offset_ratio(const Asset& asset);

/// True when all eight bbox corners lie inside the camera frustum.
bool frustum_contains_bbox(const Camera& cam, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi);

/// Camera near/far planes used for sampled views at `distance`.
Camera make_sample_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target, double fov,
                          int image_size, double distance, double bound_radius);

/// Direction-major list: view index = direction * n_distances + distance.
std::vector<TrainView> build_views(const Asset& asset, const SamplingConfig& cfg);

/// Bit vector over Gaussians.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  std::size_t count() const;
  BitVector& operator|=(const BitVector& other);
  bool operator==(const BitVector& other) const = default;

  std::vector<std::uint64_t>& words() { return words_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

BitVector contribution_mask(const RenderOutput& out);

/// Bit g set iff Gaussian g contributes to the main view or any auxiliary view.
BitVector visible_labels(const Asset& asset, const TrainView& view, const SamplingConfig& cfg, int threads = 1);

}  // namespace splatcull
