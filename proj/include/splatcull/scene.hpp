#pragma once

#include "splatcull/asset.hpp"
#include "splatcull/camera.hpp"
#include "splatcull/raster.hpp"
#include "splatcull/visibility_model.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace splatcull {

/// Similarity transform: world = translation + scale * R(rotation) * local.
struct InstanceTransform {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
  double scale = 1.0;

  Eigen::Matrix3d rotation_matrix() const;
  void validate() const;
};

/// Instance-transformed mean. Shared by culling and instantiation so both see
/// bit-identical positions.
Eigen::Vector3f transform_mean(const Eigen::Vector3f& mean, const InstanceTransform& inst);
float transform_max_log_scale(const Gaussian& g, const InstanceTransform& inst);

/// World-space copy of a Gaussian under an instance transform. Higher-order SH
/// coefficients are copied unrotated.
Gaussian instantiate(const Gaussian& g, const InstanceTransform& inst);

struct SceneAsset {
  std::string id;
  Asset asset;
  std::optional<VisibilityModel> model;
  /// kFeatureDim x N, present iff model is present.
  Eigen::MatrixXf features;

  /// Attaches a model and precomputes the per-Gaussian feature vectors.
  void attach_model(VisibilityModel m);
};

struct ComposedScene {
  std::vector<SceneAsset> assets;
  /// instances[a] lists the transforms of assets[a].
  std::vector<std::vector<InstanceTransform>> instances;

  std::size_t add_asset(SceneAsset asset);
  void add_instance(std::size_t asset_index, const InstanceTransform& inst);
  void validate() const;
  std::size_t instance_count() const;
};

/// Every instance of every asset, instantiated in asset then instance order.
std::vector<Gaussian> flatten(const ComposedScene& scene);

struct FrameStats {
  std::int64_t frustum_passed = 0;
  std::int64_t mlp_culled = 0;
  std::int64_t radius_culled = 0;
  std::int64_t instantiated = 0;
  std::int64_t used = 0;
  std::int64_t mem_bytes_instantiated = 0;
  std::int64_t mlp_queries = 0;
  double preprocess_ms = 0.0;
  double mlp_ms = 0.0;
  double render_ms = 0.0;
};

struct ComposedRenderOptions {
  /// Radius clipping, frustum margin, tile size etc. are taken from here.
  RenderOptions raster;
  bool use_models = true;
};

/// Distance in training space: d_r * (f_t / f_r) / s.
double corrected_distance(double render_distance, double focal_train, double focal_render, double scale);

/// 16-wide visibility MLP input for Gaussian `index` of `sa` seen through `inst`.
std::array<float, kVisInputs> local_inputs(std::size_t index, const SceneAsset& sa, const InstanceTransform& inst,
                                           const Camera& cam);

struct InstanceCull {
  std::vector<std::uint32_t> kept;
  std::int64_t frustum_passed = 0;
  std::int64_t mlp_culled = 0;
  std::int64_t radius_culled = 0;
  bool mlp_queried = false;
  double corrected_distance = 0.0;
  double frustum_ms = 0.0;
  double mlp_ms = 0.0;
};

/// Frustum test on means, optional MLP gating (only at corrected distances
/// >= d_near) and optional radius clipping for one instance.
InstanceCull cull_instance(const SceneAsset& sa, const InstanceTransform& inst, const Camera& cam,
                           const ComposedRenderOptions& opts);

std::pair<RenderOutput, FrameStats> render_composed(const ComposedScene& scene, const Camera& cam,
                                                    const ComposedRenderOptions& opts = {});

struct OrbitOptions {
  double elevation = 0.0;  // radians above the xy plane
  double fov = 1.0471975511965976;
  int image_size = 256;
  double phase = 0.0;  // azimuth of the first view
  RenderOptions raster;
};

struct OrbitStats {
  int views = 0;
  double passed_gt = 0.0;
  double used_gt = 0.0;
  double passed_ours = 0.0;
  double used_ours = 0.0;
  double delta_passed_pct = 0.0;
  /// Fraction of ground-truth contributing Gaussians kept by the MLP.
  double recall = 0.0;
  double min_recall = 1.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Averages GT (contribution records) vs MLP-gated counts over a circular
/// camera trajectory around the asset origin.
OrbitStats orbit_eval(const SceneAsset& sa, int n_views, double distance, const OrbitOptions& opts = {});

/// Scene layout JSON: {assets: [{id, ply, vismlp?}], instances: [{asset_id,
/// translation, rotation_quat, scale}], camera?}. Paths are relative to the file.
struct SceneFile {
  ComposedScene scene;
  std::optional<Camera> camera;
};

SceneFile load_scene(const std::filesystem::path& path);

/// Camera JSON: {position, target, up?, fov_deg?, width?, height?, near?, far?}
/// or {position, rotation (3 rows), ...}.
Camera load_camera(const std::filesystem::path& path);

}  // namespace splatcull
