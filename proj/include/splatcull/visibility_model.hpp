#pragma once

#include "splatcull/asset.hpp"
#include "splatcull/mlp.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>

namespace splatcull {

/// Per-Gaussian parameters fed to the feature encoder: mean (3) and scales (3)
/// divided by the bounding radius, unit quaternion (4), opacity (1), DC colour (3).
constexpr int kFeatureInputs = 14;
constexpr int kFeatureDim = 6;
/// mean (3) + direction (3) + distance (1) + forward (3) + feature (6).
constexpr int kContextInputs = 10;
constexpr int kVisInputs = kContextInputs + kFeatureDim;
static_assert(kVisInputs == 16);

struct NormalizationConstants {
  /// Means and scales are divided by this (the asset's bounding radius).
  double mean_scale = 1.0;
  double d_near = 0.0;
  double d_far = 1.0;
  /// Focal length of the training cameras in image-height units.
  double focal_train = 1.0;
};

struct VisibilityModel {
  Mlp feature_mlp;
  Mlp vis_mlp;
  NormalizationConstants norm;
  /// Gaussians with sigmoid(logit) below this are culled.
  float threshold = 0.5f;
  std::uint64_t asset_hash = 0;
  float final_loss = 0.0f;

  /// Byte size of the checkpoint written by save_model.
  std::size_t serialized_size() const;
};

/// Architecture with the given hidden widths and He-uniform weights.
VisibilityModel make_visibility_model(const std::vector<int>& feature_hidden, const std::vector<int>& vis_hidden,
                                      std::uint64_t seed);

/// Min-max normalisation of a distance into [-1, 1] (clamped).
double normalized_distance(double distance, double d_near, double d_far);

/// 14 x N matrix of normalised Gaussian parameters.
Eigen::MatrixXf feature_inputs(const Asset& asset, double mean_scale);

/// One pass of the feature encoder over every Gaussian: 6 x N.
/// Throws if the model was trained on a different asset.
Eigen::MatrixXf encode_features(const VisibilityModel& model, const Asset& asset);

/// Visibility logits for a 16 x B input batch. Rows are processed in fixed
/// chunks, so results do not depend on `threads`.
Eigen::MatrixXf predict_logits(const VisibilityModel& model, const Eigen::MatrixXf& inputs, int threads = 1);

/// Logit at which sigmoid equals `threshold`.
float threshold_logit(float threshold);

void save_model(const VisibilityModel& model, const std::filesystem::path& path);
VisibilityModel load_model(const std::filesystem::path& path);

}  // namespace splatcull
