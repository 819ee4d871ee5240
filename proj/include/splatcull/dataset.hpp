#pragma once

#include "splatcull/asset.hpp"
#include "splatcull/sampling.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace splatcull {

/// Pose data kept per sampled view; enough to rebuild the MLP inputs.
struct ViewRecord {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();
  double distance = 0.0;
  Eigen::Vector3d forward = Eigen::Vector3d::Zero();

  bool operator==(const ViewRecord&) const = default;
};

struct VisibilityDataset {
  std::uint64_t asset_hash = 0;
  SamplingConfig config;
  std::uint64_t n_gaussians = 0;
  double bound_radius = 0.0;
  double d_near = 0.0;
  double d_far = 0.0;
  /// Training camera focal length in image-height units.
  double focal_normalized = 0.0;
  std::vector<ViewRecord> views;
  /// One bit vector over Gaussians per view.
  std::vector<BitVector> labels;

  std::size_t positive_count() const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Renders every view (main + auxiliary cameras) and records visibility bits.
/// Views are rendered in parallel; the result does not depend on `threads`.
VisibilityDataset extract_dataset(const Asset& asset, const SamplingConfig& cfg, int threads = 0,
                                  const ProgressFn& progress = {});

void save_dataset(const VisibilityDataset& data, const std::filesystem::path& path);
VisibilityDataset load_dataset(const std::filesystem::path& path);

}  // namespace splatcull
