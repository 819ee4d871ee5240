#pragma once

#include "splatcull/dataset.hpp"
#include "splatcull/mlp.hpp"
#include "splatcull/visibility_model.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace splatcull {

struct TrainConfig {
  double lr_init = 2e-3;
  double lr_final = 2e-4;
  double warmup_frac = 0.2;
  int batch_size = 1 << 15;
  int iterations = 5000;
  AdamConfig adam;
  /// Weight on positive (visible) samples in the BCE loss.
  double pos_weight = 2.0;
  std::uint64_t seed = 1;
  std::vector<int> feature_hidden{32, 32};
  std::vector<int> vis_hidden{32, 32};
  float threshold = 0.5f;

  void validate() const;
};

/// Cosine ramp from 0 to lr_init over the first warmup_frac * iterations,
/// then exponential decay reaching lr_final at the last iteration.
double learning_rate(const TrainConfig& cfg, int iteration);

/// Inputs of one training batch; the 16-wide visibility input is the context
/// rows followed by the encoded features.
template <typename Scalar>
struct ModelBatch {
  MatrixX<Scalar> feature_inputs;  // kFeatureInputs x B
  MatrixX<Scalar> context;         // kContextInputs x B
  std::vector<Scalar> labels;      // 0 or 1
};

/// Loss of the stacked feature + visibility network; accumulates gradients
/// into the optional outputs.
template <typename Scalar>
Scalar model_loss(const MlpT<Scalar>& feature_mlp, const MlpT<Scalar>& vis_mlp, const ModelBatch<Scalar>& batch,
                  Scalar pos_weight, MlpT<Scalar>* feature_grads = nullptr, MlpT<Scalar>* vis_grads = nullptr);

/// Writes mean/scale, direction, normalised distance and forward into a context column.
template <typename Derived>
void fill_context(Eigen::MatrixBase<Derived>&& column, const Eigen::Vector3f& scaled_mean,
                  const Eigen::Vector3f& direction, float distance_norm, const Eigen::Vector3f& forward) {
  column.template segment<3>(0) = scaled_mean.cast<typename Derived::Scalar>();
  column.template segment<3>(3) = direction.cast<typename Derived::Scalar>();
  column(6) = static_cast<typename Derived::Scalar>(distance_norm);
  column.template segment<3>(7) = forward.cast<typename Derived::Scalar>();
}

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TrainCallback = std::function<void(int iteration, double lr, double loss)>;

/// Trains the feature encoder and visibility MLP on (view, Gaussian) samples
/// drawn uniformly across the dataset. Single threaded and deterministic.
VisibilityModel train(const VisibilityDataset& data, const Asset& asset, const TrainConfig& cfg,
                      const TrainCallback& callback = {});

/// Max relative error between analytic and central-difference gradients over
/// every weight of both networks. Relative error uses max(|a|, |n|, 1e-6) as
/// the denominator.
double grad_check(const VisibilityModel& model, const ModelBatch<double>& batch, double pos_weight = 2.0,
                  double h = 1e-5);

/// Random batch with plausible input ranges for gradient checks.
ModelBatch<double> random_batch(std::size_t size, std::uint64_t seed);

}  // namespace splatcull
