#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace splatcull {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
};

/// Fully connected network: ReLU on hidden layers, identity on the output.
/// Batches are column-major: inputs are (input width x batch).
template <typename Scalar>
class MlpT {
 public:
  using Matrix = MatrixX<Scalar>;

  MlpT() = default;
  /// Zero-initialised network; widths lists input..output.
  explicit MlpT(std::vector<int> widths);

  /// He-style uniform initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static MlpT he_uniform(std::vector<int> widths, std::uint64_t seed);

  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  /// Post-activation outputs of every layer; activations[0] is the input.
  struct Cache {
    std::vector<Matrix> activations;
  };

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Cache& cache) const;

  /// Accumulates parameter gradients into `grads` and returns dLoss/dInput.
  Matrix backward(const Cache& cache, const Matrix& grad_output, MlpT& grads) const;

  void set_zero();

  /// Visits every parameter as a flat span (weights then bias, per layer).
  template <typename Fn>
  void for_each_block(Fn&& fn) {
    for (auto& l : layers_) {
      fn(std::span<Scalar>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
      fn(std::span<Scalar>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
    }
  }

  template <typename Other>
  MlpT<Other> cast() const {
    MlpT<Other> out(widths_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.layers()[i].weight = layers_[i].weight.template cast<Other>();
      out.layers()[i].bias = layers_[i].bias.template cast<Other>();
    }
    return out;
  }

 private:
  std::vector<int> widths_;
  std::vector<DenseLayer<Scalar>> layers_;
};

using Mlp = MlpT<float>;

/// Weighted binary cross-entropy on logits (positive targets scaled by
/// pos_weight), averaged over the batch. When `grad` is non-null it receives
/// dLoss/dLogits with the same shape as `logits`.
template <typename Scalar>
Scalar weighted_bce(const MatrixX<Scalar>& logits, std::span<const Scalar> labels, Scalar pos_weight,
                    MatrixX<Scalar>* grad);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments for one network.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(const MlpT<Scalar>& like, AdamConfig cfg = {});

  void step(MlpT<Scalar>& params, MlpT<Scalar>& grads, double lr);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  MlpT<Scalar> m_;
  MlpT<Scalar> v_;
  std::int64_t t_ = 0;
};

}  // namespace splatcull
