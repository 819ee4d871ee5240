#include "splatcull/mlp.hpp"

#include <cmath>
#include <string>

namespace splatcull {

template <typename Scalar>
MlpT<Scalar>::MlpT(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output width");
  for (int w : widths_) {
    if (w < 1) throw std::invalid_argument("MLP widths must be >= 1");
  }
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.push_back({Matrix::Zero(widths_[i + 1], widths_[i]), VectorX<Scalar>::Zero(widths_[i + 1])});
  }
}

template <typename Scalar>
MlpT<Scalar> MlpT<Scalar>::he_uniform(std::vector<int> widths, std::uint64_t seed) {
  MlpT net(std::move(widths));
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Row-major fill order keeps initial weights independent of storage order.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = static_cast<Scalar>(dist(rng));
  }
  return net;
}

template <typename Scalar>
std::size_t MlpT<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <typename Scalar>
void MlpT<Scalar>::set_zero() {
  for (auto& l : layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

template <typename Scalar>
typename MlpT<Scalar>::Matrix MlpT<Scalar>::forward(const Matrix& input) const {
  Cache cache;
  return forward(input, cache);
}

template <typename Scalar>
typename MlpT<Scalar>::Matrix MlpT<Scalar>::forward(const Matrix& input, Cache& cache) const {
  if (input.rows() != input_width()) {
    throw std::invalid_argument("MLP input width mismatch: expected " + std::to_string(input_width()) + ", got " +
                                std::to_string(input.rows()));
  }
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0] = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].weight * cache.activations[i];
    z.colwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
    cache.activations[i + 1] = std::move(z);
  }
  return cache.activations.back();
}

template <typename Scalar>
typename MlpT<Scalar>::Matrix MlpT<Scalar>::backward(const Cache& cache, const Matrix& grad_output,
                                                     MlpT& grads) const {
  Matrix delta = grad_output;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    if (li + 1 < layers_.size()) {
      delta = delta.cwiseProduct((cache.activations[li + 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
    const Matrix& input = cache.activations[li];
    grads.layers_[li].weight.noalias() += delta * input.transpose();
    grads.layers_[li].bias += delta.rowwise().sum();
    delta = layers_[li].weight.transpose() * delta;
  }
  return delta;
}

template <typename Scalar>
Scalar weighted_bce(const MatrixX<Scalar>& logits, std::span<const Scalar> labels, Scalar pos_weight,
                    MatrixX<Scalar>* grad) {
  const auto n = static_cast<std::size_t>(logits.size());
  if (labels.size() != n) throw std::invalid_argument("weighted_bce: label count mismatch");
  if (grad) grad->resize(logits.rows(), logits.cols());
  Scalar total = 0;
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar z = logits.data()[i];
    const Scalar y = labels[i];
    // softplus(z) = max(z, 0) + log1p(exp(-|z|)); softplus(-z) = softplus(z) - z
    const Scalar sp_pos = std::max(z, Scalar(0)) + std::log1p(std::exp(-std::abs(z)));
    const Scalar sp_neg = sp_pos - z;
    total += pos_weight * y * sp_neg + (Scalar(1) - y) * sp_pos;
    if (grad) {
      const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-z));
      grad->data()[i] = (pos_weight * y * (s - Scalar(1)) + (Scalar(1) - y) * s) * inv_n;
    }
  }
  return total * inv_n;
}

template <typename Scalar>
Adam<Scalar>::Adam(const MlpT<Scalar>& like, AdamConfig cfg) : cfg_(cfg), m_(like.widths()), v_(like.widths()) {}

template <typename Scalar>
void Adam<Scalar>::step(MlpT<Scalar>& params, MlpT<Scalar>& grads, double lr) {
  ++t_;
  const Scalar b1 = static_cast<Scalar>(cfg_.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg_.beta2);
  const Scalar eps = static_cast<Scalar>(cfg_.eps);
  const Scalar corr1 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const Scalar corr2 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  const Scalar step = static_cast<Scalar>(lr);

  auto& pl = params.layers();
  auto& gl = grads.layers();
  auto& ml = m_.layers();
  auto& vl = v_.layers();
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.array() -= step * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < pl.size(); ++i) {
    update(pl[i].weight, gl[i].weight, ml[i].weight, vl[i].weight);
    update(pl[i].bias, gl[i].bias, ml[i].bias, vl[i].bias);
  }
}

template class MlpT<float>;
template class MlpT<double>;
template class Adam<float>;
template class Adam<double>;
template float weighted_bce<float>(const MatrixX<float>&, std::span<const float>, float, MatrixX<float>*);
template double weighted_bce<double>(const MatrixX<double>&, std::span<const double>, double, MatrixX<double>*);

}  // namespace splatcull
