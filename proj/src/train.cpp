#include "splatcull/train.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace splatcull {

void TrainConfig::validate() const {
  if (!(lr_final > 0.0 && lr_final <= lr_init)) throw std::invalid_argument("need 0 < lr_final <= lr_init");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw std::invalid_argument("warmup_frac must lie in (0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (iterations < 2) throw std::invalid_argument("iterations must be >= 2");
  if (!(pos_weight > 0.0)) throw std::invalid_argument("pos_weight must be > 0");
  if (!(threshold > 0.0f && threshold < 1.0f)) throw std::invalid_argument("threshold must lie in (0, 1)");
}

double learning_rate(const TrainConfig& cfg, int iteration) {
  const double warmup = cfg.warmup_frac * cfg.iterations;
  const double t = iteration;
  if (t < warmup) return cfg.lr_init * 0.5 * (1.0 - std::cos(std::numbers::pi * t / warmup));
  const double span = (cfg.iterations - 1) - warmup;
  const double progress = span > 0.0 ? std::min(1.0, (t - warmup) / span) : 1.0;
  return cfg.lr_init * std::pow(cfg.lr_final / cfg.lr_init, progress);
}

template <typename Scalar>
Scalar model_loss(const MlpT<Scalar>& feature_mlp, const MlpT<Scalar>& vis_mlp, const ModelBatch<Scalar>& batch,
                  Scalar pos_weight, MlpT<Scalar>* feature_grads, MlpT<Scalar>* vis_grads) {
  typename MlpT<Scalar>::Cache feature_cache, vis_cache;
  const MatrixX<Scalar> features = feature_mlp.forward(batch.feature_inputs, feature_cache);
  MatrixX<Scalar> input(batch.context.rows() + features.rows(), batch.context.cols());
  input.topRows(batch.context.rows()) = batch.context;
  input.bottomRows(features.rows()) = features;
  const MatrixX<Scalar> logits = vis_mlp.forward(input, vis_cache);

  const bool want_grads = feature_grads && vis_grads;
  MatrixX<Scalar> dlogits;
  const Scalar loss = weighted_bce<Scalar>(logits, batch.labels, pos_weight, want_grads ? &dlogits : nullptr);
  if (want_grads) {
    const MatrixX<Scalar> dinput = vis_mlp.backward(vis_cache, dlogits, *vis_grads);
    feature_mlp.backward(feature_cache, dinput.bottomRows(features.rows()), *feature_grads);
  }
  return loss;
}

template float model_loss<float>(const Mlp&, const Mlp&, const ModelBatch<float>&, float, Mlp*, Mlp*);
template double model_loss<double>(const MlpT<double>&, const MlpT<double>&, const ModelBatch<double>&, double,
                                   MlpT<double>*, MlpT<double>*);

VisibilityModel train(const VisibilityDataset& data, const Asset& asset, const TrainConfig& cfg,
                      const TrainCallback& callback) {
  cfg.validate();
  if (data.views.empty() || data.n_gaussians == 0) throw std::invalid_argument("training dataset is empty");
  if (data.asset_hash != asset_hash(asset) || data.n_gaussians != asset.size()) {
    throw std::invalid_argument("visibility dataset was extracted from a different asset");
  }

  VisibilityModel model = make_visibility_model(cfg.feature_hidden, cfg.vis_hidden, cfg.seed);
  model.norm = {data.bound_radius, data.d_near, data.d_far, data.focal_normalized};
  model.threshold = cfg.threshold;
  model.asset_hash = data.asset_hash;

  const Eigen::MatrixXf params = feature_inputs(asset, model.norm.mean_scale);
  const float inv_scale = static_cast<float>(1.0 / model.norm.mean_scale);
  struct ViewInputs {
    Eigen::Vector3f direction, forward;
    float distance;
  };
  std::vector<ViewInputs> view_inputs;
  view_inputs.reserve(data.views.size());
  for (const auto& v : data.views) {
    view_inputs.push_back({v.direction.normalized().cast<float>(), v.forward.normalized().cast<float>(),
                           static_cast<float>(normalized_distance(v.distance, data.d_near, data.d_far))});
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_view(0, data.views.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_gaussian(0, data.n_gaussians - 1);

  const auto batch_size = static_cast<Eigen::Index>(cfg.batch_size);
  ModelBatch<float> batch;
  batch.feature_inputs.resize(kFeatureInputs, batch_size);
  batch.context.resize(kContextInputs, batch_size);
  batch.labels.resize(static_cast<std::size_t>(batch_size));

  Mlp feature_grads(model.feature_mlp.widths());
  Mlp vis_grads(model.vis_mlp.widths());
  Adam<float> feature_opt(model.feature_mlp, cfg.adam);
  Adam<float> vis_opt(model.vis_mlp, cfg.adam);

  float loss = 0.0f;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (Eigen::Index b = 0; b < batch_size; ++b) {
      const std::size_t v = pick_view(rng);
      const std::size_t g = pick_gaussian(rng);
      const ViewInputs& vi = view_inputs[v];
      batch.feature_inputs.col(b) = params.col(static_cast<Eigen::Index>(g));
      fill_context(batch.context.col(b), asset.gaussians[g].mean * inv_scale, vi.direction, vi.distance,
                   vi.forward);
      batch.labels[static_cast<std::size_t>(b)] = data.labels[v].test(g) ? 1.0f : 0.0f;
    }
    feature_grads.set_zero();
    vis_grads.set_zero();
    loss = model_loss<float>(model.feature_mlp, model.vis_mlp, batch, static_cast<float>(cfg.pos_weight),
                             &feature_grads, &vis_grads);
    const double lr = learning_rate(cfg, it);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite training loss at iteration " << it << " (lr " << lr << ")";
      throw TrainingError(msg.str());
    }
    feature_opt.step(model.feature_mlp, feature_grads, lr);
    vis_opt.step(model.vis_mlp, vis_grads, lr);
    if (callback) callback(it, lr, loss);
  }
  model.final_loss = loss;
  return model;
}

double grad_check(const VisibilityModel& model, const ModelBatch<double>& batch, double pos_weight, double h) {
  MlpT<double> feature = model.feature_mlp.cast<double>();
  MlpT<double> vis = model.vis_mlp.cast<double>();
  MlpT<double> feature_grads(feature.widths());
  MlpT<double> vis_grads(vis.widths());
  model_loss<double>(feature, vis, batch, pos_weight, &feature_grads, &vis_grads);

  double worst = 0.0;
  auto check_net = [&](MlpT<double>& net, MlpT<double>& grads) {
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double plus = model_loss<double>(feature, vis, batch, pos_weight);
        param = saved - h;
        const double minus = model_loss<double>(feature, vis, batch, pos_weight);
        param = saved;
        const double numeric = (plus - minus) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
      };
      auto& layer = net.layers()[li];
      const auto& glayer = grads.layers()[li];
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) probe(layer.weight.data()[i], glayer.weight.data()[i]);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias.data()[i], glayer.bias.data()[i]);
    }
  };
  check_net(feature, feature_grads);
  check_net(vis, vis_grads);
  return worst;
}

ModelBatch<double> random_batch(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const auto b = static_cast<Eigen::Index>(size);
  ModelBatch<double> batch;
  batch.feature_inputs.resize(kFeatureInputs, b);
  batch.context.resize(kContextInputs, b);
  batch.labels.resize(size);
  for (Eigen::Index c = 0; c < b; ++c) {
    for (int r = 0; r < kFeatureInputs; ++r) batch.feature_inputs(r, c) = unit(rng);
    for (int r = 0; r < kContextInputs; ++r) batch.context(r, c) = unit(rng);
    batch.labels[static_cast<std::size_t>(c)] = coin(rng) ? 1.0 : 0.0;
  }
  return batch;
}

}  // namespace splatcull
