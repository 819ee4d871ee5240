#include "splatcull/scene.hpp"

#include "splatcull/image_metrics.hpp"
#include "splatcull/sampling.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace splatcull {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Eigen::Vector4d quaternion_product(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

}  // namespace

Eigen::Matrix3d InstanceTransform::rotation_matrix() const {
  const Eigen::Vector4d q = rotation.normalized();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

void InstanceTransform::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("instance scale must be > 0");
  if (std::abs(rotation.norm() - 1.0) > 1e-6) throw std::invalid_argument("instance rotation must be a unit quaternion");
  if (!translation.allFinite()) throw std::invalid_argument("instance translation must be finite");
}

Eigen::Vector3f transform_mean(const Eigen::Vector3f& mean, const InstanceTransform& inst) {
  return (inst.translation + inst.scale * (inst.rotation_matrix() * mean.cast<double>())).cast<float>();
}

float transform_max_log_scale(const Gaussian& g, const InstanceTransform& inst) {
  return g.log_scale.maxCoeff() + static_cast<float>(std::log(inst.scale));
}

Gaussian instantiate(const Gaussian& g, const InstanceTransform& inst) {
  Gaussian out = g;
  out.mean = transform_mean(g.mean, inst);
  out.log_scale = g.log_scale.array() + static_cast<float>(std::log(inst.scale));
  out.rotation = quaternion_product(inst.rotation.normalized(), g.rotation.cast<double>()).cast<float>();
  return out;
}

void SceneAsset::attach_model(VisibilityModel m) {
  features = encode_features(m, asset);
  model = std::move(m);
}

std::size_t ComposedScene::add_asset(SceneAsset asset) {
  assets.push_back(std::move(asset));
  instances.emplace_back();
  return assets.size() - 1;
}

void ComposedScene::add_instance(std::size_t asset_index, const InstanceTransform& inst) {
  if (asset_index >= assets.size()) throw std::out_of_range("instance references an unknown asset");
  inst.validate();
  instances[asset_index].push_back(inst);
}

void ComposedScene::validate() const {
  if (instances.size() != assets.size()) throw std::invalid_argument("every asset needs an instance list");
  for (std::size_t a = 0; a < assets.size(); ++a) {
    const auto& sa = assets[a];
    if (!sa.model && sa.features.size() > 0) {
      throw std::invalid_argument("asset '" + sa.id + "': feature cache without a model");
    }
    if (sa.model && sa.features.cols() != static_cast<Eigen::Index>(sa.asset.size())) {
      throw std::invalid_argument("asset '" + sa.id + "': feature cache missing or stale");
    }
    for (const auto& inst : instances[a]) inst.validate();
  }
}

std::size_t ComposedScene::instance_count() const {
  std::size_t n = 0;
  for (const auto& list : instances) n += list.size();
  return n;
}

std::vector<Gaussian> flatten(const ComposedScene& scene) {
  std::vector<Gaussian> out;
  for (std::size_t a = 0; a < scene.assets.size(); ++a)
    for (const auto& inst : scene.instances[a])
      for (const auto& g : scene.assets[a].asset.gaussians) out.push_back(instantiate(g, inst));
  return out;
}

double corrected_distance(double render_distance, double focal_train, double focal_render, double scale) {
  return render_distance * (focal_train / focal_render) / scale;
}

namespace {

/// Per-instance part of the MLP input: everything except the Gaussian's own mean and feature.
struct InstanceContext {
  Eigen::Vector3f direction;
  Eigen::Vector3f forward;
  double distance = 0.0;  // corrected, training space
  float distance_norm = 0.0f;
};

InstanceContext instance_context(const VisibilityModel& model, const InstanceTransform& inst, const Camera& cam) {
  const Eigen::Matrix3d to_local = inst.rotation_matrix().transpose();
  const Eigen::Vector3d rel = cam.position - inst.translation;
  const double render_distance = rel.norm();
  InstanceContext ctx;
  ctx.direction = (to_local * rel).normalized().cast<float>();
  ctx.forward = (to_local * cam.forward()).normalized().cast<float>();
  ctx.distance = corrected_distance(render_distance, model.norm.focal_train, cam.focal_normalized(), inst.scale);
  ctx.distance_norm = static_cast<float>(normalized_distance(ctx.distance, model.norm.d_near, model.norm.d_far));
  return ctx;
}

template <typename Column>
void write_inputs(Column&& col, std::size_t index, const SceneAsset& sa, const InstanceContext& ctx, float inv_scale) {
  col.template segment<3>(0) = sa.asset.gaussians[index].mean * inv_scale;
  col.template segment<3>(3) = ctx.direction;
  col(6) = ctx.distance_norm;
  col.template segment<3>(7) = ctx.forward;
  col.template segment<kFeatureDim>(kContextInputs) = sa.features.col(static_cast<Eigen::Index>(index));
}

}  // namespace

std::array<float, kVisInputs> local_inputs(std::size_t index, const SceneAsset& sa, const InstanceTransform& inst,
                                           const Camera& cam) {
  if (!sa.model || sa.features.cols() != static_cast<Eigen::Index>(sa.asset.size())) {
    throw std::invalid_argument("local_inputs: asset '" + sa.id + "' has no feature cache");
  }
  const InstanceContext ctx = instance_context(*sa.model, inst, cam);
  std::array<float, kVisInputs> out{};
  write_inputs(Eigen::Map<Eigen::Matrix<float, kVisInputs, 1>>(out.data()), index, sa, ctx,
               static_cast<float>(1.0 / sa.model->norm.mean_scale));
  return out;
}

InstanceCull cull_instance(const SceneAsset& sa, const InstanceTransform& inst, const Camera& cam,
                           const ComposedRenderOptions& opts) {
  InstanceCull result;
  const auto& gaussians = sa.asset.gaussians;

  auto start = Clock::now();
  std::vector<std::uint32_t> passed;
  passed.reserve(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const Gaussian& g = gaussians[i];
    const float margin = frustum_margin(transform_max_log_scale(g, inst), opts.raster.frustum_margin);
    if (in_frustum(transform_mean(g.mean, inst), margin, cam)) passed.push_back(static_cast<std::uint32_t>(i));
  }
  result.frustum_passed = static_cast<std::int64_t>(passed.size());
  result.frustum_ms = elapsed_ms(start);

  if (opts.use_models && sa.model && !passed.empty()) {
    const InstanceContext ctx = instance_context(*sa.model, inst, cam);
    result.corrected_distance = ctx.distance;
    if (ctx.distance >= sa.model->norm.d_near) {
      start = Clock::now();
      result.mlp_queried = true;
      const float inv_scale = static_cast<float>(1.0 / sa.model->norm.mean_scale);
      Eigen::MatrixXf inputs(kVisInputs, static_cast<Eigen::Index>(passed.size()));
      for (std::size_t k = 0; k < passed.size(); ++k) {
        write_inputs(inputs.col(static_cast<Eigen::Index>(k)), passed[k], sa, ctx, inv_scale);
      }
      const Eigen::MatrixXf logits = predict_logits(*sa.model, inputs, opts.raster.threads);
      const float cut = threshold_logit(sa.model->threshold);
      std::vector<std::uint32_t> survivors;
      survivors.reserve(passed.size());
      for (std::size_t k = 0; k < passed.size(); ++k) {
        if (logits(0, static_cast<Eigen::Index>(k)) >= cut) survivors.push_back(passed[k]);
      }
      result.mlp_culled = static_cast<std::int64_t>(passed.size() - survivors.size());
      passed = std::move(survivors);
      result.mlp_ms = elapsed_ms(start);
    }
  }

  if (opts.raster.radius_clip && *opts.raster.radius_clip > 0.0f) {
    std::vector<std::uint32_t> survivors;
    survivors.reserve(passed.size());
    for (const auto idx : passed) {
      const auto proj = project_gaussian(instantiate(gaussians[idx], inst), cam);
      if (proj && proj->cov2d_raw.determinant() < *opts.raster.radius_clip) continue;
      survivors.push_back(idx);
    }
    result.radius_culled = static_cast<std::int64_t>(passed.size() - survivors.size());
    passed = std::move(survivors);
  }
  result.kept = std::move(passed);
  return result;
}

std::pair<RenderOutput, FrameStats> render_composed(const ComposedScene& scene, const Camera& cam,
                                                    const ComposedRenderOptions& opts) {
  FrameStats stats;
  std::vector<Gaussian> frame;
  for (std::size_t a = 0; a < scene.assets.size(); ++a) {
    const SceneAsset& sa = scene.assets[a];
    for (const auto& inst : scene.instances[a]) {
      const InstanceCull cull = cull_instance(sa, inst, cam, opts);
      const auto start = Clock::now();
      stats.frustum_passed += cull.frustum_passed;
      stats.mlp_culled += cull.mlp_culled;
      stats.radius_culled += cull.radius_culled;
      stats.mlp_queries += cull.mlp_queried ? cull.frustum_passed : 0;
      stats.mem_bytes_instantiated +=
          static_cast<std::int64_t>(cull.kept.size()) * gaussian_payload_bytes(sa.asset.sh_degree);
      for (const auto idx : cull.kept) frame.push_back(instantiate(sa.asset.gaussians[idx], inst));
      stats.preprocess_ms += cull.frustum_ms + elapsed_ms(start);
      stats.mlp_ms += cull.mlp_ms;
    }
  }
  stats.instantiated = static_cast<std::int64_t>(frame.size());

  const auto start = Clock::now();
  RenderOutput out = render(frame, cam, opts.raster);
  stats.render_ms = elapsed_ms(start);
  stats.used = out.used_count;
  return {std::move(out), stats};
}

OrbitStats orbit_eval(const SceneAsset& sa, int n_views, double distance, const OrbitOptions& opts) {
  if (!sa.model) throw std::invalid_argument("orbit_eval needs a trained model");
  if (n_views < 1) throw std::invalid_argument("orbit_eval needs at least one view");

  OrbitStats stats;
  stats.views = n_views;
  RenderOptions gt_opts = opts.raster;
  gt_opts.record_contributions = true;
  ComposedRenderOptions ours_opts;
  ours_opts.raster = opts.raster;
  ours_opts.raster.radius_clip.reset();
  const InstanceTransform identity;

  for (int v = 0; v < n_views; ++v) {
    const double azimuth = opts.phase + 2.0 * std::numbers::pi * v / n_views;
    const Eigen::Vector3d dir(std::cos(opts.elevation) * std::cos(azimuth),
                              std::cos(opts.elevation) * std::sin(azimuth), std::sin(opts.elevation));
    const Camera cam = make_sample_camera(distance * dir, Eigen::Vector3d::Zero(), opts.fov, opts.image_size,
                                          distance, sa.asset.bound_radius);

    const RenderOutput gt = render(sa.asset.gaussians, cam, gt_opts);
    const InstanceCull cull = cull_instance(sa, identity, cam, ours_opts);
    std::vector<Gaussian> kept;
    kept.reserve(cull.kept.size());
    for (const auto idx : cull.kept) kept.push_back(sa.asset.gaussians[idx]);
    const RenderOutput ours = render(kept, cam, opts.raster);

    std::vector<std::uint8_t> keep_mask(sa.asset.size(), 0);
    for (const auto idx : cull.kept) keep_mask[idx] = 1;
    std::int64_t used = 0, recalled = 0;
    for (std::size_t i = 0; i < sa.asset.size(); ++i) {
      if (gt.contribution_max[i] > 0.0f) {
        ++used;
        recalled += keep_mask[i];
      }
    }
    const double recall = used > 0 ? static_cast<double>(recalled) / static_cast<double>(used) : 1.0;
    const ImageView a{gt.image, gt.width, gt.height, 3};
    const ImageView b{ours.image, ours.width, ours.height, 3};
    const QualityPair q = compute_metrics_pair(b, a);

    stats.passed_gt += static_cast<double>(gt.passed_count);
    stats.used_gt += static_cast<double>(gt.used_count);
    stats.passed_ours += static_cast<double>(cull.kept.size());
    stats.used_ours += static_cast<double>(ours.used_count);
    stats.recall += recall;
    stats.min_recall = std::min(stats.min_recall, recall);
    stats.psnr += q.psnr;
    stats.ssim += q.ssim;
  }
  const double n = n_views;
  stats.passed_gt /= n;
  stats.used_gt /= n;
  stats.passed_ours /= n;
  stats.used_ours /= n;
  stats.recall /= n;
  stats.psnr /= n;
  stats.ssim /= n;
  stats.delta_passed_pct = stats.passed_gt > 0.0 ? 100.0 * (stats.passed_ours - stats.passed_gt) / stats.passed_gt : 0.0;
  return stats;
}

}  // namespace splatcull
