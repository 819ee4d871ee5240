#include "splatcull/sampling.hpp"

#include <Eigen/Geometry>

#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

namespace splatcull {

void SamplingConfig::validate() const {
  if (n_directions < 1) throw std::invalid_argument("n_directions must be >= 1");
  if (n_distances < 1) throw std::invalid_argument("n_distances must be >= 1");
  if (n_aux_views < 0) throw std::invalid_argument("n_aux_views must be >= 0");
  if (!(aux_cone_half_angle > 0.0 && aux_cone_half_angle < std::numbers::pi / 4.0)) {
    throw std::invalid_argument("aux_cone_half_angle must lie in (0, pi/4)");
  }
  if (!(fov > 0.0 && fov < std::numbers::pi)) throw std::invalid_argument("fov must lie in (0, pi)");
  if (image_size < 1) throw std::invalid_argument("image_size must be >= 1");
  if (offset_scale_ratio && !(*offset_scale_ratio >= 0.0)) {
    throw std::invalid_argument("offset_scale_ratio must be >= 0");
  }
}

std::vector<Eigen::Vector3d> fibonacci_directions(int n) {
  if (n < 1) throw std::invalid_argument("fibonacci_directions: n must be >= 1");
  const double golden_angle = 2.0 * std::numbers::pi * (1.0 - 1.0 / std::numbers::phi);
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

std::vector<Eigen::Vector3d> longlat_directions(int n) {
  if (n < 1) throw std::invalid_argument("longlat_directions: n must be >= 1");
  const int rows = std::max(1, static_cast<int>(std::lround(std::sqrt(n / 2.0))));
  const int cols = (n + rows - 1) / rows;
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int row = i / cols;
    const int col = i % cols;
    const double theta = std::numbers::pi * (row + 0.5) / rows;
    const double phi = 2.0 * std::numbers::pi * col / cols;
    dirs.emplace_back(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
  }
  return dirs;
}

double default_offset_ratio(const Asset& asset) {
  const Eigen::Vector3d extent = asset.bbox_max - asset.bbox_min;
  const double largest = extent.maxCoeff();
  return largest > 0.0 ? extent.minCoeff() / largest : 0.0;
}

double offset_magnitude(const Asset& asset, double ratio, double distance) {
  if (!(asset.d_far > asset.d_near)) return 0.0;
  const double t = std::clamp((distance - asset.d_near) / (asset.d_far - asset.d_near), 0.0, 1.0);
  return t * asset.bound_radius * ratio;
}

bool frustum_contains_bbox(const Camera& cam, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  for (int corner = 0; corner < 8; ++corner) {
    const Eigen::Vector3d p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                            (corner & 4) ? hi.z() : lo.z());
    if (!in_frustum(p.cast<float>(), 0.0f, cam)) return false;
  }
  return true;
}

namespace {

bool frustum_contains_means(const Camera& cam, const Asset& asset) {
  for (const auto& g : asset.gaussians) {
    if (!in_frustum(g.mean, 0.0f, cam)) return false;
  }
  return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Eigen::Vector3d up_hint_for(const Eigen::Vector3d& dir) {
  return std::abs(dir.z()) < 0.99 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
}

}  // namespace

Camera make_sample_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target, double fov,
                          int image_size, double distance, double bound_radius) {
  const double near_clip = std::max(1e-4, 0.01 * distance);
  const double far_clip = distance + 10.0 * std::max(bound_radius, 1e-3);
  return Camera::look_at(position, target, up_hint_for((position - target).normalized()), fov, image_size,
                         image_size, near_clip, far_clip);
}

std::vector<TrainView> build_views(const Asset& asset, const SamplingConfig& cfg) {
  cfg.validate();
  if (!asset.has_distances()) throw std::invalid_argument("build_views: asset has no sampling distances");
  const auto dirs = cfg.sampler_kind == SamplerKind::fibonacci ? fibonacci_directions(cfg.n_directions)
                                                               : longlat_directions(cfg.n_directions);
  const double ratio = cfg.offset_scale_ratio.value_or(default_offset_ratio(asset));

  std::vector<TrainView> views;
  views.reserve(dirs.size() * static_cast<std::size_t>(cfg.n_distances));
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Eigen::Vector3d& dir = dirs[i];
    const Eigen::Vector3d u = any_perpendicular(dir);
    const Eigen::Vector3d v = dir.cross(u).normalized();
    for (int j = 0; j < cfg.n_distances; ++j) {
      const double t = cfg.n_distances > 1 ? static_cast<double>(j) / (cfg.n_distances - 1) : 0.0;
      const double distance = asset.d_near + t * (asset.d_far - asset.d_near);

      std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(i * 1315423911ull + static_cast<std::uint64_t>(j))));
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      const double theta = angle(rng);

      TrainView view;
      view.direction_unit = dir;
      view.distance = distance;
      const Eigen::Vector3d position = distance * dir;
      double magnitude = cfg.offset_enabled ? offset_magnitude(asset, ratio, distance) : 0.0;
      for (int attempt = 0;; ++attempt) {
        view.target_offset = magnitude * (std::cos(theta) * u + std::sin(theta) * v);
        view.camera = make_sample_camera(position, view.target_offset, cfg.fov, cfg.image_size, distance,
                                         asset.bound_radius);
        if (magnitude == 0.0 || frustum_contains_means(view.camera, asset)) break;
        magnitude = attempt < 16 ? 0.5 * magnitude : 0.0;
      }

      view.aux_cameras.reserve(static_cast<std::size_t>(cfg.n_aux_views));
      for (int k = 0; k < cfg.n_aux_views; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / cfg.n_aux_views;
        const Eigen::Vector3d aux_dir =
            (std::cos(cfg.aux_cone_half_angle) * dir +
             std::sin(cfg.aux_cone_half_angle) * (std::cos(phi) * u + std::sin(phi) * v))
                .normalized();
        view.aux_cameras.push_back(make_sample_camera(distance * aux_dir, view.target_offset, cfg.fov,
                                                      cfg.image_size, distance, asset.bound_radius));
      }
      views.push_back(std::move(view));
    }
  }
  return views;
}

std::size_t BitVector::count() const {
  std::size_t total = 0;
  for (const auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

BitVector& BitVector::operator|=(const BitVector& other) {
  if (other.size_ != size_) throw std::invalid_argument("BitVector size mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

BitVector contribution_mask(const RenderOutput& out) {
  BitVector mask(out.contribution_max.size());
  for (std::size_t i = 0; i < out.contribution_max.size(); ++i) {
    if (out.contribution_max[i] > 0.0f) mask.set(i);
  }
  return mask;
}

BitVector visible_labels(const Asset& asset, const TrainView& view, const SamplingConfig& cfg, int threads) {
  RenderOptions opts;
  opts.record_contributions = true;
  opts.sh_degree_eval = cfg.sh_degree_eval;
  opts.min_transmittance = cfg.min_transmittance;
  opts.threads = threads;
  BitVector labels = contribution_mask(render(asset.gaussians, view.camera, opts));
  for (const auto& aux : view.aux_cameras) labels |= contribution_mask(render(asset.gaussians, aux, opts));
  return labels;
}

}  // namespace splatcull
