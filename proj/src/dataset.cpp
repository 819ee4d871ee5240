#include "splatcull/dataset.hpp"

#include "binary_io.hpp"
#include "splatcull/parallel.hpp"

#include <atomic>
#include <mutex>

namespace splatcull {
namespace {

constexpr char kMagic[5] = "SCVD";
constexpr std::uint32_t kVersion = 1;

void put_vec3(detail::BinaryWriter& w, const Eigen::Vector3d& v) {
  for (int i = 0; i < 3; ++i) w.put(v[i]);
}

Eigen::Vector3d get_vec3(detail::BinaryReader& r) {
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v[i] = r.get<double>();
  return v;
}

}  // namespace

std::size_t VisibilityDataset::positive_count() const {
  std::size_t total = 0;
  for (const auto& l : labels) total += l.count();
  return total;
}

VisibilityDataset extract_dataset(const Asset& asset, const SamplingConfig& cfg, int threads,
                                  const ProgressFn& progress) {
  const auto views = build_views(asset, cfg);

  VisibilityDataset data;
  data.asset_hash = asset_hash(asset);
  data.config = cfg;
  data.n_gaussians = asset.size();
  data.bound_radius = asset.bound_radius;
  data.d_near = asset.d_near;
  data.d_far = asset.d_far;
  data.focal_normalized = views.empty() ? 0.0 : views.front().camera.focal_normalized();
  data.views.reserve(views.size());
  for (const auto& v : views) {
    data.views.push_back({v.camera.position, v.direction_unit, v.distance, v.camera.forward()});
  }
  data.labels.resize(views.size());

  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  // Each view renders single threaded; views are distributed across workers.
  parallel_for(views.size(), threads, [&](std::size_t i) {
    data.labels[i] = visible_labels(asset, views[i], cfg, 1);
    const std::size_t finished = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(finished, views.size());
    }
  });
  return data;
}

void save_dataset(const VisibilityDataset& data, const std::filesystem::path& path) {
  detail::BinaryWriter w;
  w.bytes(kMagic, 4);
  w.put(kVersion);
  w.put(data.asset_hash);
  w.put(data.n_gaussians);
  const auto& c = data.config;
  w.put<std::int32_t>(c.n_directions);
  w.put<std::int32_t>(c.n_distances);
  w.put<std::int32_t>(c.image_size);
  w.put<std::int32_t>(c.n_aux_views);
  w.put(c.fov);
  w.put(c.aux_cone_half_angle);
  w.put<std::uint8_t>(c.offset_enabled ? 1 : 0);
  w.put<std::uint8_t>(c.offset_scale_ratio ? 1 : 0);
  w.put(c.offset_scale_ratio.value_or(0.0));
  w.put(static_cast<std::uint8_t>(c.sampler_kind));
  w.put(c.seed);
  w.put<std::int32_t>(c.sh_degree_eval);
  w.put(c.min_transmittance);
  w.put(data.bound_radius);
  w.put(data.d_near);
  w.put(data.d_far);
  w.put(data.focal_normalized);
  w.put<std::uint64_t>(data.views.size());
  for (const auto& v : data.views) {
    put_vec3(w, v.position);
    put_vec3(w, v.direction);
    w.put(v.distance);
    put_vec3(w, v.forward);
  }
  for (const auto& l : data.labels) {
    if (l.size() != data.n_gaussians) throw std::runtime_error("label vector size mismatch");
    w.bytes(l.words().data(), l.words().size() * sizeof(std::uint64_t));
  }
  w.save(path);
}

VisibilityDataset load_dataset(const std::filesystem::path& path) {
  auto r = detail::BinaryReader::from_file(path, "visibility dataset");
  r.expect_magic(kMagic);
  if (r.get<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported visibility dataset version");
  VisibilityDataset data;
  data.asset_hash = r.get<std::uint64_t>();
  data.n_gaussians = r.get<std::uint64_t>();
  auto& c = data.config;
  c.n_directions = r.get<std::int32_t>();
  c.n_distances = r.get<std::int32_t>();
  c.image_size = r.get<std::int32_t>();
  c.n_aux_views = r.get<std::int32_t>();
  c.fov = r.get<double>();
  c.aux_cone_half_angle = r.get<double>();
  c.offset_enabled = r.get<std::uint8_t>() != 0;
  const bool has_ratio = r.get<std::uint8_t>() != 0;
  const double ratio = r.get<double>();
  if (has_ratio) c.offset_scale_ratio = ratio;
  c.sampler_kind = static_cast<SamplerKind>(r.get<std::uint8_t>());
  c.seed = r.get<std::uint64_t>();
  c.sh_degree_eval = r.get<std::int32_t>();
  c.min_transmittance = r.get<float>();
  data.bound_radius = r.get<double>();
  data.d_near = r.get<double>();
  data.d_far = r.get<double>();
  data.focal_normalized = r.get<double>();
  const auto n_views = r.get<std::uint64_t>();
  if (n_views > (std::uint64_t{1} << 32)) throw std::runtime_error("implausible view count in visibility dataset");
  data.views.resize(n_views);
  for (auto& v : data.views) {
    v.position = get_vec3(r);
    v.direction = get_vec3(r);
    v.distance = r.get<double>();
    v.forward = get_vec3(r);
  }
  data.labels.reserve(n_views);
  for (std::uint64_t i = 0; i < n_views; ++i) {
    BitVector bits(data.n_gaussians);
    r.bytes(bits.words().data(), bits.words().size() * sizeof(std::uint64_t));
    data.labels.push_back(std::move(bits));
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes in visibility dataset");
  return data;
}

}  // namespace splatcull
