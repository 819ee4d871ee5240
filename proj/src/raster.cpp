#include "splatcull/raster.hpp"

#include "splatcull/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numeric>

namespace splatcull {

Eigen::Matrix3f quaternion_to_matrix(const Eigen::Vector4f& q_raw) {
  const Eigen::Vector4f q = q_raw.normalized();
  const float w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3f r;
  r << 1.f - 2.f * (y * y + z * z), 2.f * (x * y - w * z), 2.f * (x * z + w * y),
      2.f * (x * y + w * z), 1.f - 2.f * (x * x + z * z), 2.f * (y * z - w * x),
      2.f * (x * z - w * y), 2.f * (y * z + w * x), 1.f - 2.f * (x * x + y * y);
  return r;
}

Eigen::Matrix3f covariance3d(const Gaussian& g) {
  const Eigen::Matrix3f m = quaternion_to_matrix(g.rotation) *
                            g.log_scale.array().exp().matrix().asDiagonal();
  return m * m.transpose();
}

std::optional<Projection> project_gaussian(const Gaussian& g, const Camera& cam) {
  const Eigen::Matrix3f view = cam.rotation.cast<float>();
  const Eigen::Vector3f t = view * (g.mean - cam.position.cast<float>());
  if (!(t.z() > static_cast<float>(cam.near_clip))) return std::nullopt;

  const float f = static_cast<float>(cam.focal());
  const float lim_x = 1.3f * static_cast<float>(cam.tan_half_fov_x());
  const float lim_y = 1.3f * static_cast<float>(cam.tan_half_fov_y());
  const float tx = std::clamp(t.x() / t.z(), -lim_x, lim_x) * t.z();
  const float ty = std::clamp(t.y() / t.z(), -lim_y, lim_y) * t.z();
  const float inv_z = 1.0f / t.z();

  Eigen::Matrix<float, 2, 3> j;
  j << f * inv_z, 0.0f, -f * tx * inv_z * inv_z,
      0.0f, f * inv_z, -f * ty * inv_z * inv_z;
  const Eigen::Matrix<float, 2, 3> jw = j * view;

  Projection p;
  p.cov2d_raw = jw * covariance3d(g) * jw.transpose();
  p.cov2d_raw(1, 0) = p.cov2d_raw(0, 1);
  p.cov2d = p.cov2d_raw;
  p.cov2d(0, 0) += kCovarianceDilation;
  p.cov2d(1, 1) += kCovarianceDilation;
  p.mean2d = {f * t.x() * inv_z + 0.5f * static_cast<float>(cam.width),
              f * t.y() * inv_z + 0.5f * static_cast<float>(cam.height)};
  p.depth = t.z();
  return p;
}

bool in_frustum(const Eigen::Vector3f& mean, float margin, const Camera& cam) {
  const Eigen::Vector3d c = cam.to_camera(mean.cast<double>());
  const double m = margin;
  if (!(c.z() > cam.near_clip) || c.z() > cam.far_clip + m) return false;
  const double tx = cam.tan_half_fov_x();
  const double ty = cam.tan_half_fov_y();
  if ((std::abs(c.x()) - c.z() * tx) / std::sqrt(1.0 + tx * tx) > m) return false;
  if ((std::abs(c.y()) - c.z() * ty) / std::sqrt(1.0 + ty * ty) > m) return false;
  return true;
}

Eigen::Vector3f evaluate_sh(const Gaussian& g, int degree, const Eigen::Vector3f& dir) {
  constexpr float c0 = 0.28209479177387814f;
  constexpr float c1 = 0.4886025119029199f;
  constexpr float c2[] = {1.0925484305920792f, -1.0925484305920792f, 0.31539156525252005f,
                          -1.0925484305920792f, 0.5462742152960396f};
  constexpr float c3[] = {-0.5900435899266435f, 2.890611442640554f, -0.4570457994644658f,
                          0.3731763325901154f, -0.4570457994644658f, 1.445305721320277f,
                          -0.5900435899266435f};
  const auto& sh = g.sh;
  Eigen::Vector3f result = c0 * sh[0];
  if (degree > 0) {
    const float x = dir.x(), y = dir.y(), z = dir.z();
    result += -c1 * y * sh[1] + c1 * z * sh[2] - c1 * x * sh[3];
    if (degree > 1) {
      const float xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
      result += c2[0] * xy * sh[4] + c2[1] * yz * sh[5] + c2[2] * (2.0f * zz - xx - yy) * sh[6] +
                c2[3] * xz * sh[7] + c2[4] * (xx - yy) * sh[8];
      if (degree > 2) {
        result += c3[0] * y * (3.0f * xx - yy) * sh[9] + c3[1] * xy * z * sh[10] +
                  c3[2] * y * (4.0f * zz - xx - yy) * sh[11] +
                  c3[3] * z * (2.0f * zz - 3.0f * xx - 3.0f * yy) * sh[12] +
                  c3[4] * x * (4.0f * zz - xx - yy) * sh[13] + c3[5] * z * (xx - yy) * sh[14] +
                  c3[6] * x * (xx - 3.0f * yy) * sh[15];
      }
    }
  }
  return (result.array() + 0.5f).max(0.0f).matrix();
}

namespace {

struct Splat {
  float x, y;        // mean2d
  float a, b, c;     // conic (inverse covariance)
  float opacity;
  float depth;
  Eigen::Vector3f color;
  int x0, y0, x1, y1;  // pixel rect, half open
};

enum class SplatState : std::uint8_t { culled, passed, skipped };

void atomic_max(std::atomic_ref<std::uint32_t> slot, float value) {
  // Non-negative floats order like their bit patterns.
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  std::uint32_t current = slot.load(std::memory_order_relaxed);
  while (current < bits && !slot.compare_exchange_weak(current, bits, std::memory_order_relaxed)) {
  }
}

}  // namespace

RenderOutput render(std::span<const Gaussian> gaussians, const Camera& cam, const RenderOptions& opts) {
  const int width = cam.width;
  const int height = cam.height;
  const int tile = std::max(1, opts.tile_size);
  const int tiles_x = (width + tile - 1) / tile;
  const int tiles_y = (height + tile - 1) / tile;
  const std::size_t n = gaussians.size();
  const int sh_degree = std::clamp(opts.sh_degree_eval, 0, kMaxShDegree);

  RenderOutput out;
  out.width = width;
  out.height = height;

  std::vector<Splat> splats(n);
  std::vector<SplatState> state(n, SplatState::culled);
  const Eigen::Vector3f cam_pos = cam.position.cast<float>();

  parallel_for(n, opts.threads, [&](std::size_t i) {
    const Gaussian& g = gaussians[i];
    if (!in_frustum(g.mean, frustum_margin(g.log_scale.maxCoeff(), opts.frustum_margin), cam)) return;
    const auto proj = project_gaussian(g, cam);
    if (!proj) return;
    if (opts.radius_clip && proj->cov2d_raw.determinant() < *opts.radius_clip) return;
    const float det = proj->cov2d.determinant();
    if (!(det > kMinCovDeterminant)) {
      state[i] = SplatState::skipped;
      return;
    }
    state[i] = SplatState::passed;
    Splat& s = splats[i];
    const Eigen::Matrix2f& cov = proj->cov2d;
    s.x = proj->mean2d.x();
    s.y = proj->mean2d.y();
    s.a = cov(1, 1) / det;
    s.b = -cov(0, 1) / det;
    s.c = cov(0, 0) / det;
    s.opacity = g.opacity();
    s.depth = proj->depth;
    s.color = evaluate_sh(g, sh_degree, (g.mean - cam_pos).normalized());
    const float mid = 0.5f * (cov(0, 0) + cov(1, 1));
    const float lambda_max = mid + std::sqrt(std::max(0.1f, mid * mid - det));
    const float radius = std::ceil(3.0f * std::sqrt(lambda_max));
    s.x0 = std::max(0, static_cast<int>(std::floor(s.x - radius)));
    s.y0 = std::max(0, static_cast<int>(std::floor(s.y - radius)));
    s.x1 = std::min(width, static_cast<int>(std::ceil(s.x + radius)) + 1);
    s.y1 = std::min(height, static_cast<int>(std::ceil(s.y + radius)) + 1);
  });

  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] == SplatState::skipped) {
      ++out.skipped_ill_conditioned;
    } else if (state[i] == SplatState::passed) {
      ++out.passed_count;
      const Splat& s = splats[i];
      if (s.x0 < s.x1 && s.y0 < s.y1) order.push_back(static_cast<std::uint32_t>(i));
    }
  }
  // Skipped splats survived culling too.
  out.passed_count += out.skipped_ill_conditioned;

  std::sort(order.begin(), order.end(), [&](std::uint32_t l, std::uint32_t r) {
    const float dl = splats[l].depth, dr = splats[r].depth;
    return dl < dr || (dl == dr && l < r);
  });

  // Bin into tiles in global depth order, so every tile list is sorted.
  const std::size_t tile_count = static_cast<std::size_t>(tiles_x) * tiles_y;
  std::vector<std::uint32_t> tile_offsets(tile_count + 1, 0);
  auto for_each_tile = [&](const Splat& s, auto&& fn) {
    const int tx0 = s.x0 / tile, tx1 = (s.x1 - 1) / tile;
    const int ty0 = s.y0 / tile, ty1 = (s.y1 - 1) / tile;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx) fn(static_cast<std::size_t>(ty) * tiles_x + tx);
  };
  for (const auto idx : order) for_each_tile(splats[idx], [&](std::size_t t) { ++tile_offsets[t + 1]; });
  std::partial_sum(tile_offsets.begin(), tile_offsets.end(), tile_offsets.begin());
  std::vector<std::uint32_t> tile_lists(tile_offsets.back());
  {
    std::vector<std::uint32_t> cursor(tile_offsets.begin(), tile_offsets.end() - 1);
    for (const auto idx : order) for_each_tile(splats[idx], [&](std::size_t t) { tile_lists[cursor[t]++] = idx; });
  }

  const std::size_t pixel_count = static_cast<std::size_t>(width) * height;
  out.image.assign(3 * pixel_count, 0.0f);
  out.final_transmittance.assign(pixel_count, 1.0f);
  std::vector<std::uint32_t> cmax_bits(n, 0u);
  std::vector<std::vector<PixelContribution>> per_tile_records(opts.record_pixel_contributions ? tile_count : 0);
  const double t_min = opts.min_transmittance;
  const Eigen::Vector3d background = opts.background.cast<double>();

  parallel_for(tile_count, opts.threads, [&](std::size_t t) {
    const int tx = static_cast<int>(t % tiles_x);
    const int ty = static_cast<int>(t / tiles_x);
    const int px0 = tx * tile, py0 = ty * tile;
    const int px1 = std::min(width, px0 + tile), py1 = std::min(height, py0 + tile);
    const int tw = px1 - px0;
    const int th = py1 - py0;
    std::vector<double> trans(static_cast<std::size_t>(tw) * th, 1.0);
    std::vector<Eigen::Vector3d> rgb(static_cast<std::size_t>(tw) * th, Eigen::Vector3d::Zero());
    std::vector<std::uint8_t> done(static_cast<std::size_t>(tw) * th, 0);
    int active = tw * th;

    for (std::uint32_t k = tile_offsets[t]; k < tile_offsets[t + 1] && active > 0; ++k) {
      const std::uint32_t idx = tile_lists[k];
      const Splat& s = splats[idx];
      const int x0 = std::max(s.x0, px0), x1 = std::min(s.x1, px1);
      const int y0 = std::max(s.y0, py0), y1 = std::min(s.y1, py1);
      const Eigen::Vector3d color = s.color.cast<double>();
      float local_max = 0.0f;
      for (int y = y0; y < y1; ++y) {
        const float dy = static_cast<float>(y) - s.y;
        for (int x = x0; x < x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y - py0) * tw + (x - px0);
          if (done[p]) continue;
          const float dx = static_cast<float>(x) - s.x;
          const float power = -0.5f * (s.a * dx * dx + s.c * dy * dy) - s.b * dx * dy;
          if (power > 0.0f) continue;
          const float alpha = std::min(kMaxAlpha, s.opacity * std::exp(power));
          if (alpha < kMinAlpha) continue;
          const double contribution = static_cast<double>(alpha) * trans[p];
          rgb[p] += contribution * color;
          trans[p] *= 1.0 - static_cast<double>(alpha);
          local_max = std::max(local_max, static_cast<float>(contribution));
          if (!per_tile_records.empty()) {
            per_tile_records[t].push_back(
                {static_cast<std::uint32_t>(y * width + x), idx, contribution});
          }
          if (trans[p] < t_min) {
            done[p] = 1;
            --active;
          }
        }
      }
      if (local_max > 0.0f) atomic_max(std::atomic_ref<std::uint32_t>(cmax_bits[idx]), local_max);
    }

    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        const std::size_t lp = static_cast<std::size_t>(y - py0) * tw + (x - px0);
        const std::size_t gp = static_cast<std::size_t>(y) * width + x;
        const Eigen::Vector3d c = rgb[lp] + trans[lp] * background;
        for (int ch = 0; ch < 3; ++ch) out.image[3 * gp + ch] = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
        out.final_transmittance[gp] = static_cast<float>(trans[lp]);
      }
    }
  });

  for (std::size_t i = 0; i < n; ++i) out.used_count += cmax_bits[i] > 0 ? 1 : 0;
  if (opts.record_contributions) {
    out.contribution_max.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.contribution_max[i] = std::bit_cast<float>(cmax_bits[i]);
  }
  for (auto& records : per_tile_records) {
    out.pixel_contributions.insert(out.pixel_contributions.end(), records.begin(), records.end());
  }
  return out;
}

}  // namespace splatcull
