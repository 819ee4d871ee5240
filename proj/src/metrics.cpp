#include "splatcull/metrics.hpp"

#include "splatcull/image_metrics.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splatcull {
namespace {

constexpr std::string_view kNames[] = {"full", "no_mlp", "mlp", "mlp+radius_clip"};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <typename T>
T parse_number(std::string_view field, std::size_t line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string_view variant_name(Variant v) { return kNames[static_cast<int>(v)]; }

Variant parse_variant(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (kNames[i] == name) return static_cast<Variant>(i);
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

std::vector<double> Trajectory::distances() const {
  if (n_steps < 1) throw std::invalid_argument("trajectory needs at least one step");
  if (!(d_min > 0.0 && d_max >= d_min)) throw std::invalid_argument("trajectory needs 0 < d_min <= d_max");
  std::vector<double> out(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    out[static_cast<std::size_t>(i)] = n_steps == 1 ? d_min : d_min + (d_max - d_min) * i / (n_steps - 1);
  }
  return out;
}

Camera Trajectory::camera_at(double distance) const {
  const Eigen::Vector3d pos = target + distance * direction.normalized();
  return Camera::look_at(pos, target, up, fov, width, height, std::max(1e-4, 0.01 * distance), 1e6);
}

SweepResult distance_sweep(const ComposedScene& scene, const Trajectory& trajectory, const SweepOptions& opts) {
  scene.validate();
  using Clock = std::chrono::steady_clock;
  const std::vector<Gaussian> flat = flatten(scene);
  std::int64_t payload_total = 0;
  for (std::size_t a = 0; a < scene.assets.size(); ++a) {
    payload_total += static_cast<std::int64_t>(scene.instances[a].size() * scene.assets[a].asset.size()) *
                     gaussian_payload_bytes(scene.assets[a].asset.sh_degree);
  }

  SweepResult result;
  for (const double d : trajectory.distances()) {
    const Camera cam = trajectory.camera_at(d);
    RenderOptions base = opts.raster;
    base.radius_clip.reset();

    const auto t0 = Clock::now();
    const RenderOutput reference = render(flat, cam, base);
    const double full_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    const ImageView ref_view{reference.image, reference.width, reference.height, 3};

    for (const Variant v : opts.variants) {
      SweepRow row;
      row.distance = d;
      row.variant = v;
      if (v == Variant::full) {
        row.psnr = kPsnrCap;
        row.ssim = 1.0;
        row.passed = reference.passed_count;
        row.instantiated = static_cast<std::int64_t>(flat.size());
        row.used = reference.used_count;
        row.mem_bytes = payload_total;
        row.frame_ms = full_ms;
      } else {
        ComposedRenderOptions copts;
        copts.raster = base;
        copts.use_models = v != Variant::no_mlp;
        if (v == Variant::mlp_radius_clip) copts.raster.radius_clip = opts.radius_clip;
        const auto t1 = Clock::now();
        const auto [out, stats] = render_composed(scene, cam, copts);
        row.frame_ms = std::chrono::duration<double, std::milli>(Clock::now() - t1).count();
        const QualityPair q = compute_metrics_pair({out.image, out.width, out.height, 3}, ref_view);
        row.psnr = q.psnr;
        row.ssim = q.ssim;
        row.passed = stats.frustum_passed;
        row.instantiated = stats.instantiated;
        row.used = stats.used;
        row.mem_bytes = stats.mem_bytes_instantiated;
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string to_csv(const SweepResult& result) {
  std::string out(kCsvHeader);
  out += '\n';
  char buf[512];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%lld,%lld,%lld,%lld,%.17g\n", r.distance,
                  std::string(variant_name(r.variant)).c_str(), r.psnr, r.ssim, static_cast<long long>(r.passed),
                  static_cast<long long>(r.instantiated), static_cast<long long>(r.used),
                  static_cast<long long>(r.mem_bytes), r.frame_ms);
    out += buf;
  }
  return out;
}

SweepResult parse_csv(std::string_view text) {
  SweepResult result;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw std::runtime_error("csv: unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 9) throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 9 fields");
    SweepRow r;
    r.distance = parse_number<double>(fields[0], line_no);
    r.variant = parse_variant(fields[1]);
    r.psnr = parse_number<double>(fields[2], line_no);
    r.ssim = parse_number<double>(fields[3], line_no);
    r.passed = parse_number<std::int64_t>(fields[4], line_no);
    r.instantiated = parse_number<std::int64_t>(fields[5], line_no);
    r.used = parse_number<std::int64_t>(fields[6], line_no);
    r.mem_bytes = parse_number<std::int64_t>(fields[7], line_no);
    r.frame_ms = parse_number<double>(fields[8], line_no);
    result.rows.push_back(r);
  }
  if (!header_seen) throw std::runtime_error("csv: missing header");
  return result;
}

void emit_csv(const SweepResult& result, const std::filesystem::path& path) { write_text(path, to_csv(result)); }

std::vector<VariantSummary> summarize(const SweepResult& result) {
  std::vector<VariantSummary> out;
  for (const auto& r : result.rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const VariantSummary& s) { return s.variant == r.variant; });
    if (it == out.end()) {
      out.push_back({});
      it = out.end() - 1;
      it->variant = r.variant;
    }
    ++it->rows;
    it->psnr += r.psnr;
    it->ssim += r.ssim;
    it->passed += static_cast<double>(r.passed);
    it->instantiated += static_cast<double>(r.instantiated);
    it->used += static_cast<double>(r.used);
    it->mem_bytes += static_cast<double>(r.mem_bytes);
    it->peak_mem_bytes = std::max(it->peak_mem_bytes, r.mem_bytes);
    it->frame_ms += r.frame_ms;
  }
  for (auto& s : out) {
    const double n = static_cast<double>(s.rows);
    s.psnr /= n;
    s.ssim /= n;
    s.passed /= n;
    s.instantiated /= n;
    s.used /= n;
    s.mem_bytes /= n;
    s.frame_ms /= n;
  }
  return out;
}

std::string format_summary(const std::vector<VariantSummary>& summary) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %12s %12s %12s %12s %10s\n", "variant", "psnr", "ssim", "passed",
                "instantiated", "used", "mem_MiB", "frame_ms");
  out << buf;
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "%-16s %8.2f %8.5f %12.1f %12.1f %12.1f %12.3f %10.2f\n",
                  std::string(variant_name(s.variant)).c_str(), s.psnr, s.ssim, s.passed, s.instantiated, s.used,
                  s.mem_bytes / (1024.0 * 1024.0), s.frame_ms);
    out << buf;
  }
  return out.str();
}

void emit_summary(const SweepResult& result, const std::filesystem::path& path) {
  write_text(path, format_summary(summarize(result)));
}

}  // namespace splatcull
