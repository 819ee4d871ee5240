#include "support.hpp"

#include "splatcull/sampling.hpp"
#include "splatcull/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace splatcull;

namespace {

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

TrainView head_on_view(const Asset& asset, double distance, int n_aux, int size = 128) {
  TrainView v;
  v.direction_unit = Eigen::Vector3d::UnitZ();
  v.distance = distance;
  v.camera = make_sample_camera(distance * v.direction_unit, Eigen::Vector3d::Zero(), std::numbers::pi / 3.0, size,
                                distance, asset.bound_radius);
  const double cone = 3.0 * std::numbers::pi / 180.0;
  for (int k = 0; k < n_aux; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / n_aux;
    const Eigen::Vector3d d(std::sin(cone) * std::cos(phi), std::sin(cone) * std::sin(phi), std::cos(cone));
    v.aux_cameras.push_back(make_sample_camera(distance * d, Eigen::Vector3d::Zero(), std::numbers::pi / 3.0, size,
                                               distance, asset.bound_radius));
  }
  return v;
}

std::size_t back_sheet_bits(const BitVector& labels, int n_front) {
  std::size_t count = 0;
  for (std::size_t i = static_cast<std::size_t>(n_front); i < labels.size(); ++i) count += labels.test(i);
  return count;
}

}  // namespace

TEST_CASE("fibonacci_directions") {
  const auto one = fibonacci_directions(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].z() == doctest::Approx(0.0));
  const auto two = fibonacci_directions(2);
  CHECK(two[0].z() == doctest::Approx(0.5));
  CHECK(two[1].z() == doctest::Approx(-0.5));
  CHECK_THROWS(fibonacci_directions(0));

  const auto dirs = fibonacci_directions(1000);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& d : dirs) {
    REQUIRE(std::abs(d.norm() - 1.0) < 1e-12);
    mean += d;
  }
  CHECK((mean / 1000.0).norm() < 0.05);

  // Nearest-neighbour spacing squared is proportional to the local cap area.
  double lo = 1e9, hi = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    double best = 1e9;
    for (std::size_t j = 0; j < dirs.size(); ++j)
      if (i != j) best = std::min(best, (dirs[i] - dirs[j]).squaredNorm());
    lo = std::min(lo, best);
    hi = std::max(hi, best);
  }
  CHECK(hi / lo < 3.0);
}

TEST_CASE("longlat_directions") {
  for (int n : {1, 7, 64, 256}) {
    const auto dirs = longlat_directions(n);
    CHECK(dirs.size() == static_cast<std::size_t>(n));
    for (const auto& d : dirs) CHECK(std::abs(d.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("build_views geometry") {
  const Asset asset = make_shell(2000, 1.0, 0.08, 0.99, 3);
  SamplingConfig cfg;
  cfg.n_directions = 24;
  cfg.n_distances = 5;
  cfg.seed = 17;
  const auto views = build_views(asset, cfg);
  REQUIRE(views.size() == 120);

  for (const auto& v : views) {
    CHECK(std::abs(v.direction_unit.norm() - 1.0) < 1e-6);
    CHECK(v.distance >= asset.d_near - 1e-12);
    CHECK(v.distance <= asset.d_far + 1e-12);
    CHECK((v.camera.position - v.distance * v.direction_unit).norm() < 1e-9);
    // Offsets lie in the plane facing the camera.
    CHECK(std::abs(v.target_offset.dot(v.direction_unit)) < 1e-9);
    if (v.distance == asset.d_near) CHECK(v.target_offset.norm() == 0.0);
    CHECK(v.target_offset.norm() <= offset_magnitude(asset, default_offset_ratio(asset), v.distance) + 1e-12);
    REQUIRE(v.aux_cameras.size() == 6);
    for (const auto& aux : v.aux_cameras) {
      CHECK(angle_between(aux.position, v.direction_unit) == doctest::Approx(cfg.aux_cone_half_angle).epsilon(1e-6));
      CHECK(aux.position.norm() == doctest::Approx(v.distance));
      // Aux views look at the same target.
      const Eigen::Vector3d to_target = (v.target_offset - aux.position).normalized();
      CHECK((aux.forward() - to_target).norm() < 1e-9);
    }
    // The whole asset stays inside the main frustum.
    for (const auto& g : asset.gaussians) REQUIRE(in_frustum(g.mean, 0.0f, v.camera));
  }

  // The offset grows with distance: the farthest views use non-zero offsets.
  const auto far = std::count_if(views.begin(), views.end(),
                                 [&](const TrainView& v) { return v.distance == asset.d_far && v.target_offset.norm() > 0.0; });
  CHECK(far > 0);
}

TEST_CASE("build_views is seed-deterministic") {
  const Asset asset = make_shell(500, 1.0, 0.1, 0.99, 1);
  SamplingConfig cfg;
  cfg.n_directions = 8;
  cfg.n_distances = 3;
  const auto a = build_views(asset, cfg);
  const auto b = build_views(asset, cfg);
  cfg.seed = 99;
  const auto c = build_views(asset, cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].target_offset == b[i].target_offset);
    CHECK(a[i].camera.rotation == b[i].camera.rotation);
    any_diff |= a[i].target_offset != c[i].target_offset;
  }
  CHECK(any_diff);
}

TEST_CASE("offset can be disabled") {
  const Asset asset = make_shell(500, 1.0, 0.1, 0.99, 1);
  SamplingConfig cfg;
  cfg.n_directions = 4;
  cfg.n_distances = 3;
  cfg.offset_enabled = false;
  for (const auto& v : build_views(asset, cfg)) CHECK(v.target_offset.norm() == 0.0);
}

TEST_CASE("sampling config validation") {
  SamplingConfig cfg;
  cfg.aux_cone_half_angle = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.aux_cone_half_angle = std::numbers::pi / 4.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.n_directions = 0;
  CHECK_THROWS(cfg.validate());
  Asset no_dist = test::random_asset(10, 1);
  CHECK_THROWS(build_views(no_dist, SamplingConfig{}));
}

TEST_CASE("slab: rear sheet is invisible head-on") {
  SlabConfig sc;
  sc.n_front = 1600;
  sc.n_back = 900;
  const Asset slab = make_slab_pair(sc);
  SamplingConfig cfg;
  for (const double d : {slab.d_near, 2.0 * slab.d_near}) {
    const TrainView v = head_on_view(slab, d, 6);
    const BitVector labels = visible_labels(slab, v, cfg);
    CHECK(back_sheet_bits(labels, sc.n_front) == 0);
    CHECK(labels.count() > 0);
  }
}

TEST_CASE("slab: labels from the near-pole views of both samplers hide the rear sheet") {
  SlabConfig sc;
  sc.n_front = 1600;
  sc.n_back = 900;
  const Asset slab = make_slab_pair(sc);
  for (const SamplerKind kind : {SamplerKind::fibonacci, SamplerKind::longlat}) {
    SamplingConfig cfg;
    cfg.n_directions = 256;
    cfg.n_distances = 1;
    cfg.sampler_kind = kind;
    int checked = 0;
    for (const auto& v : build_views(slab, cfg)) {
      if (v.direction_unit.z() < 0.98) continue;
      CHECK(back_sheet_bits(visible_labels(slab, v, cfg), sc.n_front) == 0);
      ++checked;
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("slab: an oblique view reveals only part of the rear sheet") {
  SlabConfig sc;
  sc.n_front = 1600;
  sc.n_back = 900;
  const Asset slab = make_slab_pair(sc);
  TrainView v;
  // Above the front sheet but steep enough to see past its edge.
  v.direction_unit = Eigen::Vector3d(1.0, 0.0, 1.0).normalized();
  v.distance = slab.d_near;
  v.camera = make_sample_camera(v.distance * v.direction_unit, Eigen::Vector3d::Zero(), std::numbers::pi / 3.0, 128,
                                v.distance, slab.bound_radius);
  const BitVector labels = visible_labels(slab, v, SamplingConfig{});
  const std::size_t back = back_sheet_bits(labels, sc.n_front);
  const std::size_t front = labels.count() - back;
  CHECK(back > 0);
  CHECK(front > 0);
  CHECK(back < static_cast<std::size_t>(sc.n_back) / 2);
}

TEST_CASE("aux views only add labels") {
  const Asset shell = make_shell(3000, 1.0, 0.06, 0.99, 5);
  const TrainView with_aux = head_on_view(shell, shell.d_near, 6);
  TrainView no_aux = with_aux;
  no_aux.aux_cameras.clear();
  SamplingConfig cfg;
  const BitVector base = visible_labels(shell, no_aux, cfg);
  const BitVector more = visible_labels(shell, with_aux, cfg);

  RenderOptions opts;
  opts.record_contributions = true;
  CHECK(base == contribution_mask(render(shell.gaussians, no_aux.camera, opts)));
  BitVector merged = base;
  merged |= more;
  CHECK(merged == more);
  CHECK(more.count() >= base.count());
}

TEST_CASE("BitVector") {
  BitVector a(130), b(130);
  a.set(0);
  a.set(129);
  b.set(64);
  CHECK(a.count() == 2);
  a |= b;
  CHECK(a.count() == 3);
  CHECK(a.test(64));
  CHECK_FALSE(a.test(63));
  BitVector c(10);
  CHECK_THROWS(a |= c);
}
