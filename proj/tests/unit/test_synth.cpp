#include "support.hpp"

#include "splatcull/raster.hpp"
#include "splatcull/sampling.hpp"
#include "splatcull/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace splatcull;

namespace {

double visible_fraction(const Asset& asset, const Camera& cam) {
  RenderOptions opts;
  opts.record_contributions = true;
  const RenderOutput out = render(asset.gaussians, cam, opts);
  return static_cast<double>(out.used_count) / static_cast<double>(asset.size());
}

Camera shell_camera(double distance) {
  return make_sample_camera({0.0, 0.0, distance}, Eigen::Vector3d::Zero(), std::numbers::pi / 3.0, 256, distance, 1.0);
}

}  // namespace

TEST_CASE("shell means lie on the sphere") {
  const Asset shell = make_shell(1000, 2.5, 0.1, 0.5, 1);
  CHECK(shell.size() == 1000);
  for (const auto& g : shell.gaussians) REQUIRE(std::abs(g.mean.cast<double>().norm() - 2.5) < 1e-6);
  CHECK(shell.has_distances());
  CHECK(shell.gaussians[0].opacity() == doctest::Approx(0.5));
  CHECK(std::exp(shell.gaussians[0].log_scale.x()) == doctest::Approx(0.1));
}

TEST_CASE("opaque shell hides its far side") {
  const Asset shell = make_shell(4000, 1.0, 0.1, 0.99, 1);
  CHECK(visible_fraction(shell, shell_camera(3.0)) <= 0.6);
}

TEST_CASE("translucent shell is almost entirely visible") {
  const Asset shell = make_shell(1000, 1.0, 0.1, 0.01, 1);
  CHECK(visible_fraction(shell, shell_camera(3.0)) >= 0.95);
}

TEST_CASE("generators are seed-deterministic") {
  CHECK(asset_hash(make_shell(300, 1.0, 0.1, 0.9, 4)) == asset_hash(make_shell(300, 1.0, 0.1, 0.9, 4)));
  CHECK(asset_hash(make_shell(300, 1.0, 0.1, 0.9, 4)) != asset_hash(make_shell(300, 1.0, 0.1, 0.9, 5)));
  SlabConfig a;
  a.n_front = a.n_back = 100;
  SlabConfig b = a;
  CHECK(asset_hash(make_slab_pair(a)) == asset_hash(make_slab_pair(b)));
  b.seed = 2;
  CHECK(asset_hash(make_slab_pair(a)) != asset_hash(make_slab_pair(b)));
}

TEST_CASE("slab layout") {
  SlabConfig cfg;
  cfg.n_front = 400;
  cfg.n_back = 100;
  cfg.gap = 0.4;
  const Asset slab = make_slab_pair(cfg);
  REQUIRE(slab.size() == 500);
  for (int i = 0; i < 400; ++i) CHECK(slab.gaussians[i].mean.z() == doctest::Approx(0.2));
  for (int i = 400; i < 500; ++i) CHECK(slab.gaussians[i].mean.z() == doctest::Approx(-0.2));
  CHECK(slab.gaussians[0].opacity() == doctest::Approx(0.99));
}

TEST_CASE("coincident sheets composite as alpha(1 - alpha)") {
  // Two identical sheets at gap 0: where the front sheet has alpha a at a pixel,
  // the back copy contributes a (1 - a) there.
  SlabConfig cfg;
  cfg.n_front = cfg.n_back = 1;
  cfg.gap = 0.0;
  cfg.alpha_front = cfg.alpha_back = 0.6;
  cfg.extent_front = cfg.extent_back = 0.2;
  Asset slab = make_slab_pair(cfg);
  slab.gaussians[1] = slab.gaussians[0];
  slab.gaussians[0].mean.setZero();
  slab.gaussians[1].mean.setZero();
  RenderOptions opts;
  opts.record_pixel_contributions = true;
  const Camera cam = make_sample_camera({0, 0, 2.0}, Eigen::Vector3d::Zero(), std::numbers::pi / 3.0, 64, 2.0, 0.1);
  const RenderOutput out = render(slab.gaussians, cam, opts);
  std::vector<double> front(64 * 64, -1.0), back(64 * 64, -1.0);
  for (const auto& c : out.pixel_contributions) (c.gaussian == 0 ? front : back)[c.pixel] = c.value;
  int checked = 0;
  for (std::size_t p = 0; p < front.size(); ++p) {
    if (front[p] < 0.0) continue;
    REQUIRE(back[p] >= 0.0);
    CHECK(back[p] == doctest::Approx(front[p] * (1.0 - front[p])).epsilon(1e-6));
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("generator argument validation") {
  CHECK_THROWS(make_shell(0));
  CHECK_THROWS(make_shell(10, -1.0));
  CHECK_THROWS(make_shell(10, 1.0, 0.1, 1.0));
  SlabConfig cfg;
  cfg.gap = -1.0;
  CHECK_THROWS(make_slab_pair(cfg));
}
