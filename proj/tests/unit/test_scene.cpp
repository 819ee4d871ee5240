#include "support.hpp"
#include "nn_support.hpp"

#include "splatcull/dataset.hpp"
#include "splatcull/image_metrics.hpp"
#include "splatcull/scene.hpp"
#include "splatcull/synth.hpp"
#include "splatcull/train.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

using namespace splatcull;

namespace {

constexpr double kFov60 = std::numbers::pi / 3.0;

SceneAsset with_random_model(Asset asset, std::uint64_t seed, const std::string& id = "a") {
  SceneAsset sa;
  sa.id = id;
  sa.asset = std::move(asset);
  auto model = make_visibility_model({32, 32}, {32, 32}, seed);
  model.norm = {sa.asset.bound_radius, sa.asset.d_near, sa.asset.d_far, 0.8660254037844386};
  model.asset_hash = asset_hash(sa.asset);
  sa.attach_model(std::move(model));
  return sa;
}

InstanceTransform random_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> s(0.5, 2.0);
  InstanceTransform t;
  t.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
  t.rotation = test::random_unit_quaternion(rng);
  t.scale = s(rng);
  return t;
}

Camera camera_towards(const Eigen::Vector3d& target, const Eigen::Vector3d& dir, double distance, double fov,
                      int size = 64) {
  return Camera::look_at(target + distance * dir, target, Eigen::Vector3d::UnitZ(), fov, size, size, 0.01, 1e5);
}

double max_abs_diff(const std::array<float, kVisInputs>& a, const std::array<float, kVisInputs>& b) {
  double worst = 0.0;
  for (int i = 0; i < kVisInputs; ++i) worst = std::max(worst, static_cast<double>(std::abs(a[i] - b[i])));
  return worst;
}

/// Slab with a wide front sheet and a model trained on it; built once.
struct TrainedSlab {
  SlabConfig cfg;
  SceneAsset sa;

  TrainedSlab() {
    cfg.n_front = 1600;
    cfg.n_back = 1600;
    cfg.extent_front = 1.6;
    cfg.extent_back = 1.0;
    sa.id = "slab";
    sa.asset = make_slab_pair(cfg);
    SamplingConfig scfg;
    scfg.n_directions = 128;
    scfg.n_distances = 4;
    scfg.n_aux_views = 2;
    scfg.image_size = 64;
    const VisibilityDataset data = extract_dataset(sa.asset, scfg, 0);
    TrainConfig tcfg;
    tcfg.iterations = 1500;
    tcfg.batch_size = 4096;
    sa.attach_model(train(data, sa.asset, tcfg));
  }
};

const TrainedSlab& trained_slab() {
  static const TrainedSlab slab;
  return slab;
}

}  // namespace

TEST_CASE("corrected distance") {
  CHECK(corrected_distance(7.0, 1.2, 1.2, 1.0) == 7.0);
  CHECK(corrected_distance(10.0, 1.0, 1.0, 2.0) == doctest::Approx(5.0));
  CHECK(corrected_distance(10.0, 2.0, 1.0, 1.0) == doctest::Approx(20.0));
}

TEST_CASE("instantiate applies the similarity transform") {
  std::mt19937_64 rng(1);
  const Gaussian g = test::random_gaussian(rng);
  const InstanceTransform t = random_instance(rng);
  const Gaussian w = instantiate(g, t);
  const Eigen::Matrix3d r = test::quaternion_matrix(t.rotation);
  const Eigen::Vector3d expected = t.translation + t.scale * r * g.mean.cast<double>();
  CHECK((w.mean.cast<double>() - expected).norm() < 1e-5);
  CHECK((w.log_scale - g.log_scale).array().maxCoeff() == doctest::Approx(std::log(t.scale)).epsilon(1e-5));
  // World covariance is s^2 R Sigma R^T.
  const Eigen::Matrix3d cov = covariance3d(g).cast<double>();
  const Eigen::Matrix3d expected_cov = t.scale * t.scale * r * cov * r.transpose();
  CHECK((covariance3d(w).cast<double>() - expected_cov).norm() < 1e-5 * expected_cov.norm());
  // The identity transform is exact.
  const Gaussian same = instantiate(g, InstanceTransform{});
  CHECK(same.mean == g.mean);
  CHECK(same.log_scale == g.log_scale);
  CHECK(same.rotation == g.rotation);
}

TEST_CASE("instance validation") {
  ComposedScene scene;
  scene.add_asset(SceneAsset{});
  InstanceTransform t;
  t.scale = 0.0;
  CHECK_THROWS(scene.add_instance(0, t));
  t.scale = 1.0;
  t.rotation = {2, 0, 0, 0};
  CHECK_THROWS(scene.add_instance(0, t));
  CHECK_THROWS(scene.add_instance(3, InstanceTransform{}));
}

TEST_CASE("local inputs: basic layout") {
  const SceneAsset sa = with_random_model(make_shell(100, 1.0, 0.1, 0.99, 1), 1);
  const Camera cam = camera_towards(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), sa.asset.d_near * 2.0, kFov60);
  const auto in = local_inputs(5, sa, InstanceTransform{}, cam);
  const Eigen::Vector3f mean = sa.asset.gaussians[5].mean / static_cast<float>(sa.asset.bound_radius);
  CHECK(in[0] == doctest::Approx(mean.x()));
  CHECK(in[3] == doctest::Approx(1.0));   // direction
  CHECK(in[7] == doctest::Approx(-1.0));  // forward
  const double expected = normalized_distance(2.0 * sa.asset.d_near, sa.asset.d_near, sa.asset.d_far);
  CHECK(in[6] == doctest::Approx(expected));
  CHECK(in[10] == doctest::Approx(sa.features(0, 5)));

  SceneAsset no_model;
  no_model.asset = sa.asset;
  CHECK_THROWS(local_inputs(0, no_model, InstanceTransform{}, cam));
}

TEST_CASE("local inputs: rotation equivariance") {
  const SceneAsset sa = with_random_model(make_shell(64, 1.0, 0.1, 0.99, 2), 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    InstanceTransform base = random_instance(rng);
    base.rotation = {1, 0, 0, 0};
    const Eigen::Vector3d dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const Camera cam = camera_towards(base.translation, dir, 5.0 + 10.0 * std::abs(n(rng)), kFov60);

    InstanceTransform rotated = base;
    rotated.rotation = test::random_unit_quaternion(rng);
    const Eigen::Matrix3d r = test::quaternion_matrix(rotated.rotation);
    Camera orbited = cam;
    orbited.position = base.translation + r * (cam.position - base.translation);
    orbited.rotation = cam.rotation * r.transpose();

    const std::size_t g = static_cast<std::size_t>(i) % sa.asset.size();
    CHECK(max_abs_diff(local_inputs(g, sa, base, cam), local_inputs(g, sa, rotated, orbited)) < 1e-6);
  }
}

TEST_CASE("local inputs: FoV and scale invariance") {
  const SceneAsset sa = with_random_model(make_shell(64, 1.0, 0.1, 0.99, 3), 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> fov(0.3, 2.0);
  for (int i = 0; i < 100; ++i) {
    const InstanceTransform inst = random_instance(rng);
    const Eigen::Vector3d dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const double d = sa.asset.d_near * (1.0 + 5.0 * std::abs(n(rng)));
    const std::size_t g = static_cast<std::size_t>(i) % sa.asset.size();

    const double fa = fov(rng), fb = fov(rng);
    const Camera a = camera_towards(inst.translation, dir, d, fa);
    Camera b = camera_towards(inst.translation, dir, 1.0, fb);
    b.position = inst.translation + d * (b.focal_normalized() / a.focal_normalized()) * dir;
    CHECK(max_abs_diff(local_inputs(g, sa, inst, a), local_inputs(g, sa, inst, b)) < 1e-6);

    InstanceTransform unit = inst;
    unit.scale = 1.0;
    const Camera c1 = camera_towards(inst.translation, dir, d, fa);
    const Camera cs = camera_towards(inst.translation, dir, inst.scale * d, fa);
    CHECK(max_abs_diff(local_inputs(g, sa, unit, c1), local_inputs(g, sa, inst, cs)) < 1e-6);
  }
}

TEST_CASE("instanced render without models equals the flattened render") {
  ComposedScene scene;
  std::mt19937_64 rng(5);
  for (int a = 0; a < 3; ++a) {
    SceneAsset sa;
    sa.id = "asset" + std::to_string(a);
    sa.asset = test::random_asset(150, 10 + a, a, 0.5);
    const std::size_t idx = scene.add_asset(std::move(sa));
    for (int i = 0; i < 10; ++i) scene.add_instance(idx, random_instance(rng));
  }
  const Camera cam = camera_towards(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 1, 0.5).normalized(), 9.0, kFov60, 96);
  const std::vector<Gaussian> flat = flatten(scene);
  CHECK(flat.size() == 4500);
  for (const bool clip : {false, true}) {
    ComposedRenderOptions opts;
    opts.raster.threads = 1;
    if (clip) opts.raster.radius_clip = 0.2f;
    const auto [out, stats] = render_composed(scene, cam, opts);
    const RenderOutput ref = render(flat, cam, opts.raster);
    CHECK(out.image == ref.image);
    CHECK(out.final_transmittance == ref.final_transmittance);
    CHECK(out.used_count == ref.used_count);
    CHECK(stats.mlp_culled == 0);
    CHECK(stats.instantiated == stats.frustum_passed - stats.radius_culled);
    CHECK(stats.used <= stats.instantiated);
    if (clip) CHECK(stats.radius_culled > 0);
  }
}

TEST_CASE("no MLP query inside the near distance") {
  ComposedScene scene;
  const std::size_t idx = scene.add_asset(with_random_model(make_shell(500, 1.0, 0.1, 0.99, 6), 6));
  scene.add_instance(idx, {});
  const double d_near = scene.assets[0].asset.d_near;
  const Camera inside = camera_towards(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), 0.8 * d_near, kFov60);
  const auto [out_in, stats_in] = render_composed(scene, inside);
  CHECK(stats_in.mlp_culled == 0);
  CHECK(stats_in.mlp_queries == 0);
  const Camera outside = camera_towards(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), 1.5 * d_near, kFov60);
  const auto [out_out, stats_out] = render_composed(scene, outside);
  CHECK(stats_out.mlp_queries == stats_out.frustum_passed);
  CHECK(stats_out.instantiated == stats_out.frustum_passed - stats_out.mlp_culled);
}

TEST_CASE("trained slab: the rear sheet is culled head-on") {
  const TrainedSlab& slab = trained_slab();
  ComposedScene scene;
  scene.add_instance(scene.add_asset(slab.sa), {});
  const double d = 1.5 * slab.sa.asset.d_near;
  const Camera cam = camera_towards(Eigen::Vector3d::Zero(), Eigen::Vector3d(0.02, 0.0, 1.0).normalized(), d, kFov60, 128);
  ComposedRenderOptions with_mlp;
  const auto [culled, stats] = render_composed(scene, cam, with_mlp);
  ComposedRenderOptions without = with_mlp;
  without.use_models = false;
  const auto [full, full_stats] = render_composed(scene, cam, without);

  const InstanceCull cull = cull_instance(scene.assets[0], {}, cam, with_mlp);
  std::size_t rear_kept = 0;
  for (const auto idx : cull.kept) rear_kept += idx >= static_cast<std::uint32_t>(slab.cfg.n_front);
  CHECK(rear_kept <= static_cast<std::size_t>(0.05 * slab.cfg.n_back));
  CHECK(stats.mlp_culled > 0);
  CHECK(stats.mem_bytes_instantiated < full_stats.mem_bytes_instantiated);
  const QualityPair q = compute_metrics_pair({culled.image, 128, 128, 3}, {full.image, 128, 128, 3});
  CHECK(q.psnr >= 45.0);
}

TEST_CASE("orbit statistics") {
  SUBCASE("an all-visible model changes nothing") {
    SceneAsset sa = with_random_model(make_shell(2000, 1.0, 0.06, 0.99, 8), 8);
    VisibilityModel m = *sa.model;
    m.vis_mlp.set_zero();
    m.vis_mlp.layers().back().bias[0] = 10.0f;
    sa.attach_model(std::move(m));
    OrbitOptions opts;
    opts.image_size = 64;
    const OrbitStats s = orbit_eval(sa, 8, 2.0 * sa.asset.d_near, opts);
    CHECK(s.delta_passed_pct == 0.0);
    CHECK(s.recall == 1.0);
    CHECK(s.used_ours == s.used_gt);
    CHECK(s.psnr == kPsnrCap);
  }
  SUBCASE("slab seen from above") {
    const TrainedSlab& slab = trained_slab();
    OrbitOptions opts;
    opts.image_size = 128;
    opts.elevation = 75.0 * std::numbers::pi / 180.0;
    opts.phase = 0.1;
    const OrbitStats s = orbit_eval(slab.sa, 12, 2.0 * slab.sa.asset.d_near, opts);
    CHECK(s.delta_passed_pct <= -40.0);
    CHECK(s.used_ours >= 0.98 * s.used_gt);
    CHECK(s.recall >= 0.98);
  }
}

TEST_CASE("scene and camera files") {
  test::TempDir dir("scene_io");
  const Asset shell = make_shell(300, 1.0, 0.1, 0.99, 1);
  SlabConfig sc;
  sc.n_front = sc.n_back = 100;
  const Asset slab = make_slab_pair(sc);
  save_ply(shell, dir / "shell.ply");
  save_ply(slab, dir / "slab.ply");
  auto model = make_visibility_model({32, 32}, {32, 32}, 1);
  model.norm = {shell.bound_radius, shell.d_near, shell.d_far, 0.866};
  model.asset_hash = asset_hash(load_ply(dir / "shell.ply"));
  save_model(model, dir / "shell.vismlp");
  {
    std::ofstream out(dir / "scene.json");
    out << R"({
      "assets": [{"id": "shell", "ply": "shell.ply", "vismlp": "shell.vismlp"},
                 {"id": "slab", "ply": "slab.ply"}],
      "instances": [{"asset_id": "shell", "translation": [0, 0, 0], "rotation_quat": [1, 0, 0, 0], "scale": 1},
                    {"asset_id": "slab", "translation": [3, 0, 0], "rotation_quat": [0.7071068, 0.7071068, 0, 0], "scale": 2},
                    {"asset_id": "shell", "translation": [-3, 1, 0]}],
      "camera": {"position": [0, -12, 3], "target": [0, 0, 0], "fov_deg": 50, "width": 80, "height": 60}
    })";
  }
  const SceneFile file = load_scene(dir / "scene.json");
  REQUIRE(file.scene.assets.size() == 2);
  CHECK(file.scene.instances[0].size() == 2);
  CHECK(file.scene.instances[1].size() == 1);
  CHECK(file.scene.assets[0].model.has_value());
  CHECK_FALSE(file.scene.assets[1].model.has_value());
  CHECK(file.scene.instances[1][0].scale == 2.0);
  REQUIRE(file.camera);
  CHECK(file.camera->width == 80);
  CHECK(file.camera->height == 60);
  CHECK(file.camera->fov_y == doctest::Approx(50.0 * std::numbers::pi / 180.0));

  {
    std::ofstream out(dir / "cam.json");
    out << R"({"position": [1, 2, 3], "rotation": [[1, 0, 0], [0, -1, 0], [0, 0, -1]], "width": 32})";
  }
  const Camera cam = load_camera(dir / "cam.json");
  CHECK(cam.width == 32);
  CHECK(cam.height == 32);
  CHECK(cam.forward().z() == -1.0);

  {
    std::ofstream out(dir / "bad.json");
    out << R"({"assets": [{"id": "a", "ply": "shell.ply"}], "instances": [{"asset_id": "b"}]})";
  }
  CHECK_THROWS_WITH(load_scene(dir / "bad.json"), doctest::Contains("unknown asset 'b'"));
  {
    std::ofstream out(dir / "bad_cam.json");
    out << R"({"position": [1, 2]})";
  }
  CHECK_THROWS(load_camera(dir / "bad_cam.json"));
}
