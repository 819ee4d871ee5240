// splatcull command line: prep, synth, extract, train, gradcheck, render, bench, orbit-stats.

#include "splatcull/asset.hpp"
#include "splatcull/dataset.hpp"
#include "splatcull/metrics.hpp"
#include "splatcull/parallel.hpp"
#include "splatcull/sampling.hpp"
#include "splatcull/scene.hpp"
#include "splatcull/synth.hpp"
#include "splatcull/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

namespace sc = splatcull;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Globals {
  std::uint64_t seed = 1;
  int threads = 0;
};

void print_line(const json& j) { std::cout << j.dump() << std::endl; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json stats_json(const sc::FrameStats& s) {
  return {{"frustum_passed", s.frustum_passed}, {"mlp_culled", s.mlp_culled},
          {"radius_culled", s.radius_culled},   {"instantiated", s.instantiated},
          {"used", s.used},                     {"mem_bytes", s.mem_bytes_instantiated},
          {"preprocess_ms", s.preprocess_ms},   {"mlp_ms", s.mlp_ms},
          {"render_ms", s.render_ms}};
}

// ---------------------------------------------------------------- prep

struct PrepArgs {
  std::string in, out;
  double prune = sc::kDefaultPruneThreshold;
  double fov_deg = 60.0, p_near = 0.9, p_far = 0.05;
};

void add_prep(CLI::App& app, PrepArgs& a) {
  auto* cmd = app.add_subcommand("prep", "Prune, recenter and attach sampling distances to a 3DGS PLY");
  cmd->add_option("--in", a.in, "Input PLY")->required();
  cmd->add_option("--out", a.out, "Output PLY")->required();
  cmd->add_option("--prune", a.prune, "Opacity prune threshold")->capture_default_str();
  cmd->add_option("--fov", a.fov_deg, "Vertical field of view in degrees")->capture_default_str();
  cmd->add_option("--p-near", a.p_near, "Screen fraction at the near distance")->capture_default_str();
  cmd->add_option("--p-far", a.p_far, "Screen fraction at the far distance")->capture_default_str();
}

void run_prep(const PrepArgs& a) {
  sc::Asset asset = sc::load_ply(a.in);
  const std::size_t before = asset.size();
  asset = sc::recenter(sc::prune(std::move(asset), a.prune));
  asset = sc::with_sampling_distances(std::move(asset), a.fov_deg * kDeg, a.p_near, a.p_far);
  sc::save_ply(asset, a.out);
  print_line({{"command", "prep"},
              {"gaussians_in", before},
              {"gaussians_out", asset.size()},
              {"bound_radius", asset.bound_radius},
              {"d_near", asset.d_near},
              {"d_far", asset.d_far},
              {"sh_degree", asset.sh_degree}});
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string kind, out;
  int n = 20000;
  double radius = 1.0, thickness = 0.04, alpha = 0.99;
  sc::SlabConfig slab;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic asset (shell or slab)");
  cmd->add_option("kind", a.kind, "shell | slab")->required()->check(CLI::IsMember({"shell", "slab"}));
  cmd->add_option("--out", a.out, "Output PLY")->required();
  cmd->add_option("--n", a.n, "Shell: number of Gaussians")->capture_default_str();
  cmd->add_option("--radius", a.radius, "Shell radius")->capture_default_str();
  cmd->add_option("--thickness", a.thickness, "Shell Gaussian std-dev")->capture_default_str();
  cmd->add_option("--alpha", a.alpha, "Shell opacity")->capture_default_str();
  cmd->add_option("--n-front", a.slab.n_front)->capture_default_str();
  cmd->add_option("--n-back", a.slab.n_back)->capture_default_str();
  cmd->add_option("--gap", a.slab.gap)->capture_default_str();
  cmd->add_option("--alpha-front", a.slab.alpha_front)->capture_default_str();
  cmd->add_option("--alpha-back", a.slab.alpha_back)->capture_default_str();
}

void run_synth(SynthArgs a, const Globals& g) {
  sc::Asset asset;
  if (a.kind == "shell") {
    asset = sc::make_shell(a.n, a.radius, a.thickness, a.alpha, g.seed);
  } else {
    a.slab.seed = g.seed;
    asset = sc::make_slab_pair(a.slab);
  }
  sc::save_ply(asset, a.out);
  print_line({{"command", "synth"},
              {"kind", a.kind},
              {"gaussians", asset.size()},
              {"bound_radius", asset.bound_radius},
              {"d_near", asset.d_near},
              {"d_far", asset.d_far}});
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string asset, out, sampler = "fibonacci";
  sc::SamplingConfig cfg;
  double fov_deg = 60.0, aux_angle_deg = 3.0;
  bool no_offset = false;
  std::optional<double> offset_ratio;
};

void add_extract(CLI::App& app, ExtractArgs& a) {
  auto* cmd = app.add_subcommand("extract", "Render sampled views and record per-Gaussian visibility labels");
  cmd->add_option("--asset", a.asset, "Prepared asset PLY")->required();
  cmd->add_option("--out", a.out, "Output .visdata")->required();
  cmd->add_option("--dirs", a.cfg.n_directions, "Number of view directions")->capture_default_str();
  cmd->add_option("--dists", a.cfg.n_distances, "Distances per direction")->capture_default_str();
  cmd->add_option("--aux", a.cfg.n_aux_views, "Auxiliary views per camera")->capture_default_str();
  cmd->add_option("--aux-angle", a.aux_angle_deg, "Auxiliary cone half-angle in degrees")->capture_default_str();
  cmd->add_option("--fov", a.fov_deg, "Field of view in degrees")->capture_default_str();
  cmd->add_option("--size", a.cfg.image_size, "Label render resolution")->capture_default_str();
  cmd->add_option("--sampler", a.sampler, "fibonacci | longlat")
      ->check(CLI::IsMember({"fibonacci", "longlat"}))
      ->capture_default_str();
  cmd->add_flag("--no-offset", a.no_offset, "Disable random target offsets");
  cmd->add_option("--offset-ratio", a.offset_ratio, "Override the offset ratio");
}

void run_extract(ExtractArgs a, const Globals& g) {
  const sc::Asset asset = sc::load_ply(a.asset);
  a.cfg.fov = a.fov_deg * kDeg;
  a.cfg.aux_cone_half_angle = a.aux_angle_deg * kDeg;
  a.cfg.offset_enabled = !a.no_offset;
  a.cfg.offset_scale_ratio = a.offset_ratio;
  a.cfg.sampler_kind = a.sampler == "longlat" ? sc::SamplerKind::longlat : sc::SamplerKind::fibonacci;
  a.cfg.seed = g.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const sc::VisibilityDataset data = sc::extract_dataset(asset, a.cfg, g.threads);
  sc::save_dataset(data, a.out);
  const double positives = static_cast<double>(data.positive_count());
  print_line({{"command", "extract"},
              {"views", data.views.size()},
              {"gaussians", data.n_gaussians},
              {"visible_fraction", positives / (static_cast<double>(data.views.size()) * data.n_gaussians)},
              {"seconds", seconds_since(t0)}});
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, asset, out;
  sc::TrainConfig cfg;
  int log_every = 0;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train the visibility MLP on an extracted dataset");
  cmd->add_option("--data", a.data, "Input .visdata")->required();
  cmd->add_option("--asset", a.asset, "Asset PLY the data was extracted from")->required();
  cmd->add_option("--out", a.out, "Output .vismlp")->required();
  cmd->add_option("--iters", a.cfg.iterations)->capture_default_str();
  cmd->add_option("--batch", a.cfg.batch_size)->capture_default_str();
  cmd->add_option("--lr-init", a.cfg.lr_init)->capture_default_str();
  cmd->add_option("--lr-final", a.cfg.lr_final)->capture_default_str();
  cmd->add_option("--warmup", a.cfg.warmup_frac, "Warm-up fraction of iterations")->capture_default_str();
  cmd->add_option("--pos-weight", a.cfg.pos_weight)->capture_default_str();
  cmd->add_option("--threshold", a.cfg.threshold, "Decision threshold on sigmoid output")->capture_default_str();
  cmd->add_option("--log-every", a.log_every, "Print loss every N iterations (0 = off)");
}

void run_train(TrainArgs a, const Globals& g) {
  const sc::Asset asset = sc::load_ply(a.asset);
  const sc::VisibilityDataset data = sc::load_dataset(a.data);
  a.cfg.seed = g.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const sc::VisibilityModel model = sc::train(data, asset, a.cfg, [&](int it, double lr, double loss) {
    if (a.log_every > 0 && (it % a.log_every == 0 || it + 1 == a.cfg.iterations)) {
      std::cerr << json{{"iteration", it}, {"lr", lr}, {"loss", loss}}.dump() << '\n';
    }
  });
  sc::save_model(model, a.out);
  print_line({{"command", "train"},
              {"iterations", a.cfg.iterations},
              {"final_loss", model.final_loss},
              {"checkpoint_bytes", model.serialized_size()},
              {"seconds", seconds_since(t0)}});
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  int batch = 16;
  int seeds = 10;
};

void add_gradcheck(CLI::App& app, GradcheckArgs& a) {
  auto* cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients in f64");
  cmd->add_option("--batch", a.batch)->capture_default_str()->check(CLI::Range(1, 64));
  cmd->add_option("--seeds", a.seeds)->capture_default_str()->check(CLI::PositiveNumber);
}

int run_gradcheck(const GradcheckArgs& a, const Globals& g) {
  const sc::TrainConfig defaults;
  double worst = 0.0;
  for (int s = 0; s < a.seeds; ++s) {
    const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(s);
    const auto model = sc::make_visibility_model(defaults.feature_hidden, defaults.vis_hidden, seed);
    worst = std::max(worst, sc::grad_check(model, sc::random_batch(static_cast<std::size_t>(a.batch), seed)));
  }
  const bool ok = worst < 1e-4;
  print_line({{"command", "gradcheck"}, {"max_rel_error", worst}, {"seeds", a.seeds}, {"ok", ok}});
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string scene, camera, out, contributions;
  bool no_mlp = false;
  std::optional<float> radius_clip;
  std::optional<int> width, height;
};

void add_render(CLI::App& app, RenderArgs& a) {
  auto* cmd = app.add_subcommand("render", "Render a composed scene with occlusion culling");
  cmd->add_option("--scene", a.scene, "Scene layout JSON")->required();
  cmd->add_option("--camera", a.camera, "Camera JSON (defaults to the scene's camera)");
  cmd->add_option("--out", a.out, "Output PNG")->required();
  cmd->add_flag("--no-mlp", a.no_mlp, "Disable MLP gating");
  cmd->add_option("--radius-clip", a.radius_clip, "Drop splats whose 2D covariance determinant is below this");
  cmd->add_option("--width", a.width);
  cmd->add_option("--height", a.height);
  cmd->add_option("--contributions", a.contributions, "Also write per-Gaussian max contributions");
}

void run_render(const RenderArgs& a, const Globals& g) {
  const sc::SceneFile file = sc::load_scene(a.scene);
  sc::Camera cam;
  if (!a.camera.empty()) {
    cam = sc::load_camera(a.camera);
  } else if (file.camera) {
    cam = *file.camera;
  } else {
    throw std::runtime_error("no camera: pass --camera or add one to the scene file");
  }
  if (a.width) cam.width = *a.width;
  if (a.height) cam.height = *a.height;
  sc::ComposedRenderOptions opts;
  opts.use_models = !a.no_mlp;
  opts.raster.radius_clip = a.radius_clip;
  opts.raster.threads = g.threads;
  opts.raster.record_contributions = !a.contributions.empty();
  const auto [out, stats] = sc::render_composed(file.scene, cam, opts);
  sc::write_png(a.out, out.image, out.width, out.height);
  if (!a.contributions.empty()) sc::write_contributions(a.contributions, out.contribution_max);
  json j = stats_json(stats);
  j["command"] = "render";
  j["out"] = a.out;
  print_line(j);
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string scene, asset, model, csv, summary;
  int steps = 16, size = 256;
  std::optional<double> d_min, d_max;
  std::vector<double> direction{1.0, 0.0, 0.0};
  float radius_clip = 3e-5f;
  double fov_deg = 60.0;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  auto* cmd = app.add_subcommand("bench", "Distance sweep over the full, no_mlp, mlp and mlp+radius_clip variants");
  auto* scene = cmd->add_option("--scene", a.scene, "Scene layout JSON");
  auto* asset = cmd->add_option("--asset", a.asset, "Single asset PLY (instead of --scene)");
  scene->excludes(asset);
  cmd->add_option("--model", a.model, "Visibility model for --asset")->needs(asset);
  cmd->add_option("--steps", a.steps)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--d-min", a.d_min, "Nearest distance (default: asset d_near)");
  cmd->add_option("--d-max", a.d_max, "Farthest distance (default: asset d_far)");
  cmd->add_option("--direction", a.direction, "Camera direction from the target")->expected(3);
  cmd->add_option("--size", a.size, "Image width and height")->capture_default_str();
  cmd->add_option("--fov", a.fov_deg)->capture_default_str();
  cmd->add_option("--radius-clip", a.radius_clip)->capture_default_str();
  cmd->add_option("--csv", a.csv, "Write per-row CSV here");
  cmd->add_option("--summary", a.summary, "Write the per-variant summary table here");
}

void run_bench(const BenchArgs& a, const Globals& g) {
  sc::ComposedScene scene;
  if (!a.scene.empty()) {
    scene = sc::load_scene(a.scene).scene;
  } else if (!a.asset.empty()) {
    sc::SceneAsset sa;
    sa.id = "asset";
    sa.asset = sc::load_ply(a.asset);
    if (!a.model.empty()) sa.attach_model(sc::load_model(a.model));
    scene.add_instance(scene.add_asset(std::move(sa)), {});
  } else {
    throw std::runtime_error("bench needs --scene or --asset");
  }
  if (scene.assets.empty()) throw std::runtime_error("scene has no assets");

  const sc::Asset& first = scene.assets.front().asset;
  sc::Trajectory traj;
  traj.n_steps = a.steps;
  traj.d_min = a.d_min.value_or(first.d_near);
  traj.d_max = a.d_max.value_or(first.d_far);
  traj.direction = Eigen::Vector3d(a.direction[0], a.direction[1], a.direction[2]);
  traj.width = traj.height = a.size;
  traj.fov = a.fov_deg * kDeg;
  sc::SweepOptions opts;
  opts.radius_clip = a.radius_clip;
  opts.raster.threads = g.threads;

  const sc::SweepResult result = sc::distance_sweep(scene, traj, opts);
  if (!a.csv.empty()) sc::emit_csv(result, a.csv);
  if (!a.summary.empty()) sc::emit_summary(result, a.summary);
  json variants = json::object();
  for (const auto& s : sc::summarize(result)) {
    variants[std::string(sc::variant_name(s.variant))] = {{"psnr", s.psnr},
                                                          {"ssim", s.ssim},
                                                          {"instantiated", s.instantiated},
                                                          {"used", s.used},
                                                          {"mem_bytes", s.mem_bytes},
                                                          {"frame_ms", s.frame_ms}};
  }
  print_line({{"command", "bench"}, {"rows", result.rows.size()}, {"variants", variants}});
}

// ---------------------------------------------------------------- orbit-stats

struct OrbitArgs {
  std::string asset, model;
  int views = 64, size = 256;
  std::optional<double> distance;
  double elevation_deg = 20.0, fov_deg = 60.0, phase_deg = 0.0;
};

void add_orbit(CLI::App& app, OrbitArgs& a) {
  auto* cmd = app.add_subcommand("orbit-stats", "Passed/used counts of ground truth vs MLP gating on an orbit");
  cmd->add_option("--asset", a.asset)->required();
  cmd->add_option("--model", a.model)->required();
  cmd->add_option("--views", a.views)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--distance", a.distance, "Orbit radius (default: twice d_near)");
  cmd->add_option("--elevation", a.elevation_deg, "Degrees above the xy plane")->capture_default_str();
  cmd->add_option("--phase", a.phase_deg, "Azimuth of the first view in degrees")->capture_default_str();
  cmd->add_option("--size", a.size)->capture_default_str();
  cmd->add_option("--fov", a.fov_deg)->capture_default_str();
}

void run_orbit(const OrbitArgs& a, const Globals& g) {
  sc::SceneAsset sa;
  sa.asset = sc::load_ply(a.asset);
  sa.attach_model(sc::load_model(a.model));
  sc::OrbitOptions opts;
  opts.elevation = a.elevation_deg * kDeg;
  opts.phase = a.phase_deg * kDeg;
  opts.fov = a.fov_deg * kDeg;
  opts.image_size = a.size;
  opts.raster.threads = g.threads;
  const double distance = a.distance.value_or(2.0 * sa.asset.d_near);
  const sc::OrbitStats s = sc::orbit_eval(sa, a.views, distance, opts);
  print_line({{"command", "orbit-stats"},
              {"views", s.views},
              {"distance", distance},
              {"passed_gt", s.passed_gt},
              {"used_gt", s.used_gt},
              {"passed_ours", s.passed_ours},
              {"used_ours", s.used_ours},
              {"delta_passed_pct", s.delta_passed_pct},
              {"recall", s.recall},
              {"min_recall", s.min_recall},
              {"psnr", s.psnr},
              {"ssim", s.ssim}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splatcull: neural occlusion culling for instanced Gaussian splats"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with defaults; sections are named after subcommands");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();

  PrepArgs prep;
  SynthArgs synth;
  ExtractArgs extract;
  TrainArgs train;
  GradcheckArgs gradcheck;
  RenderArgs render;
  BenchArgs bench;
  OrbitArgs orbit;
  add_prep(app, prep);
  add_synth(app, synth);
  add_extract(app, extract);
  add_train(app, train);
  add_gradcheck(app, gradcheck);
  add_render(app, render);
  add_bench(app, bench);
  add_orbit(app, orbit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n' << app.help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    sc::set_default_threads(g.threads);
    if (name == "prep") run_prep(prep);
    else if (name == "synth") run_synth(synth, g);
    else if (name == "extract") run_extract(extract, g);
    else if (name == "train") run_train(train, g);
    else if (name == "gradcheck") return run_gradcheck(gradcheck, g);
    else if (name == "render") run_render(render, g);
    else if (name == "bench") run_bench(bench, g);
    else if (name == "orbit-stats") run_orbit(orbit, g);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"command", name}}.dump() << '\n';
    return 1;
  }
  return 0;
}
