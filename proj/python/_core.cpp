#include "splatcull/dataset.hpp"
#include "splatcull/image_metrics.hpp"
#include "splatcull/metrics.hpp"
#include "splatcull/raster.hpp"
#include "splatcull/scene.hpp"
#include "splatcull/synth.hpp"
#include "splatcull/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace splatcull;

namespace {

py::array_t<float> image_array(const std::vector<float>& data, int height, int width, int channels) {
  std::vector<py::ssize_t> shape{height, width};
  if (channels > 1) shape.push_back(channels);
  py::array_t<float> out(shape);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

ImageView view_of(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected an H x W x C float array");
  return {std::span<const float>(a.data(), static_cast<std::size_t>(a.size())), static_cast<int>(a.shape(1)),
          static_cast<int>(a.shape(0)), static_cast<int>(a.shape(2))};
}

/// Per-Gaussian parameters as N x k float arrays.
py::dict asset_arrays(const Asset& asset) {
  const auto n = static_cast<py::ssize_t>(asset.size());
  py::array_t<float> means({n, py::ssize_t{3}}), log_scales({n, py::ssize_t{3}}), rotations({n, py::ssize_t{4}}),
      opacity({n});
  auto m = means.mutable_unchecked<2>();
  auto s = log_scales.mutable_unchecked<2>();
  auto r = rotations.mutable_unchecked<2>();
  auto o = opacity.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const Gaussian& g = asset.gaussians[static_cast<std::size_t>(i)];
    for (int k = 0; k < 3; ++k) {
      m(i, k) = g.mean[k];
      s(i, k) = g.log_scale[k];
    }
    for (int k = 0; k < 4; ++k) r(i, k) = g.rotation[k];
    o(i) = g.opacity();
  }
  py::dict d;
  d["means"] = means;
  d["log_scales"] = log_scales;
  d["rotations"] = rotations;
  d["opacity"] = opacity;
  return d;
}

py::dict stats_dict(const FrameStats& s) {
  py::dict d;
  d["frustum_passed"] = s.frustum_passed;
  d["mlp_culled"] = s.mlp_culled;
  d["radius_culled"] = s.radius_culled;
  d["instantiated"] = s.instantiated;
  d["used"] = s.used;
  d["mem_bytes_instantiated"] = s.mem_bytes_instantiated;
  d["mlp_queries"] = s.mlp_queries;
  d["preprocess_ms"] = s.preprocess_ms;
  d["mlp_ms"] = s.mlp_ms;
  d["render_ms"] = s.render_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian splat rasterizer with learned per-instance occlusion culling.";

  py::register_exception<AssetError>(m, "AssetError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<Asset>(m, "Asset")
      .def("__len__", &Asset::size)
      .def_readonly("bbox_min", &Asset::bbox_min)
      .def_readonly("bbox_max", &Asset::bbox_max)
      .def_readonly("bound_radius", &Asset::bound_radius)
      .def_readonly("center_offset", &Asset::center_offset)
      .def_readonly("d_near", &Asset::d_near)
      .def_readonly("d_far", &Asset::d_far)
      .def_readonly("sh_degree", &Asset::sh_degree)
      .def("arrays", &asset_arrays, "Means, log scales, rotations and opacities as numpy arrays.")
      .def("hash", [](const Asset& a) { return asset_hash(a); })
      .def("__repr__", [](const Asset& a) {
        return "<Asset n=" + std::to_string(a.size()) + " sh_degree=" + std::to_string(a.sh_degree) + ">";
      });

  m.def("load_ply", &load_ply, py::arg("path"));
  m.def("save_ply", &save_ply, py::arg("asset"), py::arg("path"));
  m.def("prune", &prune, py::arg("asset"), py::arg("threshold") = kDefaultPruneThreshold);
  m.def("recenter", &recenter, py::arg("asset"));
  m.def("with_sampling_distances", &with_sampling_distances, py::arg("asset"), py::arg("fov"),
        py::arg("p_near") = 0.9, py::arg("p_far") = 0.05);
  m.def("make_shell", &make_shell, py::arg("n"), py::arg("radius") = 1.0, py::arg("thickness") = 0.04,
        py::arg("alpha") = 0.99, py::arg("seed") = 1);
  m.def(
      "make_slab_pair",
      [](int n_front, int n_back, double gap, double alpha_front, std::uint64_t seed) {
        SlabConfig cfg;
        cfg.n_front = n_front;
        cfg.n_back = n_back;
        cfg.gap = gap;
        cfg.alpha_front = alpha_front;
        cfg.seed = seed;
        return make_slab_pair(cfg);
      },
      py::arg("n_front") = 4096, py::arg("n_back") = 4096, py::arg("gap") = 0.5, py::arg("alpha_front") = 0.99,
      py::arg("seed") = 1);

  py::class_<Camera>(m, "Camera")
      .def_static("look_at", &Camera::look_at, py::arg("position"), py::arg("target"), py::arg("up"), py::arg("fov_y"),
                  py::arg("width"), py::arg("height"), py::arg("near_clip") = 0.01, py::arg("far_clip") = 1000.0)
      .def_readwrite("position", &Camera::position)
      .def_readwrite("rotation", &Camera::rotation)
      .def_readwrite("fov_y", &Camera::fov_y)
      .def_readwrite("width", &Camera::width)
      .def_readwrite("height", &Camera::height)
      .def("focal", &Camera::focal)
      .def("focal_normalized", &Camera::focal_normalized)
      .def("project", &Camera::project);

  py::class_<RenderOutput>(m, "RenderOutput")
      .def_property_readonly("image",
                             [](const RenderOutput& r) { return image_array(r.image, r.height, r.width, 3); })
      .def_property_readonly("transmittance",
                             [](const RenderOutput& r) {
                               return image_array(r.final_transmittance, r.height, r.width, 1);
                             })
      .def_property_readonly("contribution_max",
                             [](const RenderOutput& r) {
                               return py::array_t<float>(static_cast<py::ssize_t>(r.contribution_max.size()),
                                                         r.contribution_max.data());
                             })
      .def_readonly("used_count", &RenderOutput::used_count)
      .def_readonly("passed_count", &RenderOutput::passed_count);

  m.def(
      "render",
      [](const Asset& asset, const Camera& cam, bool record_contributions, std::optional<float> radius_clip,
         int sh_degree, int threads) {
        RenderOptions opts;
        opts.record_contributions = record_contributions;
        opts.radius_clip = radius_clip;
        opts.sh_degree_eval = sh_degree;
        opts.threads = threads;
        py::gil_scoped_release release;
        return render(asset.gaussians, cam, opts);
      },
      py::arg("asset"), py::arg("camera"), py::arg("record_contributions") = false, py::arg("radius_clip") = py::none(),
      py::arg("sh_degree") = 0, py::arg("threads") = 0);

  m.def("psnr", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                   const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
    return psnr(view_of(a), view_of(b));
  });
  m.def("ssim", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                   const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
    return ssim(view_of(a), view_of(b));
  });

  py::enum_<SamplerKind>(m, "SamplerKind")
      .value("fibonacci", SamplerKind::fibonacci)
      .value("longlat", SamplerKind::longlat);

  py::class_<SamplingConfig>(m, "SamplingConfig")
      .def(py::init<>())
      .def_readwrite("n_directions", &SamplingConfig::n_directions)
      .def_readwrite("n_distances", &SamplingConfig::n_distances)
      .def_readwrite("fov", &SamplingConfig::fov)
      .def_readwrite("image_size", &SamplingConfig::image_size)
      .def_readwrite("n_aux_views", &SamplingConfig::n_aux_views)
      .def_readwrite("aux_cone_half_angle", &SamplingConfig::aux_cone_half_angle)
      .def_readwrite("offset_enabled", &SamplingConfig::offset_enabled)
      .def_readwrite("sampler_kind", &SamplingConfig::sampler_kind)
      .def_readwrite("seed", &SamplingConfig::seed);

  py::class_<VisibilityDataset>(m, "VisibilityDataset")
      .def_property_readonly("n_views", [](const VisibilityDataset& d) { return d.views.size(); })
      .def_readonly("n_gaussians", &VisibilityDataset::n_gaussians)
      .def("positive_count", &VisibilityDataset::positive_count)
      .def("labels", [](const VisibilityDataset& d, std::size_t view) {
        const BitVector& bits = d.labels.at(view);
        py::array_t<bool> out(static_cast<py::ssize_t>(bits.size()));
        auto o = out.mutable_unchecked<1>();
        for (std::size_t i = 0; i < bits.size(); ++i) o(static_cast<py::ssize_t>(i)) = bits.test(i);
        return out;
      });

  m.def(
      "extract_dataset",
      [](const Asset& asset, const SamplingConfig& cfg, int threads) {
        py::gil_scoped_release release;
        return extract_dataset(asset, cfg, threads);
      },
      py::arg("asset"), py::arg("config") = SamplingConfig{}, py::arg("threads") = 0);
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr_init", &TrainConfig::lr_init)
      .def_readwrite("lr_final", &TrainConfig::lr_final)
      .def_readwrite("warmup_frac", &TrainConfig::warmup_frac)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("pos_weight", &TrainConfig::pos_weight)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("threshold", &TrainConfig::threshold);

  m.def("learning_rate", &learning_rate, py::arg("config"), py::arg("iteration"));

  py::class_<VisibilityModel>(m, "VisibilityModel")
      .def_readwrite("threshold", &VisibilityModel::threshold)
      .def_readonly("final_loss", &VisibilityModel::final_loss)
      .def_readonly("asset_hash", &VisibilityModel::asset_hash)
      .def("serialized_size", &VisibilityModel::serialized_size);

  m.def(
      "train",
      [](const VisibilityDataset& data, const Asset& asset, const TrainConfig& cfg) {
        py::gil_scoped_release release;
        return train(data, asset, cfg);
      },
      py::arg("dataset"), py::arg("asset"), py::arg("config") = TrainConfig{});
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def(
      "grad_check",
      [](std::uint64_t seed, std::size_t batch) {
        return grad_check(make_visibility_model({32, 32}, {32, 32}, seed), random_batch(batch, seed));
      },
      py::arg("seed") = 1, py::arg("batch") = 16);

  m.def("corrected_distance", &corrected_distance, py::arg("render_distance"), py::arg("focal_train"),
        py::arg("focal_render"), py::arg("scale"));

  py::class_<ComposedScene>(m, "ComposedScene")
      .def_property_readonly("instance_count", &ComposedScene::instance_count)
      .def_property_readonly("asset_ids", [](const ComposedScene& s) {
        std::vector<std::string> ids;
        for (const auto& a : s.assets) ids.push_back(a.id);
        return ids;
      });

  m.def(
      "load_scene",
      [](const std::filesystem::path& path) {
        SceneFile f = load_scene(path);
        return py::make_tuple(std::move(f.scene), f.camera);
      },
      py::arg("path"), "Returns (scene, camera or None).");
  m.def("load_camera", &load_camera, py::arg("path"));

  m.def(
      "render_scene",
      [](const ComposedScene& scene, const Camera& cam, bool use_models, std::optional<float> radius_clip,
         int threads) {
        ComposedRenderOptions opts;
        opts.use_models = use_models;
        opts.raster.radius_clip = radius_clip;
        opts.raster.threads = threads;
        std::pair<RenderOutput, FrameStats> result;
        {
          py::gil_scoped_release release;
          result = render_composed(scene, cam, opts);
        }
        return py::make_tuple(std::move(result.first), stats_dict(result.second));
      },
      py::arg("scene"), py::arg("camera"), py::arg("use_models") = true, py::arg("radius_clip") = py::none(),
      py::arg("threads") = 0, "Returns (RenderOutput, stats dict).");

  m.def(
      "orbit_eval",
      [](const Asset& asset, const VisibilityModel& model, int views, double distance, double elevation,
         int image_size) {
        SceneAsset sa;
        sa.id = "asset";
        sa.asset = asset;
        sa.attach_model(model);
        OrbitOptions opts;
        opts.elevation = elevation;
        opts.image_size = image_size;
        OrbitStats s;
        {
          py::gil_scoped_release release;
          s = orbit_eval(sa, views, distance, opts);
        }
        py::dict d;
        d["views"] = s.views;
        d["passed_gt"] = s.passed_gt;
        d["passed_ours"] = s.passed_ours;
        d["used_gt"] = s.used_gt;
        d["used_ours"] = s.used_ours;
        d["delta_passed_pct"] = s.delta_passed_pct;
        d["recall"] = s.recall;
        d["psnr"] = s.psnr;
        d["ssim"] = s.ssim;
        return d;
      },
      py::arg("asset"), py::arg("model"), py::arg("views"), py::arg("distance"), py::arg("elevation") = 0.0,
      py::arg("image_size") = 256);
}
