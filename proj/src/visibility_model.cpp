#include "splatcull/visibility_model.hpp"

#include "binary_io.hpp"
#include "splatcull/parallel.hpp"

#include <cmath>

namespace splatcull {
namespace {

constexpr char kMagic[5] = "SCVM";
constexpr std::uint32_t kVersion = 1;
constexpr Eigen::Index kInferenceChunk = 4096;
constexpr float kShC0 = 0.28209479177387814f;

void write_mlp(detail::BinaryWriter& w, const Mlp& mlp) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mlp.widths().size()));
  for (int width : mlp.widths()) w.put<std::int32_t>(width);
  for (const auto& layer : mlp.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.put<float>(layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.put<float>(layer.bias[r]);
  }
}

Mlp read_mlp(detail::BinaryReader& r) {
  const auto n = r.get<std::uint32_t>();
  if (n < 2 || n > 64) throw std::runtime_error("bad layer count in visibility model");
  std::vector<int> widths(n);
  for (auto& w : widths) {
    w = r.get<std::int32_t>();
    if (w < 1 || w > 65536) throw std::runtime_error("bad layer width in visibility model");
  }
  Mlp mlp(widths);
  for (auto& layer : mlp.layers()) {
    for (Eigen::Index row = 0; row < layer.weight.rows(); ++row)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(row, c) = r.get<float>();
    for (Eigen::Index row = 0; row < layer.bias.size(); ++row) layer.bias[row] = r.get<float>();
  }
  return mlp;
}

std::size_t mlp_bytes(const Mlp& mlp) { return 4 + 4 * mlp.widths().size() + 4 * mlp.parameter_count(); }

}  // namespace

std::size_t VisibilityModel::serialized_size() const {
  return 4 + 4 + 8 + 4 * 8 + 4 + 4 + mlp_bytes(feature_mlp) + mlp_bytes(vis_mlp);
}

VisibilityModel make_visibility_model(const std::vector<int>& feature_hidden, const std::vector<int>& vis_hidden,
                                      std::uint64_t seed) {
  std::vector<int> fw{kFeatureInputs};
  fw.insert(fw.end(), feature_hidden.begin(), feature_hidden.end());
  fw.push_back(kFeatureDim);
  std::vector<int> vw{kVisInputs};
  vw.insert(vw.end(), vis_hidden.begin(), vis_hidden.end());
  vw.push_back(1);

  VisibilityModel model;
  model.feature_mlp = Mlp::he_uniform(fw, seed * 2 + 1);
  model.vis_mlp = Mlp::he_uniform(vw, seed * 2 + 2);
  return model;
}

double normalized_distance(double distance, double d_near, double d_far) {
  return std::clamp(2.0 * (distance - d_near) / (d_far - d_near) - 1.0, -1.0, 1.0);
}

Eigen::MatrixXf feature_inputs(const Asset& asset, double mean_scale) {
  const float inv = static_cast<float>(1.0 / mean_scale);
  Eigen::MatrixXf out(kFeatureInputs, static_cast<Eigen::Index>(asset.size()));
  for (std::size_t i = 0; i < asset.size(); ++i) {
    const Gaussian& g = asset.gaussians[i];
    auto col = out.col(static_cast<Eigen::Index>(i));
    col.segment<3>(0) = g.mean * inv;
    col.segment<3>(3) = g.log_scale.array().exp().matrix() * inv;
    col.segment<4>(6) = g.rotation.normalized();
    col[10] = g.opacity();
    col.segment<3>(11) = (kShC0 * g.sh[0].array() + 0.5f).matrix();
  }
  return out;
}

Eigen::MatrixXf encode_features(const VisibilityModel& model, const Asset& asset) {
  if (model.asset_hash != asset_hash(asset)) {
    throw std::runtime_error("visibility model was trained on a different asset (hash mismatch)");
  }
  return model.feature_mlp.forward(feature_inputs(asset, model.norm.mean_scale));
}

Eigen::MatrixXf predict_logits(const VisibilityModel& model, const Eigen::MatrixXf& inputs, int threads) {
  if (inputs.rows() != kVisInputs) throw std::invalid_argument("visibility MLP expects 16 inputs");
  Eigen::MatrixXf out(1, inputs.cols());
  const Eigen::Index chunks = (inputs.cols() + kInferenceChunk - 1) / kInferenceChunk;
  parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kInferenceChunk;
    const Eigen::Index count = std::min(kInferenceChunk, inputs.cols() - begin);
    out.middleCols(begin, count) = model.vis_mlp.forward(inputs.middleCols(begin, count));
  });
  return out;
}

float threshold_logit(float threshold) { return std::log(threshold / (1.0f - threshold)); }

void save_model(const VisibilityModel& model, const std::filesystem::path& path) {
  detail::BinaryWriter w;
  w.bytes(kMagic, 4);
  w.put(kVersion);
  w.put(model.asset_hash);
  w.put(model.norm.mean_scale);
  w.put(model.norm.d_near);
  w.put(model.norm.d_far);
  w.put(model.norm.focal_train);
  w.put(model.threshold);
  w.put(model.final_loss);
  write_mlp(w, model.feature_mlp);
  write_mlp(w, model.vis_mlp);
  w.save(path);
}

VisibilityModel load_model(const std::filesystem::path& path) {
  auto r = detail::BinaryReader::from_file(path, "visibility model");
  r.expect_magic(kMagic);
  if (r.get<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported visibility model version");
  VisibilityModel model;
  model.asset_hash = r.get<std::uint64_t>();
  model.norm.mean_scale = r.get<double>();
  model.norm.d_near = r.get<double>();
  model.norm.d_far = r.get<double>();
  model.norm.focal_train = r.get<double>();
  model.threshold = r.get<float>();
  model.final_loss = r.get<float>();
  model.feature_mlp = read_mlp(r);
  model.vis_mlp = read_mlp(r);
  if (model.feature_mlp.input_width() != kFeatureInputs || model.feature_mlp.output_width() != kFeatureDim) {
    throw std::runtime_error("feature MLP has unexpected input/output widths");
  }
  if (model.vis_mlp.input_width() != kVisInputs || model.vis_mlp.output_width() != 1) {
    throw std::runtime_error("visibility MLP must map 16 inputs to 1 logit");
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes in visibility model");
  return model;
}

}  // namespace splatcull
