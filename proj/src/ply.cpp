// Binary little-endian PLY I/O in the layout written by the reference 3DGS
// trainer: x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3.

#include "splatcull/asset.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace splatcull {
namespace {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<ScalarType> parse_type(const std::string& s) {
  static const std::unordered_map<std::string, ScalarType> table = {
      {"char", ScalarType::i8},    {"int8", ScalarType::i8},     {"uchar", ScalarType::u8},
      {"uint8", ScalarType::u8},   {"short", ScalarType::i16},   {"int16", ScalarType::i16},
      {"ushort", ScalarType::u16}, {"uint16", ScalarType::u16},  {"int", ScalarType::i32},
      {"int32", ScalarType::i32},  {"uint", ScalarType::u32},    {"uint32", ScalarType::u32},
      {"float", ScalarType::f32},  {"float32", ScalarType::f32}, {"double", ScalarType::f64},
      {"float64", ScalarType::f64}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
  }
  return 0;
}

template <typename T>
T read_raw(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

float read_as_float(const unsigned char* p, ScalarType t) {
  switch (t) {
    case ScalarType::i8: return static_cast<float>(read_raw<std::int8_t>(p));
    case ScalarType::u8: return static_cast<float>(read_raw<std::uint8_t>(p));
    case ScalarType::i16: return static_cast<float>(read_raw<std::int16_t>(p));
    case ScalarType::u16: return static_cast<float>(read_raw<std::uint16_t>(p));
    case ScalarType::i32: return static_cast<float>(read_raw<std::int32_t>(p));
    case ScalarType::u32: return static_cast<float>(read_raw<std::uint32_t>(p));
    case ScalarType::f32: return read_raw<float>(p);
    case ScalarType::f64: return static_cast<float>(read_raw<double>(p));
  }
  return 0.0f;
}

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

struct Header {
  std::size_t vertex_count = 0;
  std::size_t stride = 0;
  std::vector<Property> properties;
  std::optional<Eigen::Vector3d> center_offset;
  std::optional<std::pair<double, double>> distances;
};

constexpr const char* kCommentTag = "splatcull";

double parse_hex_double(const std::string& token, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw LoadError("malformed header: bad " + what);
  return v;
}

Header read_header(std::istream& in) {
  Header header;
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw LoadError("malformed header: missing 'ply' magic");

  bool in_vertex = false;
  bool seen_vertex = false;
  bool seen_format = false;
  for (int guard = 0;; ++guard) {
    if (guard > 100000 || !std::getline(in, line)) throw LoadError("malformed header: missing end_header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (fmt != "binary_little_endian") throw LoadError("unsupported PLY format '" + fmt + "'");
      seen_format = true;
    } else if (keyword == "comment" || keyword == "obj_info") {
      std::string tag, key;
      ss >> tag >> key;
      if (tag != kCommentTag) continue;
      if (key == "center_offset") {
        std::string a, b, c;
        ss >> a >> b >> c;
        header.center_offset = Eigen::Vector3d(parse_hex_double(a, "center_offset"),
                                               parse_hex_double(b, "center_offset"),
                                               parse_hex_double(c, "center_offset"));
      } else if (key == "distances") {
        std::string a, b;
        ss >> a >> b;
        header.distances = {parse_hex_double(a, "distances"), parse_hex_double(b, "distances")};
      }
    } else if (keyword == "element") {
      std::string name;
      long long count = -1;
      ss >> name >> count;
      if (count < 0) throw LoadError("malformed header: bad element count for '" + name + "'");
      if (name == "vertex") {
        if (seen_vertex) throw LoadError("malformed header: duplicate vertex element");
        if (!header.properties.empty() || in_vertex) throw LoadError("malformed header: vertex must be the first element");
        seen_vertex = true;
        in_vertex = true;
        header.vertex_count = static_cast<std::size_t>(count);
      } else {
        if (!seen_vertex) throw LoadError("malformed header: vertex must be the first element");
        in_vertex = false;
      }
    } else if (keyword == "property") {
      std::string type_name, name;
      ss >> type_name;
      if (!in_vertex) continue;
      if (type_name == "list") throw LoadError("malformed header: list property in vertex element");
      ss >> name;
      auto type = parse_type(type_name);
      if (!type || name.empty()) throw LoadError("malformed header: bad property line '" + line + "'");
      header.properties.push_back({name, *type, header.stride});
      header.stride += type_size(*type);
    } else if (!keyword.empty()) {
      throw LoadError("malformed header: unexpected keyword '" + keyword + "'");
    }
  }
  if (!seen_format) throw LoadError("malformed header: missing format line");
  if (!seen_vertex) throw LoadError("malformed header: missing vertex element");
  return header;
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

Asset load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  const Header header = read_header(in);

  std::unordered_map<std::string, const Property*> by_name;
  for (const auto& p : header.properties) by_name.emplace(p.name, &p);
  auto require = [&](const std::string& name) -> const Property& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw LoadError("missing property " + name);
    return *it->second;
  };

  std::vector<const Property*> mean, dc, scale, rot;
  for (const char* n : {"x", "y", "z"}) mean.push_back(&require(n));
  for (int i = 0; i < 3; ++i) dc.push_back(&require("f_dc_" + std::to_string(i)));
  const Property& opacity = require("opacity");
  for (int i = 0; i < 3; ++i) scale.push_back(&require("scale_" + std::to_string(i)));
  for (int i = 0; i < 4; ++i) rot.push_back(&require("rot_" + std::to_string(i)));

  std::size_t rest_count = 0;
  while (by_name.count("f_rest_" + std::to_string(rest_count))) ++rest_count;
  std::size_t rest_seen = 0;
  for (const auto& p : header.properties) rest_seen += p.name.rfind("f_rest_", 0) == 0 ? 1 : 0;
  if (rest_seen != rest_count) throw LoadError("malformed header: non-contiguous f_rest properties");
  const std::size_t coeffs = rest_count / 3 + 1;
  int degree = -1;
  for (int d = 0; d <= kMaxShDegree; ++d) {
    if (static_cast<std::size_t>(sh_coeff_count(d)) == coeffs) degree = d;
  }
  if (rest_count % 3 != 0 || degree < 0) {
    throw LoadError("malformed header: f_rest count " + std::to_string(rest_count) +
                    " does not match an SH degree in 0..3");
  }
  std::vector<const Property*> rest;
  for (std::size_t i = 0; i < rest_count; ++i) rest.push_back(&require("f_rest_" + std::to_string(i)));

  std::vector<unsigned char> data(header.vertex_count * header.stride);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) {
    throw LoadError("truncated vertex data in '" + path.string() + "'");
  }

  Asset asset;
  asset.sh_degree = degree;
  asset.gaussians.resize(header.vertex_count);
  const std::size_t rest_per_channel = coeffs - 1;
  for (std::size_t v = 0; v < header.vertex_count; ++v) {
    const unsigned char* row = data.data() + v * header.stride;
    auto get = [&](const Property& p) {
      const float value = read_as_float(row + p.offset, p.type);
      if (!std::isfinite(value)) {
        throw LoadError("non-finite value in property " + p.name + " (vertex " + std::to_string(v) + ")");
      }
      return value;
    };
    Gaussian& g = asset.gaussians[v];
    for (int i = 0; i < 3; ++i) g.mean[i] = get(*mean[i]);
    for (int i = 0; i < 3; ++i) g.sh[0][i] = get(*dc[i]);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < rest_per_channel; ++k)
        g.sh[k + 1][c] = get(*rest[c * rest_per_channel + k]);
    g.opacity_logit = get(opacity);
    for (int i = 0; i < 3; ++i) g.log_scale[i] = get(*scale[i]);
    for (int i = 0; i < 4; ++i) g.rotation[i] = get(*rot[i]);
    const float norm = g.rotation.norm();
    if (!(norm > 0.0f)) throw LoadError("degenerate rotation (vertex " + std::to_string(v) + ")");
    if (std::abs(norm - 1.0f) > 1e-6f) g.rotation /= norm;
  }

  update_bounds(asset);
  if (header.center_offset) asset.center_offset = *header.center_offset;
  if (header.distances) {
    asset.d_near = header.distances->first;
    asset.d_far = header.distances->second;
  }
  return asset;
}

void save_ply(const Asset& asset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AssetError("cannot open '" + path.string() + "' for writing");

  const int coeffs = sh_coeff_count(asset.sh_degree);
  const int rest_per_channel = coeffs - 1;
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n";
  h << "comment " << kCommentTag << " center_offset " << hex(asset.center_offset.x()) << ' '
    << hex(asset.center_offset.y()) << ' ' << hex(asset.center_offset.z()) << '\n';
  if (asset.has_distances()) {
    h << "comment " << kCommentTag << " distances " << hex(asset.d_near) << ' ' << hex(asset.d_far) << '\n';
  }
  h << "element vertex " << asset.gaussians.size() << '\n';
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    h << "property float " << n << '\n';
  }
  for (int i = 0; i < 3 * rest_per_channel; ++i) h << "property float f_rest_" << i << '\n';
  h << "property float opacity\n";
  for (int i = 0; i < 3; ++i) h << "property float scale_" << i << '\n';
  for (int i = 0; i < 4; ++i) h << "property float rot_" << i << '\n';
  h << "end_header\n";
  const std::string header = h.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  const std::size_t floats_per_row = 9 + 3 * rest_per_channel + 1 + 3 + 4;
  std::vector<float> row(floats_per_row);
  for (const auto& g : asset.gaussians) {
    std::size_t k = 0;
    for (int i = 0; i < 3; ++i) row[k++] = g.mean[i];
    for (int i = 0; i < 3; ++i) row[k++] = 0.0f;
    for (int i = 0; i < 3; ++i) row[k++] = g.sh[0][i];
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < rest_per_channel; ++j) row[k++] = g.sh[j + 1][c];
    row[k++] = g.opacity_logit;
    for (int i = 0; i < 3; ++i) row[k++] = g.log_scale[i];
    for (int i = 0; i < 4; ++i) row[k++] = g.rotation[i];
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw AssetError("write failed for '" + path.string() + "'");
}

}  // namespace splatcull
