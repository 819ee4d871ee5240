#include "support.hpp"

#include "splatcull/asset.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <vector>

using namespace splatcull;

namespace {

/// Independent minimal PLY writer: float properties in the given order, one
/// value generator per property.
void write_raw_ply(const std::filesystem::path& path, const std::vector<std::string>& props, int rows,
                   float (*value)(const std::string&, int)) {
  std::ofstream out(path, std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << rows << "\n";
  for (const auto& p : props) out << "property float " << p << "\n";
  out << "end_header\n";
  for (int r = 0; r < rows; ++r) {
    for (const auto& p : props) {
      const float v = value(p, r);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
}

std::vector<std::string> standard_props(int n_rest, bool with_rot3 = true) {
  std::vector<std::string> p{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < n_rest; ++i) p.push_back("f_rest_" + std::to_string(i));
  for (const char* s : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2"}) p.push_back(s);
  if (with_rot3) p.push_back("rot_3");
  return p;
}

float simple_value(const std::string& name, int row) {
  if (name == "rot_0") return 1.0f;
  if (name.starts_with("rot_")) return 0.0f;
  return 0.01f * static_cast<float>(row + 1) + static_cast<float>(name.size()) * 0.001f;
}

bool bit_equal(const Gaussian& a, const Gaussian& b) {
  auto same = [](const auto& x, const auto& y) { return std::memcmp(x.data(), y.data(), sizeof(float) * x.size()) == 0; };
  if (!same(a.mean, b.mean) || !same(a.log_scale, b.log_scale) || !same(a.rotation, b.rotation)) return false;
  if (std::memcmp(&a.opacity_logit, &b.opacity_logit, 4) != 0) return false;
  for (int k = 0; k < kMaxShCoeffs; ++k)
    if (!same(a.sh[k], b.sh[k])) return false;
  return true;
}

Asset with_alphas(const std::vector<float>& alphas) {
  Asset a;
  for (float alpha : alphas) {
    Gaussian g;
    g.opacity_logit = logit(alpha);
    a.gaussians.push_back(g);
  }
  return a;
}

}  // namespace

TEST_CASE("load_ply infers the SH degree from f_rest") {
  test::TempDir dir("ply_deg");
  write_raw_ply(dir / "d0.ply", standard_props(0), 3, simple_value);
  write_raw_ply(dir / "d3.ply", standard_props(45), 3, simple_value);
  CHECK(load_ply(dir / "d0.ply").sh_degree == 0);
  const Asset a3 = load_ply(dir / "d3.ply");
  CHECK(a3.sh_degree == 3);
  CHECK(a3.size() == 3);
}

TEST_CASE("load_ply reads f_rest channel-major") {
  test::TempDir dir("ply_rest");
  write_raw_ply(dir / "a.ply", standard_props(9), 1, [](const std::string& name, int) {
    if (name == "rot_0") return 1.0f;
    if (name.starts_with("f_rest_")) return static_cast<float>(std::stoi(name.substr(7)));
    return 0.0f;
  });
  const Asset a = load_ply(dir / "a.ply");
  REQUIRE(a.sh_degree == 1);
  // 3 coefficients per channel: channel c, coefficient k lives at f_rest_{c*3 + k-1}.
  for (int k = 1; k < 4; ++k)
    for (int c = 0; c < 3; ++c) CHECK(a.gaussians[0].sh[k][c] == static_cast<float>(c * 3 + (k - 1)));
}

TEST_CASE("load_ply reports missing and malformed data") {
  test::TempDir dir("ply_err");
  write_raw_ply(dir / "norot.ply", standard_props(0, false), 2, simple_value);
  CHECK_THROWS_WITH_AS(load_ply(dir / "norot.ply"), doctest::Contains("missing property rot_3"), LoadError);

  write_raw_ply(dir / "bad_rest.ply", standard_props(5), 1, simple_value);
  CHECK_THROWS_AS(load_ply(dir / "bad_rest.ply"), LoadError);

  write_raw_ply(dir / "nan.ply", standard_props(0), 2, [](const std::string& name, int row) {
    if (name == "scale_1" && row == 1) return std::nanf("");
    return simple_value(name, row);
  });
  CHECK_THROWS_WITH_AS(load_ply(dir / "nan.ply"), doctest::Contains("scale_1"), LoadError);

  {
    std::ofstream out(dir / "junk.ply", std::ios::binary);
    out << "ply\nformat ascii 1.0\nend_header\n";
  }
  CHECK_THROWS_AS(load_ply(dir / "junk.ply"), LoadError);
  CHECK_THROWS_AS(load_ply(dir / "does_not_exist.ply"), LoadError);
}

TEST_CASE("load_ply normalises quaternions") {
  test::TempDir dir("ply_quat");
  write_raw_ply(dir / "q.ply", standard_props(0), 1, [](const std::string& name, int) {
    if (name == "rot_0") return 2.0f;
    if (name == "rot_1") return 2.0f;
    return 0.0f;
  });
  const Asset a = load_ply(dir / "q.ply");
  CHECK(std::abs(a.gaussians[0].rotation.norm() - 1.0f) < 1e-6f);
}

TEST_CASE("save_ply round-trips bit-exactly") {
  test::TempDir dir("ply_rt");
  for (int deg = 0; deg <= 3; ++deg) {
    Asset a = with_sampling_distances(recenter(test::random_asset(257, 11 + deg, deg)), 1.0);
    save_ply(a, dir / "a.ply");
    const Asset b = load_ply(dir / "a.ply");
    REQUIRE(b.size() == a.size());
    CHECK(b.sh_degree == deg);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(bit_equal(a.gaussians[i], b.gaussians[i]));
    CHECK(b.center_offset == a.center_offset);
    CHECK(b.d_near == a.d_near);
    CHECK(b.d_far == a.d_far);
    CHECK(asset_hash(a) == asset_hash(b));
  }

  Asset one = test::random_asset(1, 5);
  save_ply(one, dir / "one.ply");
  CHECK(bit_equal(load_ply(dir / "one.ply").gaussians[0], one.gaussians[0]));
}

TEST_CASE("save_ply writes 45 f_rest properties at degree 3") {
  test::TempDir dir("ply_count");
  save_ply(test::random_asset(2, 3, 3), dir / "a.ply");
  std::ifstream in(dir / "a.ply", std::ios::binary);
  std::string line;
  int rest = 0;
  while (std::getline(in, line) && line != "end_header") rest += line.find("f_rest_") != std::string::npos;
  CHECK(rest == 45);
}

TEST_CASE("prune keeps exactly the Gaussians at or above the threshold") {
  const Asset a = with_alphas({0.5f, 0.001f, 0.9f});
  const Asset p = prune(a, 1.0 / 255.0);
  REQUIRE(p.size() == 2);
  CHECK(p.gaussians[0].opacity() == doctest::Approx(0.5));
  CHECK(p.gaussians[1].opacity() == doctest::Approx(0.9));
  CHECK(prune(a, 0.0).size() == 3);
  CHECK_THROWS(prune(a, 1.0));
  CHECK_THROWS(prune(a, -0.1));

  Asset big = test::random_asset(1000, 9);
  for (auto& g : big.gaussians) g.opacity_logit -= 5.0f;
  std::size_t expected = 0;
  for (const auto& g : big.gaussians) expected += sigmoid(g.opacity_logit) >= static_cast<float>(1.0 / 255.0);
  const Asset pb = prune(big);
  CHECK(pb.size() == expected);
  CHECK(prune(pb).size() == pb.size());
  CHECK(prune(big, 0.2).size() <= pb.size());
}

TEST_CASE("recenter") {
  Asset a;
  Gaussian g;
  g.mean = {1, 1, 1};
  a.gaussians.push_back(g);
  g.mean = {3, 3, 3};
  a.gaussians.push_back(g);
  const Asset r = recenter(a);
  CHECK(r.gaussians[0].mean == Eigen::Vector3f(-1, -1, -1));
  CHECK(r.gaussians[1].mean == Eigen::Vector3f(1, 1, 1));
  CHECK(r.center_offset.isApprox(Eigen::Vector3d(2, 2, 2)));
  CHECK(r.bound_radius == doctest::Approx(std::sqrt(3.0)));

  const Asset rr = recenter(r);
  CHECK(rr.center_offset.isApprox(r.center_offset));
  for (std::size_t i = 0; i < r.size(); ++i) CHECK((rr.gaussians[i].mean - r.gaussians[i].mean).norm() < 1e-7f);

  const Asset rand = recenter(test::random_asset(500, 2, 0, 3.0));
  CHECK(((rand.bbox_min + rand.bbox_max) * 0.5).norm() < 1e-6);
  const Asset rand2 = recenter(rand);
  for (std::size_t i = 0; i < rand.size(); ++i) {
    REQUIRE((rand2.gaussians[i].mean - rand.gaussians[i].mean).norm() < 1e-6f);
  }
  CHECK_THROWS_AS(recenter(Asset{}), AssetError);
}

TEST_CASE("recenter preserves pairwise distances") {
  Asset a = test::random_asset(50, 4);
  for (auto& g : a.gaussians) g.mean += Eigen::Vector3f(0.5f, 0.25f, -0.125f);  // exact in float
  const Asset r = recenter(a);
  for (std::size_t i = 1; i < a.size(); ++i) {
    const float before = (a.gaussians[i].mean - a.gaussians[0].mean).norm();
    const float after = (r.gaussians[i].mean - r.gaussians[0].mean).norm();
    CHECK(after == doctest::Approx(before).epsilon(1e-6));
  }
}

TEST_CASE("compute_sampling_distances") {
  Asset a;
  a.bound_radius = 1.0;
  a.gaussians.resize(1);
  const double quarter = std::numbers::pi / 2.0;
  CHECK(distance_for_fraction(1.0, quarter, 1.0) == doctest::Approx(1.0));
  const auto d = compute_sampling_distances(a, std::numbers::pi / 3.0, 0.9, 0.05);
  CHECK(d.d_near == doctest::Approx(1.0 / (std::tan(std::numbers::pi / 6.0) * 0.9)));
  CHECK(d.d_far == doctest::Approx(1.0 / (std::tan(std::numbers::pi / 6.0) * 0.05)));
  CHECK(d.d_far / d.d_near == doctest::Approx(18.0).epsilon(1e-12));
  CHECK(d.d_near < d.d_far);

  // Strictly decreasing in p and in fov.
  CHECK(distance_for_fraction(1.0, 1.0, 0.5) > distance_for_fraction(1.0, 1.0, 0.6));
  CHECK(distance_for_fraction(1.0, 1.0, 0.5) > distance_for_fraction(1.0, 1.1, 0.5));

  CHECK_THROWS(compute_sampling_distances(a, 0.0));
  CHECK_THROWS(compute_sampling_distances(a, 1.0, 0.05, 0.9));
  Asset degenerate;
  degenerate.gaussians.resize(2);
  update_bounds(degenerate);
  CHECK_THROWS_AS(compute_sampling_distances(degenerate, 1.0), AssetError);
}

TEST_CASE("asset_hash is content sensitive") {
  Asset a = test::random_asset(10, 1);
  const auto h = asset_hash(a);
  CHECK(asset_hash(a) == h);
  a.gaussians[3].opacity_logit += 1e-3f;
  CHECK(asset_hash(a) != h);
}
