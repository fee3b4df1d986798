#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "flowmorph/geometry/chamfer.hpp"
#include "flowmorph/geometry/intersect.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/geometry/primitives.hpp"
#include "flowmorph/geometry/spatial_index.hpp"
#include "flowmorph/numerics/rng.hpp"
#include "oracles.hpp"

using namespace fm::geometry;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "flowmorph_unit" / name;
  fs::create_directories(p.parent_path());
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  f << s;
}

const char* kCubeObj =
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
    "f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";

Mat random_cloud(fm::numerics::Rng& rng, int n) {
  Mat m(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) m(i, c) = rng.uniform(-1, 1);
  return m;
}

}  // namespace

TEST_CASE("obj quads are fan triangulated") {
  const auto p = scratch("cube.obj");
  write_text(p, kCubeObj);
  LoadReport report;
  const Mesh m = load_mesh(p, MeshFormat::obj, &report);
  CHECK(m.vertex_count() == 8);
  CHECK(m.face_count() == 12);
  CHECK(report.polygons_split == 6);
  CHECK(signed_volume(m) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("obj face index past the vertex count is a parse error") {
  const auto p = scratch("bad.obj");
  write_text(p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\nf 1 2 9\n");
  CHECK_THROWS_AS(load_mesh(p), ParseError);
}

TEST_CASE("single triangle obj") {
  const auto p = scratch("tri.obj");
  write_text(p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const Mesh m = load_mesh(p);
  CHECK(m.vertex_count() == 3);
  CHECK(m.face_count() == 1);
}

TEST_CASE("degenerate faces are kept and counted") {
  const auto p = scratch("degen.obj");
  write_text(p, "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\nf 1 1 2\n");
  LoadReport report;
  const Mesh m = load_mesh(p, std::nullopt, &report);
  CHECK(m.face_count() == 2);
  CHECK(report.degenerate_faces == 2);
}

TEST_CASE("save/load round trips") {
  Mesh cube = unit_cube();
  SUBCASE("obj") {
    const auto p = scratch("rt.obj");
    save_mesh(cube, p);
    const Mesh back = load_mesh(p);
    CHECK(back.faces == cube.faces);
    CHECK((back.vertices - cube.vertices).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("ply with labels") {
    cube.labels = {0, 1, 2, 3, 4, 5, 6, 7};
    const auto p = scratch("rt.ply");
    save_mesh(cube, p);
    std::ifstream f(p);
    std::string text((std::istreambuf_iterator<char>(f)), {});
    CHECK(text.find("property int label") != std::string::npos);
    const Mesh back = load_mesh(p);
    CHECK(back.faces == cube.faces);
    CHECK(back.labels == cube.labels);
  }
  SUBCASE("empty mesh") {
    const auto p = scratch("empty.ply");
    save_mesh(Mesh{}, p);
    const Mesh back = load_mesh(p);
    CHECK(back.vertex_count() == 0);
    CHECK(back.face_count() == 0);
  }
  SUBCASE("obj labels through the sidecar") {
    cube.labels = {1, 1, 1, 1, 2, 2, 2, 2};
    const auto p = scratch("lab.obj");
    save_mesh(cube, p);
    CHECK(fs::exists(label_sidecar_path(p)));
    CHECK(load_mesh(p).labels == cube.labels);
  }
}

TEST_CASE("binary ply is read") {
  const auto p = scratch("bin.ply");
  {
    std::ofstream f(p, std::ios::binary);
    f << "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
         "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n";
    const float v[9] = {0, 0, 0, 1, 0, 0, 0, 1, 0};
    f.write(reinterpret_cast<const char*>(v), sizeof v);
    const unsigned char n = 3;
    const int idx[3] = {0, 1, 2};
    f.write(reinterpret_cast<const char*>(&n), 1);
    f.write(reinterpret_cast<const char*>(idx), sizeof idx);
  }
  const Mesh m = load_mesh(p);
  CHECK(m.vertex_count() == 3);
  REQUIRE(m.face_count() == 1);
  CHECK(m.vertices(1, 0) == 1.0);
}

TEST_CASE("normalize_to_unit") {
  SUBCASE("cube 0..2") {
    Mesh m = scaled(translated(unit_cube(), Vec3::Constant(0.5)), Vec3::Constant(2.0));
    const auto r = normalize_to_unit(m);
    CHECK(r.scale == doctest::Approx(2.0));
    CHECK((r.offset - Vec3::Ones()).norm() < 1e-15);
    CHECK(r.mesh.vertices.minCoeff() == doctest::Approx(-0.5));
    CHECK(r.mesh.vertices.maxCoeff() == doctest::Approx(0.5));
  }
  SUBCASE("already normalized") {
    const auto r = normalize_to_unit(unit_cube());
    CHECK(r.scale == 1.0);
    CHECK(r.offset.norm() == 0.0);
  }
  SUBCASE("flat plate") {
    const auto r = normalize_to_unit(flat_grid(2, 2, 1.0));
    CHECK(r.scale == 2.0);
    CHECK(r.mesh.vertices.col(2).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("coincident vertices") {
    Mesh m;
    m.vertices = Mat::Ones(3, 3);
    CHECK_THROWS(normalize_to_unit(m));
  }
}

TEST_CASE("surface sampling") {
  SUBCASE("unit square mean within 3 sigma") {
    const Mesh sq = flat_grid(1, 1, 1.0);
    const int n = 100000;
    const PointCloud pc = sample_surface(sq, n, 11);
    const Vec3 mean = pc.points.colwise().mean().transpose();
    const double sigma = std::sqrt(1.0 / 12.0 / n);
    CHECK(std::abs(mean.x() - 0.5) < 3 * sigma);
    CHECK(std::abs(mean.y() - 0.5) < 3 * sigma);
    CHECK(mean.z() == 0.0);
  }
  SUBCASE("single triangle containment") {
    Mesh t;
    t.vertices.resize(3, 3);
    t.vertices << 0, 0, 0, 2, 0, 0, 0, 1, 0;
    t.faces = {{0, 1, 2}};
    const auto s = sample_surface_detailed(t, 2000, 3);
    for (Eigen::Index i = 0; i < 2000; ++i) {
      const auto b = s.barycentric.row(i);
      CHECK(b.minCoeff() >= 0.0);
      CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(s.points(i, 0) >= 0.0);
      CHECK(s.points(i, 1) >= 0.0);
      CHECK(s.points(i, 0) / 2.0 + s.points(i, 1) <= 1.0 + 1e-15);
    }
  }
  SUBCASE("deterministic and 512 default") {
    const Mesh m = icosphere(2);
    const auto a = sample_surface(m, 512, 42);
    const auto b = sample_surface(m, 512, 42);
    CHECK(a.points.rows() == 512);
    CHECK(a.points == b.points);
  }
  SUBCASE("labels come from the nearest face vertex") {
    Mesh t;
    t.vertices.resize(3, 3);
    t.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    t.faces = {{0, 1, 2}};
    t.labels = {5, 6, 7};
    const auto s = sample_surface(t, 500, 9);
    for (Eigen::Index i = 0; i < 500; ++i) {
      const int v = oracle::nearest(t.vertices, s.points.row(i).transpose());
      CHECK(s.labels[static_cast<std::size_t>(i)] == t.labels[static_cast<std::size_t>(v)]);
    }
  }
  SUBCASE("all-degenerate mesh") {
    Mesh t;
    t.vertices = Mat::Zero(3, 3);
    t.faces = {{0, 1, 2}};
    CHECK_THROWS(sample_surface(t, 10, 1));
  }
}

TEST_CASE("spatial index equals brute force with lowest-index ties") {
  fm::numerics::Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(60));
    Mat cloud = random_cloud(rng, n);
    // Force duplicates so ties occur.
    if (n > 4) cloud.row(n - 1) = cloud.row(1);
    const SpatialIndex index(cloud);
    Vec3 q = trial % 3 == 0 ? Vec3(cloud.row(n - 1).transpose()) : Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double d;
    const int ref = oracle::nearest(cloud, q, &d);
    const auto got = index.nearest(q);
    REQUIRE(got.index == ref);
    REQUIRE(got.sq_distance == d);
  }
}

TEST_CASE("chamfer") {
  SUBCASE("single points") {
    Mat a(1, 3), b(1, 3);
    a << 0, 0, 0;
    b << 1, 0, 0;
    CHECK(chamfer(a, b, ChamferVariant::sq_l2_train) == 2.0);
    CHECK(chamfer(a, b, ChamferVariant::l1_eval) == 1.0);
  }
  SUBCASE("self distance, symmetry and brute force") {
    fm::numerics::Rng rng(8);
    const Mat a = random_cloud(rng, 200), b = random_cloud(rng, 200);
    CHECK(chamfer(a, a, ChamferVariant::sq_l2_train) == 0.0);
    CHECK(chamfer(a, a, ChamferVariant::l1_eval) == 0.0);
    CHECK(chamfer(a, b, ChamferVariant::sq_l2_train) == chamfer(b, a, ChamferVariant::sq_l2_train));
    CHECK(chamfer(a, b, ChamferVariant::l1_eval) == chamfer(b, a, ChamferVariant::l1_eval));
    const double s = oracle::chamfer_sq(a, b), l = oracle::chamfer_l1(a, b);
    CHECK(std::abs(chamfer(a, b, ChamferVariant::sq_l2_train) - s) <= 1e-12 * s);
    CHECK(std::abs(chamfer(a, b, ChamferVariant::l1_eval) - l) <= 1e-12 * l);
  }
  SUBCASE("empty cloud") { CHECK_THROWS(chamfer(Mat(0, 3), Mat::Zero(1, 3), ChamferVariant::l1_eval)); }
}

TEST_CASE("signed volume") {
  CHECK(signed_volume(unit_cube()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(signed_volume(flipped(unit_cube())) == doctest::Approx(-1.0).epsilon(1e-12));
  const double exact = 4.0 / 3.0 * std::numbers::pi;
  double prev = 0.0;
  for (int level = 1; level <= 4; ++level) {
    const double v = signed_volume(icosphere(level));
    CHECK(v < exact);
    CHECK(v > prev);
    CHECK(exact - v < exact - prev);
    prev = v;
  }
  CHECK(signed_volume(icosphere(3)) == doctest::Approx(exact).epsilon(0.02));

  const Mesh m = icosphere(2);
  const double v0 = signed_volume(m);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Mat rotated = m.vertices * r.transpose();
  CHECK(std::abs(signed_volume(rotated, m.faces) - v0) <= 1e-9 * std::abs(v0));
  CHECK(signed_volume(scaled(m, Vec3::Constant(1.7))) == doctest::Approx(v0 * 1.7 * 1.7 * 1.7).epsilon(1e-12));
}

TEST_CASE("edge lengths") {
  const auto edges = edge_lengths(unit_cube());
  CHECK(edges.size() == 18);
  int unit = 0, diag = 0;
  for (const auto& e : edges) {
    if (std::abs(e.length - 1.0) < 1e-15) ++unit;
    if (std::abs(e.length - std::sqrt(2.0)) < 1e-15) ++diag;
  }
  CHECK(unit == 12);
  CHECK(diag == 6);
  for (std::size_t i = 1; i < edges.size(); ++i)
    CHECK(std::pair(edges[i - 1].a, edges[i - 1].b) < std::pair(edges[i].a, edges[i].b));

  Mesh degen;
  degen.vertices.resize(2, 3);
  degen.vertices << 0, 0, 0, 1, 0, 0;
  degen.faces = {{0, 0, 1}};
  bool zero = false;
  for (const auto& e : edge_lengths(degen)) zero = zero || e.length == 0.0;
  CHECK(zero);

  const auto scaled_edges = edge_lengths(scaled(unit_cube(), Vec3::Constant(3.0)));
  for (std::size_t i = 0; i < edges.size(); ++i)
    CHECK(scaled_edges[i].length == doctest::Approx(3.0 * edges[i].length).epsilon(1e-15));
}

TEST_CASE("triangle intersections") {
  CHECK(count_triangle_intersections(flat_grid(8, 8, 0.1)) == 0);
  CHECK(count_triangle_intersections(icosphere(2)) == 0);

  Mesh plus;
  plus.vertices.resize(6, 3);
  plus.vertices << -1, 0, -1, 1, 0, -1, 0, 0, 1,  // in the xz plane
      0, -1, -1, 0, 1, -1, 0, 0.5, 1;             // in the yz plane
  plus.faces = {{0, 1, 2}, {3, 4, 5}};
  CHECK(count_triangle_intersections(plus) == 1);

  SUBCASE("random soup equals the brute-force pair test") {
    fm::numerics::Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      Mesh soup;
      soup.vertices.resize(300, 3);
      for (int t = 0; t < 100; ++t) {
        const Vec3 c(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        for (int k = 0; k < 3; ++k)
          soup.vertices.row(3 * t + k) = (c + 0.3 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))).transpose();
        soup.faces.push_back({3 * t, 3 * t + 1, 3 * t + 2});
      }
      std::size_t brute = 0;
      for (std::size_t i = 0; i < soup.faces.size(); ++i)
        for (std::size_t j = i + 1; j < soup.faces.size(); ++j) {
          auto tri = [&](std::size_t f) {
            return std::array<Vec3, 3>{soup.vertex(soup.faces[f][0]), soup.vertex(soup.faces[f][1]),
                                       soup.vertex(soup.faces[f][2])};
          };
          if (oracle::triangles_cross(tri(i), tri(j))) ++brute;
        }
      CHECK(brute > 0);
      CHECK(count_triangle_intersections(soup) == brute);
    }
  }
}

TEST_CASE("bent limb stays free of self intersections") {
  const Mesh limb = box_surface(Vec3(1.0, 0.2, 0.2), {10, 2, 2});
  CHECK(count_triangle_intersections(limb) == 0);
  const Mesh bent = bend_about_z(limb, 0.5);
  CHECK(count_triangle_intersections(bent) == 0);
  CHECK(signed_volume(limb) == doctest::Approx(0.04).epsilon(1e-12));
}
