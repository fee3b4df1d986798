#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "flowmorph/flowmorph.h"

namespace fs = std::filesystem;

namespace {

const double kCube[] = {0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1};
const int32_t kCubeFaces[] = {0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4,
                              1, 2, 6, 1, 6, 5, 2, 3, 7, 2, 7, 6, 3, 0, 4, 3, 4, 7};
const int32_t kCubeLabels[] = {0, 0, 0, 0, 1, 1, 1, 1};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flowmorph_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_cube(const fs::path& path, double sx) {
  std::ofstream out(path);
  for (int i = 0; i < 8; ++i)
    out << "v " << (kCube[3 * i] - 0.5) * sx << " " << kCube[3 * i + 1] - 0.5 << " " << kCube[3 * i + 2] - 0.5
        << "\n";
  for (int f = 0; f < 12; ++f)
    out << "f " << kCubeFaces[3 * f] + 1 << " " << kCubeFaces[3 * f + 1] + 1 << " " << kCubeFaces[3 * f + 2] + 1
        << "\n";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fm_mesh* cube(const int32_t* labels = nullptr) {
  fm_mesh* m = nullptr;
  REQUIRE(fm_mesh_from_arrays(kCube, 8, kCubeFaces, 12, labels, &m) == FM_OK);
  return m;
}

const char* kTinyTraining =
    "steps = 3\nbatch_size = 1\nsamples = 64\nwidth = 8\nlatent_dim = 4\nseed = 3\nrk4_steps = 3\n";

}  // namespace

TEST_CASE("errors carry a status and a message") {
  fm_mesh* m = nullptr;
  CHECK(fm_mesh_load(nullptr, &m) == FM_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(fm_last_error()) > 0);
  CHECK(fm_mesh_load("/nonexistent/flowmorph.obj", &m) == FM_ERR_IO);
  CHECK(m == nullptr);

  const fs::path dir = scratch("errors");
  std::ofstream(dir / "bad.obj") << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
  CHECK(fm_mesh_load((dir / "bad.obj").c_str(), &m) == FM_ERR_PARSE);
  std::ofstream(dir / "worse.obj") << "v 0 zero 0\n";
  CHECK(fm_mesh_load((dir / "worse.obj").c_str(), &m) == FM_ERR_PARSE);

  const int32_t bad_faces[] = {0, 1, 8};
  CHECK(fm_mesh_from_arrays(kCube, 8, bad_faces, 1, nullptr, &m) == FM_ERR_INVALID_ARGUMENT);

  m = cube();
  CHECK(fm_mesh_save(m, "/tmp/flowmorph_capi_x.unknown") == FM_ERR_INVALID_ARGUMENT);
  fm_mesh_free(m);
  CHECK(std::string(fm_status_name(FM_ERR_NUMERIC)) == "numerical failure");
}

TEST_CASE("mesh and point handles") {
  fm_mesh* m = cube(kCubeLabels);
  CHECK(fm_mesh_vertex_count(m) == 8);
  CHECK(fm_mesh_face_count(m) == 12);
  CHECK(fm_mesh_has_labels(m) == 1);
  double vol = 0.0;
  REQUIRE(fm_mesh_signed_volume(m, &vol) == FM_OK);
  CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));
  size_t hits = 99;
  REQUIRE(fm_mesh_intersections(m, &hits) == FM_OK);
  CHECK(hits == 0);
  std::vector<double> v(24);
  REQUIRE(fm_mesh_vertices(m, v.data()) == FM_OK);
  CHECK(std::equal(v.begin(), v.end(), kCube));

  const fs::path dir = scratch("mesh");
  REQUIRE(fm_mesh_save(m, (dir / "c.obj").c_str()) == FM_OK);
  fm_mesh* back = nullptr;
  REQUIRE(fm_mesh_load((dir / "c.obj").c_str(), &back) == FM_OK);
  CHECK(fm_mesh_face_count(back) == 12);
  CHECK(fm_mesh_has_labels(back) == 1);
  fm_mesh_free(back);

  fm_points* p = nullptr;
  REQUIRE(fm_mesh_sample(m, 100, 4, &p) == FM_OK);
  CHECK(fm_points_count(p) == 100);
  std::vector<double> xyz(300);
  REQUIRE(fm_points_data(p, xyz.data()) == FM_OK);
  for (double c : xyz) {
    CHECK(c >= -1e-12);
    CHECK(c <= 1.0 + 1e-12);
  }
  fm_points_free(p);
  const double nan_pt[] = {0, NAN, 0};
  CHECK(fm_points_from_array(nan_pt, 1, &p) == FM_ERR_INVALID_ARGUMENT);
  fm_mesh_free(m);
}

TEST_CASE("naive correspondence and matching score") {
  fm_mesh* a = cube(kCubeLabels);
  std::vector<int32_t> fwd(8);
  std::vector<double> dist(8);
  REQUIRE(fm_naive_correspond(a, a, fwd.data(), dist.data()) == FM_OK);
  for (int i = 0; i < 8; ++i) {
    CHECK(fwd[i] == i);
    CHECK(dist[i] == 0.0);
  }
  const std::vector<int32_t> bwd(fwd.begin(), fwd.end());
  double score = 0, f = 0, b = 0;
  REQUIRE(fm_sms(a, a, fwd.data(), bwd.data(), &score, &f, &b) == FM_OK);
  CHECK(score == 1.0);

  const int32_t other[] = {5, 5, 5, 5, 6, 6, 6, 6};
  fm_mesh* c = cube(other);
  REQUIRE(fm_sms(a, c, fwd.data(), bwd.data(), &score, &f, &b) == FM_OK);
  CHECK(score == 0.0);
  fm_mesh* unlabeled = cube();
  CHECK(fm_sms(a, unlabeled, fwd.data(), bwd.data(), &score, nullptr, nullptr) == FM_ERR_INVALID_ARGUMENT);

  const fs::path dir = scratch("csv");
  REQUIRE(fm_correspondence_save_csv(fwd.data(), dist.data(), 8, (dir / "c.csv").c_str()) == FM_OK);
  CHECK(slurp(dir / "c.csv").rfind("source,target,distance\n0,0,0\n", 0) == 0);
  fm_mesh_free(a);
  fm_mesh_free(c);
  fm_mesh_free(unlabeled);
}

TEST_CASE("train, persist, embed and correspond") {
  const fs::path dir = scratch("train");
  write_cube(dir / "a.obj", 1.0);
  write_cube(dir / "b.obj", 1.6);
  std::ofstream(dir / "manifest.json")
      << R"({"shapes": [{"mesh": "a.obj", "split": "train"}, {"mesh": "b.obj", "split": "train"},
                        {"mesh": "b.obj", "split": "test"}]})";

  fm_space* space = nullptr;
  REQUIRE(fm_train((dir / "manifest.json").c_str(), nullptr, kTinyTraining, (dir / "ckpt").c_str(), &space) ==
          FM_OK);
  CHECK(fm_space_shape_count(space) == 2);
  CHECK(fm_space_latent_dim(space) == 4);
  CHECK(fs::exists(dir / "ckpt" / "metrics.csv"));

  char* info = nullptr;
  REQUIRE(fm_space_info(space, &info) == FM_OK);
  CHECK(std::string(info).find("\"steps\": 3") != std::string::npos);
  fm_string_free(info);

  // Same seed, same bytes; save/load/save is stable.
  fm_space* again = nullptr;
  REQUIRE(fm_train((dir / "manifest.json").c_str(), nullptr, kTinyTraining, (dir / "ckpt2").c_str(), &again) ==
          FM_OK);
  fm_space_free(again);
  CHECK(slurp(dir / "ckpt" / "tensors.bin") == slurp(dir / "ckpt2" / "tensors.bin"));
  fm_space* loaded = nullptr;
  REQUIRE(fm_space_load((dir / "ckpt").c_str(), &loaded) == FM_OK);
  REQUIRE(fm_space_save(loaded, (dir / "ckpt3").c_str()) == FM_OK);
  CHECK(slurp(dir / "ckpt" / "tensors.bin") == slurp(dir / "ckpt3" / "tensors.bin"));
  CHECK(slurp(dir / "ckpt" / "manifest.json") == slurp(dir / "ckpt3" / "manifest.json"));

  std::vector<double> z0(4), z1(4);
  REQUIRE(fm_space_code(loaded, 0, z0.data()) == FM_OK);
  REQUIRE(fm_space_code(loaded, 1, z1.data()) == FM_OK);
  CHECK(fm_space_code(loaded, 2, z1.data()) == FM_ERR_INVALID_ARGUMENT);

  fm_mesh* a = nullptr;
  REQUIRE(fm_space_shape_mesh(loaded, 0, &a) == FM_OK);
  std::vector<int32_t> t(fm_mesh_vertex_count(a));
  REQUIRE(fm_correspond(loaded, a, z0.data(), a, z0.data(), 1e-6, 1e-6, t.data(), nullptr) == FM_OK);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == static_cast<int32_t>(i));

  fm_mesh* canon = nullptr;
  REQUIRE(fm_canonicalize(loaded, a, z0.data(), 1e-6, 1e-6, &canon) == FM_OK);
  CHECK(fm_mesh_face_count(canon) == fm_mesh_face_count(a));
  fm_mesh_free(canon);

  fm_embed_options eo;
  fm_embed_options_default(&eo);
  CHECK(eo.k == 5);
  CHECK(eo.iterations == 30);
  eo.iterations = 2;
  eo.finetune_iterations = 2;
  eo.samples = 64;
  eo.eval_samples = 128;
  eo.k = 2;
  fm_points* obs = nullptr;
  REQUIRE(fm_mesh_sample(a, 64, 1, &obs) == FM_OK);
  std::vector<double> code(4);
  char* rep = nullptr;
  REQUIRE(fm_embed(loaded, obs, &eo, 5, code.data(), &rep) == FM_OK);
  CHECK(std::string(rep).find("\"objective\"") != std::string::npos);
  fm_string_free(rep);
  for (double c : code) CHECK(std::isfinite(c));

  fm_mesh* recon = nullptr;
  REQUIRE(fm_reconstruct(loaded, obs, &eo, 5, &recon, &rep) == FM_OK);
  CHECK(std::string(rep).find("\"candidates\"") != std::string::npos);
  CHECK(fm_mesh_vertex_count(recon) == 8);
  fm_string_free(rep);
  fm_mesh_free(recon);

  eo.k = 3;  // more than the table holds
  CHECK(fm_reconstruct(loaded, obs, &eo, 5, &recon, nullptr) == FM_ERR_INVALID_ARGUMENT);
  eo.k = 1;
  REQUIRE(fm_metrics(loaded, (dir / "manifest.json").c_str(), "test", &eo, 2, (dir / "m.csv").c_str(), &rep) ==
          FM_OK);
  fm_string_free(rep);
  CHECK(slurp(dir / "m.csv").rfind("shape,source,chamfer_l1,normal_consistency\n", 0) == 0);
  CHECK(fm_metrics(loaded, (dir / "manifest.json").c_str(), "val", &eo, 2, nullptr, nullptr) ==
        FM_ERR_INVALID_ARGUMENT);

  fm_points_free(obs);
  fm_mesh_free(a);
  fm_space_free(loaded);
  fm_space_free(space);
}

TEST_CASE("interpolating identical keyframes reproduces the source") {
  fm_mesh* a = cube();
  fm_interp_options o;
  fm_interp_options_default(&o);
  CHECK(o.divergence_free == 1);
  CHECK(o.edge_weight == 2.0);
  CHECK(o.steps == 1000);
  o.frames = 3;
  const fs::path dir = scratch("interp");
  char* rep = nullptr;
  REQUIRE(fm_interpolate(a, a, &o, 1, dir.c_str(), &rep) == FM_OK);
  fm_string_free(rep);
  fm_mesh* f = nullptr;
  REQUIRE(fm_mesh_load((dir / "frame_0001.obj").c_str(), &f) == FM_OK);
  std::vector<double> v(24);
  REQUIRE(fm_mesh_vertices(f, v.data()) == FM_OK);
  for (int i = 0; i < 24; ++i) CHECK(v[i] == doctest::Approx(kCube[i]).epsilon(1e-12));
  CHECK(fs::exists(dir / "baseline_0002.obj"));
  CHECK(fs::exists(dir / "report.json"));
  fm_mesh_free(f);

  fm_mesh* other = nullptr;
  REQUIRE(fm_mesh_from_arrays(kCube, 7, nullptr, 0, nullptr, &other) == FM_OK);
  CHECK(fm_interpolate(a, other, &o, 1, nullptr, nullptr) == FM_ERR_INVALID_ARGUMENT);
  fm_mesh_free(other);
  fm_mesh_free(a);
}

TEST_CASE("verify passes and the fault mode fails") {
  char* rep = nullptr;
  char* table = nullptr;
  int passed = 0;
  REQUIRE(fm_verify(0, 0, &rep, &table, &passed) == FM_OK);
  CHECK(passed == 1);
  fm_string_free(rep);
  fm_string_free(table);
  REQUIRE(fm_verify(0, 1, &rep, nullptr, &passed) == FM_OK);
  CHECK(passed == 0);
  CHECK(std::string(rep).find("divergence") != std::string::npos);
  fm_string_free(rep);
}
