#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowmorph/embedding/embed.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/geometry/primitives.hpp"
#include "flowmorph/numerics/rng.hpp"
#include "flowmorph/training/train.hpp"
#include "oracles.hpp"

using namespace fm::embedding;
using fm::geometry::Mesh;
using fm::numerics::Rng;

namespace {

struct Space {
  std::vector<Mesh> shapes;
  fm::training::Checkpoint ckpt;
};

// Two-shape toy space.
const Space& toy_space() {
  static const Space s = [] {
    Space sp;
    sp.shapes = {fm::geometry::icosphere(2, 0.35), fm::geometry::box_surface({0.9, 0.3, 0.3}, {4, 2, 2})};
    fm::training::TrainConfig cfg;
    cfg.steps = 500;
    cfg.batch_size = 1;
    cfg.samples = 128;
    cfg.flow.width = 16;
    cfg.flow.latent_dim = 8;
    cfg.learning_rate = 3e-3;
    cfg.seed = 1;
    sp.ckpt = fm::training::train(sp.shapes, cfg);
    return sp;
  }();
  return s;
}

EmbedConfig quick() {
  EmbedConfig c;
  c.iterations = 10;
  c.finetune_iterations = 4;
  c.samples = 96;
  c.eval_samples = 256;
  c.eval_ode = fm::ode::OdeConfig::dopri5(1e-3, 1e-3);
  return c;
}

std::vector<Ranked> brute_rank(const Mat& table, const Vec& z) {
  std::vector<int> ids(static_cast<std::size_t>(table.rows()));
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> d;
  for (int i : ids) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < table.cols(); ++k) s += (table(i, k) - z[k]) * (table(i, k) - z[k]);
    d.push_back(std::sqrt(s));
  }
  std::sort(ids.begin(), ids.end(), [&](int a, int b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
  std::vector<Ranked> out;
  for (int i : ids) out.push_back({i, d[static_cast<std::size_t>(i)]});
  return out;
}

}  // namespace

TEST_CASE("retrieve_topk") {
  Rng rng(3);
  Mat table(40, 6);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.normal(0.0, 1.0);
  table.row(17) = table.row(5);  // a tie
  for (int trial = 0; trial < 20; ++trial) {
    Vec z(6);
    for (int k = 0; k < 6; ++k) z[k] = rng.normal(0.0, 1.0);
    const auto got = retrieve_topk(table, z, 40);
    const auto ref = brute_rank(table, z);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(got[k].id == ref[k].id);
      CHECK(got[k].distance == doctest::Approx(ref[k].distance).epsilon(1e-14));
    }
    const Vec shift = Vec::Constant(6, 3.7);
    const Mat moved = table.rowwise() + shift.transpose();
    const auto t = retrieve_topk(moved, z + shift, 10);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(t[k].id == got[k].id);
  }
  const auto first = retrieve_topk(table, table.row(5).transpose(), 2);
  CHECK(first[0].id == 5);
  CHECK(first[0].distance == 0.0);
  CHECK(first[1].id == 17);
  CHECK_THROWS_AS(retrieve_topk(table, Vec::Zero(6), 41), std::invalid_argument);
  CHECK_THROWS_AS(retrieve_topk(table, Vec::Zero(6), 0), std::invalid_argument);
}

TEST_CASE("embedding") {
  const Space& sp = toy_space();
  const auto before = sp.ckpt.latents;
  const Mat obs = fm::geometry::sample_surface(sp.shapes[1], 512, 77).points;

  SUBCASE("zero iterations return the initial draw") {
    EmbedConfig c = quick();
    c.iterations = 0;
    const auto r = embed(sp.ckpt, sp.shapes, obs, c, 5);
    REQUIRE(r.objective.size() == 1);
    Rng rng(5);
    for (Eigen::Index k = 0; k < r.code.size(); ++k) CHECK(r.code[k] == rng.normal(0.0, c.init_std));
  }
  SUBCASE("objective endpoints, determinism and immutability") {
    const auto r = embed(sp.ckpt, sp.shapes, obs, quick(), 5);
    CHECK(r.objective.size() == 11);
    CHECK(r.objective[static_cast<std::size_t>(r.best_iteration)] <= r.objective.front());
    CHECK(r.code == embed(sp.ckpt, sp.shapes, obs, quick(), 5).code);
    CHECK(sp.ckpt.latents == before);
  }
  SUBCASE("fresh samples land in the source's cell") {
    for (int s = 0; s < 2; ++s) {
      const Mat fresh = fm::geometry::sample_surface(sp.shapes[static_cast<std::size_t>(s)], 512, 100 + s).points;
      // The default 30 iterations stop short of the cell on this model.
      EmbedConfig c;
      c.iterations = 100;
      c.learning_rate = 3e-2;
      const auto r = embed(sp.ckpt, sp.shapes, fresh, c, 9);
      CHECK(retrieve_topk(sp.ckpt.latents, r.code, 1)[0].id == s);
    }
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(embed(sp.ckpt, sp.shapes, Mat(0, 3), quick(), 1), std::invalid_argument);
    CHECK_THROWS_AS(embed(sp.ckpt, {sp.shapes[0]}, obs, quick(), 1), std::invalid_argument);
  }
}

TEST_CASE("reconstruction") {
  const Space& sp = toy_space();
  const Mat obs = fm::geometry::sample_surface(sp.shapes[0], 512, 31).points;
  EmbedConfig c = quick();
  c.k = 2;
  const auto r = reconstruct(sp.ckpt, sp.shapes, obs, c, 4);
  REQUIRE(r.candidates.size() == 2);
  CHECK(r.candidates[0].chamfer <= r.candidates[1].chamfer);
  CHECK(r.finetune_objective.size() == 5);
  CHECK(*std::min_element(r.finetune_objective.begin(), r.finetune_objective.end()) <=
        r.finetune_objective.front() + 1e-9);
  for (const auto& cand : r.candidates) {
    CHECK(cand.mesh.face_count() == sp.shapes[static_cast<std::size_t>(cand.shape)].face_count());
    CHECK(cand.raw_chamfer > 0.0);
  }
  CHECK(r.best().mesh.vertices == reconstruct(sp.ckpt, sp.shapes, obs, c, 4).best().mesh.vertices);

  c.k = 1;
  CHECK(reconstruct(sp.ckpt, sp.shapes, obs, c, 4).candidates.size() == 1);
  c.k = 3;
  CHECK_THROWS_AS(reconstruct(sp.ckpt, sp.shapes, obs, c, 4), std::invalid_argument);
}

TEST_CASE("eval_reconstruction") {
  const Mesh cube = fm::geometry::box_surface({1, 1, 1}, {3, 3, 3});
  const auto self = eval_reconstruction(cube, cube, 2000, 1);
  CHECK(self.chamfer_l1 == 0.0);
  CHECK(std::abs(self.normal_consistency - 1.0) <= 1e-3);

  // Rotating 90 degrees about z maps the cube onto itself; what remains is sampling noise.
  Mesh turned = cube;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  turned.vertices = cube.vertices * rot.transpose();
  const auto rotated = eval_reconstruction(cube, turned, 4000, 2);
  const double floor = oracle::chamfer_l1(fm::geometry::sample_surface(cube, 4000, 11).points,
                                          fm::geometry::sample_surface(cube, 4000, 12).points);
  CHECK(rotated.chamfer_l1 > 0.0);
  CHECK(rotated.chamfer_l1 < 1.5 * floor);
  CHECK(rotated.normal_consistency > 0.9);

  // Cube of unit volume vs the sphere of equal volume.
  const Mesh sphere = fm::geometry::icosphere(4, std::cbrt(3.0 / (4.0 * M_PI)));
  const double measured = eval_reconstruction(cube, sphere, 8000, 3).chamfer_l1;
  const Mat dense_a = fm::geometry::sample_surface(cube, 40000, 91).points;
  const Mat dense_b = fm::geometry::sample_surface(sphere, 40000, 92).points;
  const double dense = oracle::chamfer_l1(dense_a, dense_b);
  CHECK(measured > 0.0);
  CHECK(std::abs(measured - dense) / dense < 0.05);
}

TEST_CASE("noisy observations") {
  const Mesh cube = fm::geometry::unit_cube();
  const Mat a = noisy_observation(cube, 300, 0.05, 4);
  CHECK(a.rows() == 300);
  CHECK(a == noisy_observation(cube, 300, 0.05, 4));
  const Mat clean = fm::geometry::sample_surface(cube, 300, 4).points;
  const double sd = std::sqrt((a - clean).array().square().mean());
  CHECK(sd == doctest::Approx(0.05).epsilon(0.1));
}
