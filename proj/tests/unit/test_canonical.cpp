#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "flowmorph/canonical/correspond.hpp"
#include "flowmorph/geometry/primitives.hpp"
#include "flowmorph/numerics/rng.hpp"
#include "flowmorph/ode/deform.hpp"
#include "flowmorph/training/train.hpp"
#include "oracles.hpp"

using namespace fm::canonical;
using fm::geometry::Mesh;
using fm::numerics::Rng;
using fm::ode::OdeConfig;

namespace {

FlowModel model(std::uint64_t seed, int c = 4) {
  fm::flow::FlowConfig cfg;
  cfg.width = 16;
  cfg.latent_dim = c;
  return FlowModel::create(cfg, seed);
}

Vec code(Rng& rng, int c) {
  Vec z(c);
  for (int k = 0; k < c; ++k) z[k] = rng.normal(0.0, 0.5);
  return z;
}

Mesh permuted(const Mesh& m, const std::vector<int>& perm) {
  // Vertex k of the result is vertex perm[k] of m.
  Mesh out = m;
  std::vector<int> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.vertices.row(static_cast<Eigen::Index>(k)) = m.vertices.row(perm[k]);
    inv[static_cast<std::size_t>(perm[k])] = static_cast<int>(k);
  }
  for (auto& f : out.faces)
    for (int& v : f) v = inv[static_cast<std::size_t>(v)];
  if (m.has_labels())
    for (std::size_t k = 0; k < perm.size(); ++k) out.labels[k] = m.labels[static_cast<std::size_t>(perm[k])];
  return out;
}

std::vector<int> shuffled(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[static_cast<std::size_t>(i)], p[rng.index(static_cast<std::uint64_t>(i + 1))]);
  return p;
}

Mesh labeled(const Mesh& m, int split_axis = 1) {
  Mesh out = m;
  out.labels.resize(static_cast<std::size_t>(m.vertex_count()));
  for (Eigen::Index v = 0; v < m.vertex_count(); ++v) out.labels[static_cast<std::size_t>(v)] = m.vertices(v, split_axis) > 0;
  return out;
}

}  // namespace

TEST_CASE("canonicalize") {
  const FlowModel m = model(2);
  const Mesh box = fm::geometry::box_surface({0.6, 0.4, 0.3}, {3, 2, 2});
  CHECK(canonicalize(m, box, Vec::Zero(4), OdeConfig::dopri5(1e-6, 1e-6)).vertices == box.vertices);

  Rng rng(4);
  const Vec z = code(rng, 4);
  const auto cfg = OdeConfig::dopri5(1e-8, 1e-8);
  const Mesh c = canonicalize(m, box, z, cfg);
  CHECK(c.vertex_count() == box.vertex_count());
  CHECK(c.faces == box.faces);
  CHECK((c.vertices - box.vertices).cwiseAbs().maxCoeff() > 1e-3);
  const Mat back = fm::ode::deform(m, fm::flow::PairContext(Vec::Zero(4), z), c.vertices, cfg);
  CHECK((back - box.vertices).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("match_points and naive correspondence against brute force") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Mat a(200, 3), b(150, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-1, 1);
    b.row(7) = b.row(3);  // duplicate target: the lower index must win
    a.row(0) = b.row(3);
    const auto c = match_points(a, b);
    REQUIRE(c.size() == 200);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double sq = 0.0;
      CHECK(c.target[static_cast<std::size_t>(i)] == oracle::nearest(b, a.row(i).transpose(), &sq));
      CHECK(c.distance[static_cast<std::size_t>(i)] == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
    }
    CHECK(c.target[0] == 3);
  }
  const Mesh s = fm::geometry::icosphere(2, 0.4);
  const auto id = naive_correspond(s, s);
  for (std::size_t i = 0; i < id.size(); ++i) CHECK(id.target[i] == static_cast<int>(i));
}

TEST_CASE("correspond") {
  const FlowModel m = model(5);
  Rng rng(9);
  const Mesh x = fm::geometry::box_surface({0.7, 0.5, 0.3}, {3, 2, 2});
  const Vec z = code(rng, 4);
  const auto cfg = OdeConfig::dopri5(1e-6, 1e-6);

  SUBCASE("identical shape and code gives the identity") {
    const auto c = correspond(m, x, z, x, z, cfg);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c.target[i] == static_cast<int>(i));
      CHECK(c.distance[i] == 0.0);
    }
  }
  SUBCASE("a vertex-permuted copy recovers the permutation") {
    const auto perm = shuffled(static_cast<int>(x.vertex_count()), rng);
    const Mesh y = permuted(x, perm);
    const auto c = correspond(m, x, z, y, z, cfg);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(perm[static_cast<std::size_t>(c.target[i])] == static_cast<int>(i));
    // Distances are unchanged by the relabeling, up to the adaptive step control.
    const auto plain = correspond(m, x, z, x, z, cfg);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.distance[i] == doctest::Approx(plain.distance[i]).epsilon(1e-8));
  }
  SUBCASE("zero flow reduces to the naive matching") {
    FlowModel zero = m;
    for (auto& l : zero.backbone.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    const Mesh y = fm::geometry::icosphere(1, 0.4);
    const auto c = correspond(zero, x, z, y, code(rng, 4), cfg);
    const auto n = naive_correspond(x, y);
    CHECK(c.target == n.target);
    CHECK(c.distance == n.distance);
  }
  SUBCASE("brute force in canonical space") {
    const Mesh y = fm::geometry::box_surface({1.2, 0.5, 0.3}, {3, 2, 2});
    const Vec zy = code(rng, 4);
    const auto c = correspond(m, x, z, y, zy, cfg);
    const Mat cx = canonicalize(m, x, z, cfg).vertices;
    const Mat cy = canonicalize(m, y, zy, cfg).vertices;
    for (Eigen::Index i = 0; i < cx.rows(); ++i)
      CHECK(c.target[static_cast<std::size_t>(i)] == oracle::nearest(cy, cx.row(i).transpose()));
  }
}

TEST_CASE("a trained box pair matches corners to corners") {
  const Mesh box = fm::geometry::box_surface({0.5, 0.5, 0.5}, {1, 1, 1});
  const Mesh stretched = fm::geometry::box_surface({0.9, 0.5, 0.5}, {1, 1, 1});
  fm::training::TrainConfig cfg;
  cfg.steps = 40;
  cfg.batch_size = 1;
  cfg.samples = 128;
  cfg.flow.width = 16;
  cfg.flow.latent_dim = 4;
  cfg.learning_rate = 3e-3;
  cfg.seed = 2;
  const auto ckpt = fm::training::train({box, stretched}, cfg);
  const auto ode = OdeConfig::dopri5(1e-6, 1e-6);
  const auto c = correspond(ckpt.model, box, ckpt.code(0), stretched, ckpt.code(1), ode);
  const Mat cx = canonicalize(ckpt.model, box, ckpt.code(0), ode).vertices;
  const Mat cy = canonicalize(ckpt.model, stretched, ckpt.code(1), ode).vertices;
  for (Eigen::Index i = 0; i < box.vertex_count(); ++i) {
    const int t = c.target[static_cast<std::size_t>(i)];
    CHECK(t == oracle::nearest(cy, cx.row(i).transpose()));
    // Same octant.
    CHECK((box.vertices.row(i).array().sign() == stretched.vertices.row(t).array().sign()).all());
  }
}

TEST_CASE("semantic matching score") {
  const Mesh a = labeled(fm::geometry::icosphere(2, 0.5));
  const auto id = naive_correspond(a, a);
  const auto r = sms(a, a, id, id);
  CHECK(r.score == 1.0);
  CHECK(r.forward == 1.0);
  CHECK(r.backward == 1.0);
  CHECK(r.matched == 2 * static_cast<std::size_t>(a.vertex_count()));

  Mesh other = a;
  for (int& l : other.labels) l += 10;
  CHECK(sms(a, other, id, id).score == 0.0);

  // Labels split on y on one side and on x on the other: about half agree.
  const Mesh b = labeled(fm::geometry::icosphere(2, 0.5), 0);
  const auto half = sms(a, b, id, id);
  CHECK(half.score == doctest::Approx(0.5).epsilon(0.15));
  CHECK(half.score == doctest::Approx(0.5 * (half.forward + half.backward)));

  Mesh bare = a;
  bare.labels.clear();
  CHECK_THROWS_AS(sms(a, bare, id, id), std::invalid_argument);
  Correspondence broken = id;
  broken.target[0] = 100000;
  CHECK_THROWS_AS(sms(a, a, broken, id), std::out_of_range);
}

TEST_CASE("correspondence csv") {
  Correspondence c;
  c.target = {2, 0, 1};
  c.distance = {0.5, 0.0, 0.25};
  const auto path = std::filesystem::temp_directory_path() / "flowmorph_corr.csv";
  save_correspondence_csv(c, path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text == "source,target,distance\n0,2,0.5\n1,0,0\n2,1,0.25\n");
}
