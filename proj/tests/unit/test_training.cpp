#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "flowmorph/flow/taped.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/geometry/primitives.hpp"
#include "flowmorph/numerics/rng.hpp"
#include "flowmorph/training/checkpoint.hpp"
#include "flowmorph/training/losses.hpp"
#include "flowmorph/training/train.hpp"
#include "oracles.hpp"

using namespace fm::training;
using fm::geometry::Mesh;
using fm::numerics::Rng;
using fm::ode::OdeConfig;
namespace fs = std::filesystem;

namespace {

Mat random_cloud(Rng& rng, int n, double half = 0.5) {
  Mat m(n, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-half, half);
  return m;
}

Vec random_code(Rng& rng, int c, double sd = 0.3) {
  Vec z(c);
  for (int i = 0; i < c; ++i) z[i] = rng.normal(0.0, sd);
  return z;
}

FlowModel small_model(std::uint64_t seed, fm::flow::SignKind sign = fm::flow::SignKind::hub, int c = 4) {
  fm::flow::FlowConfig cfg;
  cfg.width = 8;
  cfg.latent_dim = c;
  cfg.sign = sign;
  return FlowModel::create(cfg, seed);
}

// Per-edge recomputation from the faces, independent of unique_edges.
double edge_oracle(const Mesh& m, const Mat& after) {
  std::set<std::pair<int, int>> edges;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) edges.insert(std::minmax(f[k], f[(k + 1) % 3]));
  double sum = 0.0;
  int count = 0;
  for (const auto& [a, b] : edges) {
    const double l0 = (m.vertices.row(a) - m.vertices.row(b)).norm();
    if (l0 == 0.0) continue;
    const double l1 = (after.row(a) - after.row(b)).norm();
    sum += ((l1 - l0) / l0) * ((l1 - l0) / l0);
    ++count;
  }
  return count ? sum / count : 0.0;
}

std::vector<Mesh> toy_shapes() {
  return {fm::geometry::icosphere(1, 0.35), fm::geometry::box_surface({0.8, 0.3, 0.3}, {2, 1, 1}),
          fm::geometry::box_surface({0.3, 0.6, 0.4}, {1, 2, 1})};
}

TrainConfig tiny_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.steps = 4;
  cfg.batch_size = 2;
  cfg.samples = 48;
  cfg.seed = seed;
  cfg.flow.width = 8;
  cfg.flow.latent_dim = 4;
  cfg.ode = OdeConfig::rk4(3);
  cfg.learning_rate = 1e-2;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flowmorph_training_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_checkpoint(const Checkpoint& a, const Checkpoint& b) {
  if (a.latents != b.latents || a.model.backbone.layers.size() != b.model.backbone.layers.size()) return false;
  for (std::size_t k = 0; k < a.model.backbone.layers.size(); ++k) {
    if (a.model.backbone.layers[k].weight != b.model.backbone.layers[k].weight) return false;
    if (a.model.backbone.layers[k].bias != b.model.backbone.layers[k].bias) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("edge regularizer") {
  const Mesh m = fm::geometry::icosphere(1, 0.5);
  CHECK(edge_regularizer(m, m.vertices) == 0.0);
  for (double s : {0.5, 1.3, 2.0}) CHECK(std::abs(edge_regularizer(m, m.vertices * s) - (s - 1) * (s - 1)) < 1e-14);
  Rng rng(3);
  const Mat after = m.vertices + 0.01 * random_cloud(rng, static_cast<int>(m.vertex_count()));
  CHECK(std::abs(edge_regularizer(m, after) - edge_oracle(m, after)) <= 1e-12);
  CHECK_THROWS_AS(edge_regularizer(m, after.topRows(3)), std::invalid_argument);

  SUBCASE("zero-length edges are skipped") {
    Mesh d = m;
    d.vertices.row(1) = d.vertices.row(0);
    const Mat moved = d.vertices * 1.5;
    CHECK(std::abs(edge_regularizer(d, moved) - 0.25) < 1e-14);
  }
  SUBCASE("edge subsets") {
    Rng pick(5);
    const auto all = select_edges(m, 100000, pick);
    CHECK(all.a.size() == fm::geometry::unique_edges(m.faces).size());
    const Mat scaled = m.vertices * 1.2;
    Mat rows(static_cast<Eigen::Index>(all.vertices.size()), 3);
    for (std::size_t r = 0; r < all.vertices.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = scaled.row(all.vertices[r]);
    CHECK(std::abs(edge_regularizer(all, rows) - edge_regularizer(m, scaled)) < 1e-14);
    const auto few = select_edges(m, 10, pick);
    CHECK(few.a.size() == 10);
    Tape tape;
    const Var v = tape.constant(rows.topRows(0));
    (void)v;
    Mat few_rows(static_cast<Eigen::Index>(few.vertices.size()), 3);
    for (std::size_t r = 0; r < few.vertices.size(); ++r) few_rows.row(static_cast<Eigen::Index>(r)) = scaled.row(few.vertices[r]);
    const Var e = edge_regularizer_taped(tape.constant(few_rows), few);
    CHECK(std::abs(tape.value(e)(0, 0) - 0.04) < 1e-14);
  }
}

TEST_CASE("vertex l2 loss") {
  Mat a = Mat::Zero(4, 3), b = Mat::Zero(4, 3);
  CHECK(vertex_l2_loss(a, b) == 0.0);
  b(2, 0) = 1.0;
  CHECK(vertex_l2_loss(a, b) == 0.25);
  Rng rng(7);
  const Mat p = random_cloud(rng, 50), q = random_cloud(rng, 50);
  double ref = 0.0;
  for (int i = 0; i < 50; ++i)
    for (int k = 0; k < 3; ++k) ref += (p(i, k) - q(i, k)) * (p(i, k) - q(i, k));
  ref /= 50.0;
  CHECK(std::abs(vertex_l2_loss(p, q) - ref) <= 1e-14);
  Tape tape;
  CHECK(std::abs(tape.value(vertex_l2_taped(tape.constant(p), tape.constant(q)))(0, 0) - ref) <= 1e-14);
  CHECK_THROWS_AS(vertex_l2_loss(p, q.topRows(10)), std::invalid_argument);
}

TEST_CASE("taped chamfer matches the brute-force value and finite differences") {
  Rng rng(11);
  const Mat a = random_cloud(rng, 15), b = random_cloud(rng, 20);
  Tape tape;
  const Var va = tape.leaf(a);
  const Var c = chamfer_taped(va, tape.constant(b));
  CHECK(std::abs(tape.value(c)(0, 0) - oracle::chamfer_sq(a, b)) < 1e-14);
  tape.backward(c);
  const Mat g = tape.grad(va);
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  const auto fd = oracle::fd_gradient(
      [&](const Eigen::VectorXd& v) { return oracle::chamfer_sq(Eigen::Map<const Mat>(v.data(), 15, 3), b); }, flat,
      1e-7);
  CHECK(oracle::max_rel_error(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), fd) < 1e-4);
}

TEST_CASE("hub and spoke loss") {
  const FlowModel m = small_model(3);
  Rng rng(4);
  const Mat pi = random_cloud(rng, 30), pj = random_cloud(rng, 30);
  const Vec zi = random_code(rng, 4), zj = random_code(rng, 4);
  const auto cfg = OdeConfig::rk4(5);
  const double ij = hub_spoke_loss(m, zi, zj, pi, pj, cfg);
  const double ji = hub_spoke_loss(m, zj, zi, pj, pi, cfg);
  CHECK(ij >= 0.0);
  CHECK(std::abs(ij - ji) <= 1e-12);

  CHECK(hub_spoke_loss(m, zi, zi, pi, pi, OdeConfig::rk4(20)) < 1e-8);

  FlowModel zero = m;
  for (auto& l : zero.backbone.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(hub_spoke_loss(zero, zi, zj, pi, pi, cfg) == 0.0);

  SUBCASE("taped value and latent gradient") {
    Tape tape;
    const auto vars = fm::flow::record_flow(tape, m, false);
    const Var vi = tape.leaf(zi.transpose());
    const Var loss = hub_spoke_taped(vars, vi, tape.constant(zj.transpose()), tape.constant(pi), tape.constant(pj), 5);
    CHECK(std::abs(tape.value(loss)(0, 0) - ij) < 1e-12);
    tape.backward(loss);
    const Mat g = tape.grad(vi);
    const auto fd = oracle::fd_gradient([&](const Eigen::VectorXd& z) { return hub_spoke_loss(m, z, zj, pi, pj, cfg); },
                                        zi, 1e-6);
    CHECK(oracle::max_rel_error(g.transpose(), fd) < 1e-4);
  }
}

TEST_CASE("pairwise loss") {
  const FlowModel hub = small_model(3);
  Rng rng(8);
  const Mat pi = random_cloud(rng, 25), pj = random_cloud(rng, 25);
  const Vec zi = random_code(rng, 4), zj = random_code(rng, 4);
  const auto cfg = OdeConfig::rk4(5);
  CHECK_THROWS_AS(pairwise_loss(hub, zi, zj, pi, pj, cfg), std::invalid_argument);

  const FlowModel odd = small_model(3, fm::flow::SignKind::odd_mlp);
  CHECK(pairwise_loss(odd, zi, zi, pi, pi, cfg) == 0.0);
  CHECK(std::abs(pairwise_loss(odd, zi, zj, pi, pj, cfg) - pairwise_loss(odd, zj, zi, pj, pi, cfg)) <= 1e-12);
  const Vec hubcode = Vec::Zero(4);
  CHECK(std::abs(pairwise_loss(odd, zi, hubcode, pi, pj, cfg) - hub_spoke_loss(odd, zi, hubcode, pi, pj, cfg)) <=
        1e-12);
}

TEST_CASE("config parsing and manifests") {
  const TrainConfig c = parse_train_config("# comment\nlr = 0.01\nbatch_size=3\nsteps = 7  # trailing\nmode = divfree\n"
                                           "symmetry = yz\nseed = 12\nrk4_steps = 6\n");
  CHECK(c.learning_rate == 0.01);
  CHECK(c.batch_size == 3);
  CHECK(c.steps == 7);
  CHECK(c.flow.mode == fm::flow::Mode::divergence_free);
  CHECK(c.flow.symmetry == fm::flow::Symmetry::plane_yz);
  CHECK(c.seed == 12);
  CHECK(c.ode.steps == 6);
  CHECK(c.samples == 512);
  CHECK_THROWS_AS(parse_train_config("bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("steps = many\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("edge_weight = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("samples = 0\n"), std::invalid_argument);

  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  const fs::path dir = scratch("manifest");
  fs::create_directories(dir / "m");
  fm::geometry::save_mesh(fm::geometry::unit_cube(), dir / "m" / "a.obj");
  std::ofstream(dir / "data.json") << R"({"shapes": [{"mesh": "m/a.obj"}, {"mesh": "m/a.obj", "split": "test"}]})";
  const auto man = DatasetManifest::load(dir / "data.json");
  REQUIRE(man.entries.size() == 2);
  CHECK(man.entries[0].mesh == dir / "m" / "a.obj");
  CHECK(man.of(Split::test).size() == 1);
  std::ofstream(dir / "missing.json") << R"({"shapes": [{"mesh": "m/none.obj"}]})";
  CHECK_THROWS(DatasetManifest::load(dir / "missing.json"));
  std::ofstream(dir / "notrain.json") << R"({"shapes": [{"mesh": "m/a.obj", "split": "val"}]})";
  CHECK_THROWS(DatasetManifest::load(dir / "notrain.json"));
}

TEST_CASE("training determinism and persistence") {
  const auto shapes = toy_shapes();
  TrainConfig cfg = tiny_config(9);

  SUBCASE("zero steps is the initialization") {
    cfg.steps = 0;
    const Checkpoint c = train(shapes, cfg);
    CHECK(same_checkpoint(c, initial_checkpoint(3, cfg)));
    CHECK(c.step == 0);
    const double sd = std::sqrt(c.latents.array().square().mean());
    CHECK(sd > 0.03);
    CHECK(sd < 0.3);
  }
  SUBCASE("equal seeds give equal bytes regardless of threads") {
    const fs::path dir = scratch("det");
    cfg.threads = 1;
    const Checkpoint a = train(shapes, cfg);
    cfg.threads = 3;
    const Checkpoint b = train(shapes, cfg);
    save_checkpoint(dir / "a", a);
    save_checkpoint(dir / "b", b);
    CHECK(slurp(dir / "a" / "tensors.bin") == slurp(dir / "b" / "tensors.bin"));
    CHECK(!same_checkpoint(a, initial_checkpoint(3, cfg)));

    const Checkpoint loaded = load_checkpoint(dir / "a");
    save_checkpoint(dir / "c", loaded);
    CHECK(slurp(dir / "a" / "tensors.bin") == slurp(dir / "c" / "tensors.bin"));
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "c" / "manifest.json"));

    cfg.seed = 10;
    CHECK(!same_checkpoint(a, train(shapes, cfg)));
  }
  SUBCASE("only batch latents move") {
    cfg.batch_size = 1;
    cfg.steps = 1;
    const Checkpoint init = initial_checkpoint(3, cfg);
    const Checkpoint c = train(shapes, cfg);
    int moved = 0;
    for (int r = 0; r < 3; ++r) moved += c.latents.row(r) != init.latents.row(r);
    CHECK(moved == 2);
  }
  SUBCASE("edge term is logged") {
    cfg.edge_weight = 1.0;
    cfg.max_edges = 20;
    std::vector<StepLog> logs;
    TrainHooks hooks;
    hooks.on_step = [&](const StepLog& l) { logs.push_back(l); };
    train(shapes, cfg, hooks);
    REQUIRE(logs.size() == 4);
    for (const auto& l : logs) {
      CHECK(l.edge > 0.0);
      CHECK(std::abs(l.loss - (l.chamfer + l.edge)) < 1e-15);
    }
  }
}

TEST_CASE("non-finite loss aborts with a diagnostic checkpoint") {
  auto shapes = toy_shapes();
  shapes[1].vertices *= 1e200;
  const fs::path dir = scratch("diag");
  TrainHooks hooks;
  hooks.diagnostic_dir = dir / "diagnostic";
  CHECK_THROWS_AS(train(shapes, tiny_config(1), hooks), TrainingError);
  CHECK(fs::exists(dir / "diagnostic" / "manifest.json"));
}

TEST_CASE("train_manifest writes metrics and a loadable checkpoint") {
  const fs::path dir = scratch("manifest_train");
  const auto shapes = toy_shapes();
  for (int i = 0; i < 3; ++i) fm::geometry::save_mesh(shapes[static_cast<std::size_t>(i)], dir / ("s" + std::to_string(i) + ".obj"));
  std::ofstream(dir / "data.json") << R"({"shapes": [{"mesh": "s0.obj"}, {"mesh": "s1.obj"}, {"mesh": "s2.obj"}]})";
  TrainConfig cfg = tiny_config(2);
  cfg.checkpoint_every = 2;
  const Checkpoint c = train_manifest(DatasetManifest::load(dir / "data.json"), cfg, dir / "out");
  std::ifstream metrics(dir / "out" / "metrics.csv");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) ++lines;
  CHECK(lines == 5);
  const Checkpoint back = load_checkpoint(dir / "out");
  CHECK(same_checkpoint(c, back));
  CHECK(back.step == 4);
  CHECK(back.config["steps"] == 4);
  const auto loaded = load_training_shapes(back);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[2].vertex_count() == shapes[2].vertex_count());
}
