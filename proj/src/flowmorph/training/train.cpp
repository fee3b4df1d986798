#include "flowmorph/training/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/numerics/adam.hpp"
#include "flowmorph/numerics/parallel.hpp"
#include "flowmorph/training/losses.hpp"

namespace fm::training {

namespace {

using Pair = std::pair<int, int>;

std::vector<Mat*> parameters(flow::FlowModel& m) {
  std::vector<Mat*> p;
  for (auto& l : m.backbone.layers) {
    p.push_back(&l.weight);
    p.push_back(&l.bias);
  }
  for (auto& l : m.sign_net.layers) p.push_back(&l.weight);  // biases stay zero
  return p;
}

std::vector<Mat> flatten(const flow::FlowModel& g) {
  std::vector<Mat> out;
  for (const auto& l : g.backbone.layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  for (const auto& l : g.sign_net.layers) out.push_back(l.weight);
  return out;
}

// Unordered pairs i < j, distinct within the batch.
std::vector<Pair> sample_pairs(int n, int batch, numerics::Rng& rng) {
  const std::uint64_t total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  const std::uint64_t want = std::min<std::uint64_t>(static_cast<std::uint64_t>(batch), total);
  std::vector<std::uint64_t> codes;
  if (total <= 4 * want + 64) {
    std::vector<std::uint64_t> all(total);
    for (std::uint64_t k = 0; k < total; ++k) all[k] = k;
    for (std::uint64_t k = 0; k < want; ++k) std::swap(all[k], all[k + rng.index(total - k)]);
    codes.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(want));
  } else {
    std::set<std::uint64_t> seen;
    while (codes.size() < want) {
      const std::uint64_t c = rng.index(total);
      if (seen.insert(c).second) codes.push_back(c);
    }
  }
  std::vector<Pair> pairs;
  for (std::uint64_t c : codes) {
    // Row-major enumeration of the strict upper triangle.
    int i = 0;
    std::uint64_t rest = c;
    while (rest >= static_cast<std::uint64_t>(n - 1 - i)) {
      rest -= static_cast<std::uint64_t>(n - 1 - i);
      ++i;
    }
    pairs.emplace_back(i, i + 1 + static_cast<int>(rest));
  }
  return pairs;
}

Mat gather(const Mat& v, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), v.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = v.row(rows[r]);
  return out;
}

struct PairResult {
  std::vector<Mat> grads;
  Mat grad_zi, grad_zj;
  double chamfer = 0.0;
  double edge = 0.0;
};

bool all_finite(const PairResult& r) {
  if (!std::isfinite(r.chamfer) || !std::isfinite(r.edge)) return false;
  if (!r.grad_zi.allFinite() || !r.grad_zj.allFinite()) return false;
  return std::all_of(r.grads.begin(), r.grads.end(), [](const Mat& g) { return g.allFinite(); });
}

}  // namespace

Checkpoint initial_checkpoint(int shape_count, const TrainConfig& cfg) {
  cfg.validate();
  numerics::Rng rng(cfg.seed);
  Checkpoint c;
  c.model = flow::FlowModel::create(cfg.flow, rng.next_u64());
  c.latents.resize(shape_count, cfg.flow.latent_dim);
  for (Eigen::Index r = 0; r < c.latents.rows(); ++r)
    for (Eigen::Index k = 0; k < c.latents.cols(); ++k) c.latents(r, k) = rng.normal(0.0, cfg.latent_std);
  c.seed = cfg.seed;
  c.config = to_json(cfg);
  return c;
}

Checkpoint train(const std::vector<geometry::Mesh>& shapes, const TrainConfig& cfg, const TrainHooks& hooks) {
  const int n = static_cast<int>(shapes.size());
  if (n < 2) throw std::invalid_argument("training needs at least two shapes");
  for (const auto& s : shapes) s.validate();
  Checkpoint ckpt = initial_checkpoint(n, cfg);
  numerics::Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  numerics::Adam net_opt;
  std::vector<numerics::Adam> latent_opt(static_cast<std::size_t>(n));
  const bool with_edges = cfg.edge_weight > 0.0;

  for (long step = 0; step < cfg.steps; ++step) {
    numerics::Rng step_rng = rng.fork(static_cast<std::uint64_t>(step));
    const auto pairs = sample_pairs(n, cfg.batch_size, step_rng);
    std::vector<int> used;
    for (const auto& [i, j] : pairs) {
      used.push_back(i);
      used.push_back(j);
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());

    std::vector<Mat> samples(static_cast<std::size_t>(n));
    std::vector<EdgeSubset> edges(static_cast<std::size_t>(n));
    std::vector<Mat> edge_points(static_cast<std::size_t>(n));
    for (int s : used) {
      const auto u = static_cast<std::size_t>(s);
      samples[u] = geometry::sample_surface(shapes[u], static_cast<std::size_t>(cfg.samples), step_rng.next_u64()).points;
      if (with_edges) {
        edges[u] = select_edges(shapes[u], static_cast<std::size_t>(cfg.max_edges), step_rng);
        edge_points[u] = gather(shapes[u].vertices, edges[u].vertices);
      }
    }

    std::vector<PairResult> results(pairs.size());
    const flow::FlowModel& model = ckpt.model;
    numerics::parallel_for(pairs.size(), cfg.threads, [&](std::size_t k) {
      const auto [i, j] = pairs[k];
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      Tape tape;
      const auto vars = flow::record_flow(tape, model, true);
      const Var zi = tape.leaf(ckpt.latents.row(i));
      const Var zj = tape.leaf(ckpt.latents.row(j));
      const Var ch = hub_spoke_taped(vars, zi, zj, tape.constant(samples[ui]), tape.constant(samples[uj]), cfg.ode.steps);
      Var total = ch;
      PairResult& r = results[k];
      if (with_edges) {
        const Var ei = edge_regularizer_taped(
            through_hub_taped(vars, zi, zj, tape.constant(edge_points[ui]), cfg.ode.steps), edges[ui]);
        const Var ej = edge_regularizer_taped(
            through_hub_taped(vars, zj, zi, tape.constant(edge_points[uj]), cfg.ode.steps), edges[uj]);
        const Var e = add(ei, ej);
        r.edge = tape.value(e)(0, 0);
        total = add(ch, scale(e, cfg.edge_weight));
      }
      r.chamfer = tape.value(ch)(0, 0);
      tape.backward(total);
      r.grads = flatten(flow::flow_gradients(tape, vars, model));
      r.grad_zi = tape.grad(zi);
      r.grad_zj = tape.grad(zj);
    });

    // Ordered reduction keeps the result independent of scheduling.
    const double inv = 1.0 / static_cast<double>(pairs.size());
    std::vector<Mat> grads;
    std::vector<Mat> latent_grads(static_cast<std::size_t>(n));
    StepLog log;
    log.step = step;
    bool finite = true;
    for (std::size_t k = 0; k < results.size(); ++k) {
      PairResult& r = results[k];
      finite = finite && all_finite(r);
      if (grads.empty()) {
        grads = r.grads;
        for (auto& g : grads) g *= inv;
      } else {
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += r.grads[p] * inv;
      }
      for (const auto& [s, g] : {std::pair{pairs[k].first, &r.grad_zi}, std::pair{pairs[k].second, &r.grad_zj}}) {
        Mat& acc = latent_grads[static_cast<std::size_t>(s)];
        if (acc.size() == 0) acc = Mat::Zero(1, cfg.flow.latent_dim);
        acc += *g * inv;
      }
      log.chamfer += r.chamfer * inv;
      log.edge += r.edge * inv;
    }
    log.loss = log.chamfer + cfg.edge_weight * log.edge;
    if (!finite || !std::isfinite(log.loss)) {
      ckpt.step = step;
      if (!hooks.diagnostic_dir.empty()) save_checkpoint(hooks.diagnostic_dir, ckpt);
      throw TrainingError("non-finite loss at step " + std::to_string(step) +
                          (hooks.diagnostic_dir.empty() ? std::string()
                                                        : "; state written to " + hooks.diagnostic_dir.string()));
    }

    const auto params = parameters(ckpt.model);
    net_opt.step(params, grads, cfg.learning_rate);
    // Sparse update: only codes that took part in this step move, and their
    // moment estimates advance only then.
    for (int s : used) {
      Mat row = ckpt.latents.row(s);
      Mat* slot[] = {&row};
      latent_opt[static_cast<std::size_t>(s)].step(slot, std::span<const Mat>(&latent_grads[static_cast<std::size_t>(s)], 1),
                                                   cfg.learning_rate);
      ckpt.latents.row(s) = row;
    }
    ckpt.step = step + 1;
    if (hooks.on_step) hooks.on_step(log);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && ckpt.step % cfg.checkpoint_every == 0 &&
        ckpt.step != cfg.steps)
      hooks.on_checkpoint(ckpt);
  }
  return ckpt;
}

geometry::Mesh load_dataset_mesh(const DatasetManifest::Entry& entry, bool normalize) {
  geometry::Mesh m = geometry::load_mesh(entry.mesh);
  if (entry.labels) m.labels = geometry::load_labels(*entry.labels);
  if (normalize) m = geometry::normalize_to_unit(m).mesh;
  m.validate();
  return m;
}

Checkpoint train_manifest(const DatasetManifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::vector<geometry::Mesh> shapes;
  std::vector<std::string> paths;
  for (const auto& e : manifest.of(Split::train)) {
    shapes.push_back(load_dataset_mesh(e, cfg.normalize));
    paths.push_back(std::filesystem::absolute(e.mesh).lexically_normal().string());
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(out_dir / "metrics.csv");
  if (!metrics) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
  metrics << "step,loss,chamfer,edge\n";
  metrics.precision(17);
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& l) {
    metrics << l.step << "," << l.loss << "," << l.chamfer << "," << l.edge << "\n";
  };
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    Checkpoint copy = c;
    copy.shapes = paths;
    save_checkpoint(out_dir, copy);
    metrics.flush();
  };
  hooks.diagnostic_dir = out_dir / "diagnostic";
  Checkpoint c = [&] {
    try {
      return train(shapes, cfg, hooks);
    } catch (...) {
      metrics.flush();
      throw;
    }
  }();
  c.shapes = paths;
  save_checkpoint(out_dir, c);
  return c;
}

std::vector<geometry::Mesh> load_training_shapes(const Checkpoint& ckpt) {
  if (ckpt.shapes.size() != static_cast<std::size_t>(ckpt.shape_count()))
    throw std::runtime_error("checkpoint does not record its training shape paths");
  const bool normalize = ckpt.config.value("normalize", false);
  std::vector<geometry::Mesh> out;
  for (const auto& p : ckpt.shapes) {
    DatasetManifest::Entry e;
    e.mesh = p;
    out.push_back(load_dataset_mesh(e, normalize));
  }
  return out;
}

}  // namespace fm::training
