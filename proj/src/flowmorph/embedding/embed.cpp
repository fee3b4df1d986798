#include "flowmorph/embedding/embed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowmorph/geometry/chamfer.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/numerics/adam.hpp"
#include "flowmorph/numerics/parallel.hpp"
#include "flowmorph/training/losses.hpp"

namespace fm::embedding {

using numerics::Rng;
using numerics::Tape;
using numerics::Var;

namespace {

std::vector<Mat*> parameters(flow::FlowModel& m) {
  std::vector<Mat*> p;
  for (auto& l : m.backbone.layers) {
    p.push_back(&l.weight);
    p.push_back(&l.bias);
  }
  for (auto& l : m.sign_net.layers) p.push_back(&l.weight);
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

std::vector<int> choose(int n, int k, Rng& rng) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  if (k >= n) return ids;
  for (int i = 0; i < k; ++i)
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(i) + rng.index(static_cast<std::uint64_t>(n - i))]);
  ids.resize(static_cast<std::size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Training-shape samples, drawn once per call and only for shapes in use.
class SampleCache {
 public:
  SampleCache(const std::vector<geometry::Mesh>& shapes, int samples, Rng& rng) : shapes_(shapes), n_(samples) {
    for (std::size_t i = 0; i < shapes.size(); ++i) seeds_.push_back(rng.next_u64());
    cache_.resize(shapes.size());
  }
  void prepare(const std::vector<int>& ids) {
    for (int i : ids) {
      auto& c = cache_[static_cast<std::size_t>(i)];
      if (c.size() == 0)
        c = geometry::sample_surface(shapes_[static_cast<std::size_t>(i)], static_cast<std::size_t>(n_),
                                     seeds_[static_cast<std::size_t>(i)]).points;
    }
  }
  const Mat& operator[](int i) const { return cache_[static_cast<std::size_t>(i)]; }

 private:
  const std::vector<geometry::Mesh>& shapes_;
  int n_;
  std::vector<std::uint64_t> seeds_;
  std::vector<Mat> cache_;
};

// Sum over `ids` of the hub-and-spoke loss between the observation (code z)
// and each training shape, with the gradient w.r.t. z when requested.
double embed_objective(const training::Checkpoint& ckpt, const SampleCache& samples, const Mat& obs, const Mat& z,
                       const std::vector<int>& ids, int steps, int threads, Mat* grad) {
  std::vector<double> values(ids.size());
  std::vector<Mat> grads(ids.size());
  numerics::parallel_for(ids.size(), threads, [&](std::size_t k) {
    Tape tape;
    const auto vars = flow::record_flow(tape, ckpt.model, false);
    const Var zn = grad ? tape.leaf(z) : tape.constant(z);
    const Var zi = tape.constant(ckpt.latents.row(ids[k]));
    const Var l = training::hub_spoke_taped(vars, zn, zi, tape.constant(obs), tape.constant(samples[ids[k]]), steps);
    values[k] = tape.value(l)(0, 0);
    if (grad) {
      tape.backward(l);
      grads[k] = tape.grad(zn);
    }
  });
  double total = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) total += values[k];
  if (grad) {
    *grad = Mat::Zero(1, z.cols());
    for (const auto& g : grads) *grad += g;
  }
  return total;
}

void check_inputs(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& shapes, const Mat& obs) {
  if (obs.rows() == 0) throw std::invalid_argument("embed: empty observation");
  if (obs.cols() != 3 || !obs.allFinite()) throw std::invalid_argument("embed: observation must be finite N x 3 points");
  if (static_cast<int>(shapes.size()) != ckpt.shape_count())
    throw std::invalid_argument("embed: one training mesh per latent row expected");
  if (shapes.empty()) throw std::invalid_argument("embed: checkpoint has no training shapes");
}

}  // namespace

void EmbedConfig::validate() const {
  if (!(init_std >= 0.0)) throw std::invalid_argument("init_std must be non-negative");
  if (!(learning_rate > 0.0) || !(finetune_learning_rate > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (iterations < 0 || finetune_iterations < 0) throw std::invalid_argument("iteration counts must be non-negative");
  if (k < 1 || shapes_per_step < 1 || samples < 1 || eval_samples < 1)
    throw std::invalid_argument("k, shapes_per_step, samples and eval_samples must be at least 1");
  if (ode.solver != ode::OdeConfig::Solver::rk4) throw std::invalid_argument("embedding optimizes through rk4");
  ode.validate();
  eval_ode.validate();
}

nlohmann::json to_json(const EmbedConfig& c) {
  return {{"init_std", c.init_std},
          {"learning_rate", c.learning_rate},
          {"iterations", c.iterations},
          {"finetune_iterations", c.finetune_iterations},
          {"finetune_learning_rate", c.finetune_learning_rate},
          {"k", c.k},
          {"shapes_per_step", c.shapes_per_step},
          {"samples", c.samples},
          {"ode", c.ode.describe()},
          {"eval_ode", c.eval_ode.describe()},
          {"eval_samples", c.eval_samples}};
}

EmbedResult embed(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& shapes, const Mat& obs,
                  const EmbedConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_inputs(ckpt, shapes, obs);
  const int n = ckpt.shape_count();
  const int c = ckpt.model.config.latent_dim;
  Rng rng(seed);
  Mat z(1, c);
  for (int k = 0; k < c; ++k) z(0, k) = rng.normal(0.0, cfg.init_std);
  SampleCache samples(shapes, cfg.samples, rng);
  const bool full = n <= cfg.shapes_per_step;
  const std::vector<int> eval_ids = choose(n, cfg.shapes_per_step, rng);
  samples.prepare(eval_ids);

  EmbedResult r;
  std::vector<Mat> iterates;
  numerics::Adam opt;
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::vector<int> ids = full ? eval_ids : choose(n, cfg.shapes_per_step, rng);
    samples.prepare(ids);
    Mat g;
    const double v = embed_objective(ckpt, samples, obs, z, ids, cfg.ode.steps, cfg.threads, &g);
    r.objective.push_back(full ? v : embed_objective(ckpt, samples, obs, z, eval_ids, cfg.ode.steps, cfg.threads, nullptr));
    iterates.push_back(z);
    Mat* slot[] = {&z};
    opt.step(slot, std::span<const Mat>(&g, 1), cfg.learning_rate);
  }
  r.objective.push_back(embed_objective(ckpt, samples, obs, z, eval_ids, cfg.ode.steps, cfg.threads, nullptr));
  iterates.push_back(z);
  for (std::size_t k = 1; k < r.objective.size(); ++k)
    if (r.objective[k] < r.objective[static_cast<std::size_t>(r.best_iteration)]) r.best_iteration = static_cast<int>(k);
  r.code = iterates[static_cast<std::size_t>(r.best_iteration)].row(0).transpose();
  return r;
}

std::vector<Ranked> retrieve_topk(const Mat& table, const Vec& z, int k) {
  if (k < 1 || k > table.rows()) throw std::invalid_argument("retrieve_topk: k must be within [1, table size]");
  if (z.size() != table.cols()) throw std::invalid_argument("retrieve_topk: latent size mismatch");
  std::vector<Ranked> all;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    all.push_back({static_cast<int>(i), (table.row(i).transpose() - z).norm()});
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) { return a.distance < b.distance; });
  all.resize(static_cast<std::size_t>(k));
  return all;
}

ReconstructionResult reconstruct(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& shapes,
                                 const Mat& obs, const EmbedConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_inputs(ckpt, shapes, obs);
  if (cfg.k > ckpt.shape_count()) throw std::invalid_argument("reconstruct: k exceeds the number of training shapes");
  Rng rng(seed);
  const EmbedResult e = embed(ckpt, shapes, obs, cfg, rng.next_u64());
  ReconstructionResult r;
  r.code = e.code;
  r.embed_objective = e.objective;
  const auto top = retrieve_topk(ckpt.latents, e.code, cfg.k);
  std::vector<int> ids;
  for (const auto& t : top) ids.push_back(t.id);
  SampleCache samples(shapes, cfg.samples, rng);
  samples.prepare(ids);

  // Fine-tune the network on a clone; codes stay fixed.
  r.tuned = ckpt;
  const Mat zn = e.code.transpose();
  auto objective = [&](const flow::FlowModel& model, std::vector<Mat>* grads) {
    std::vector<double> values(ids.size());
    std::vector<std::vector<Mat>> per(ids.size());
    numerics::parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
      Tape tape;
      const auto vars = flow::record_flow(tape, model, grads != nullptr);
      const Var l = training::hub_spoke_taped(vars, tape.constant(ckpt.latents.row(ids[k])), tape.constant(zn),
                                              tape.constant(samples[ids[k]]), tape.constant(obs), cfg.ode.steps);
      values[k] = tape.value(l)(0, 0);
      if (grads) {
        tape.backward(l);
        per[k] = flatten(flow::flow_gradients(tape, vars, model));
      }
    });
    double total = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      total += values[k];
      if (!grads) continue;
      if (k == 0) *grads = per[0];
      else
        for (std::size_t p = 0; p < grads->size(); ++p) (*grads)[p] += per[k][p];
    }
    return total;
  };
  numerics::Adam opt;
  std::vector<flow::FlowModel> iterates;
  for (int it = 0; it < cfg.finetune_iterations; ++it) {
    std::vector<Mat> g;
    r.finetune_objective.push_back(objective(r.tuned.model, &g));
    iterates.push_back(r.tuned.model);
    opt.step(parameters(r.tuned.model), g, cfg.finetune_learning_rate);
  }
  r.finetune_objective.push_back(objective(r.tuned.model, nullptr));
  iterates.push_back(r.tuned.model);
  std::size_t best = 0;
  for (std::size_t k = 1; k < r.finetune_objective.size(); ++k)
    if (r.finetune_objective[k] < r.finetune_objective[best]) best = k;
  r.tuned.model = iterates[best];

  const std::uint64_t eval_seed = rng.next_u64();
  r.candidates.resize(ids.size());
  numerics::parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const int id = ids[k];
    const auto& src = shapes[static_cast<std::size_t>(id)];
    Candidate& c = r.candidates[k];
    c.shape = id;
    c.latent_distance = top[k].distance;
    c.mesh = geometry::with_vertices(
        src, training::through_hub(r.tuned.model, ckpt.code(id), e.code, src.vertices, cfg.eval_ode));
    const auto n = static_cast<std::size_t>(cfg.eval_samples);
    c.chamfer = geometry::chamfer(geometry::sample_surface(c.mesh, n, eval_seed).points, obs,
                                  geometry::ChamferVariant::l1_eval);
    c.raw_chamfer = geometry::chamfer(geometry::sample_surface(src, n, eval_seed).points, obs,
                                      geometry::ChamferVariant::l1_eval);
  });
  std::stable_sort(r.candidates.begin(), r.candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.chamfer < b.chamfer; });
  return r;
}

SurfaceMetrics eval_reconstruction(const geometry::Mesh& mesh, const geometry::Mesh& reference, std::size_t samples,
                                   std::uint64_t seed) {
  const auto a = geometry::sample_surface_detailed(mesh, samples, seed);
  const auto b = geometry::sample_surface_detailed(reference, samples, seed);
  const Mat na = geometry::face_normals(mesh);
  const Mat nb = geometry::face_normals(reference);
  const auto ab = geometry::nearest_indices(a.points, b.points);
  const auto ba = geometry::nearest_indices(b.points, a.points);
  auto directed = [](const geometry::SurfaceSample& p, const Mat& pn, const geometry::SurfaceSample& q, const Mat& qn,
                     const std::vector<int>& nn, double& dist, double& cosine) {
    dist = cosine = 0.0;
    for (Eigen::Index r = 0; r < p.points.rows(); ++r) {
      const int m = nn[static_cast<std::size_t>(r)];
      dist += (p.points.row(r) - q.points.row(m)).norm();
      cosine += std::abs(pn.row(p.face[static_cast<std::size_t>(r)]).dot(qn.row(q.face[static_cast<std::size_t>(m)])));
    }
    dist /= static_cast<double>(p.points.rows());
    cosine /= static_cast<double>(p.points.rows());
  };
  double d1, c1, d2, c2;
  directed(a, na, b, nb, ab, d1, c1);
  directed(b, nb, a, na, ba, d2, c2);
  return {0.5 * (d1 + d2), 0.5 * (c1 + c2)};
}

Mat noisy_observation(const geometry::Mesh& mesh, std::size_t n, double sigma, std::uint64_t seed) {
  Mat p = geometry::sample_surface(mesh, n, seed).points;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] += rng.normal(0.0, sigma);
  return p;
}

}  // namespace fm::embedding
