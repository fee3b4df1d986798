#include "flowmorph/diagnostics/metrics.hpp"

#include <fstream>
#include <stdexcept>

#include "flowmorph/numerics/rng.hpp"

namespace fm::diagnostics {

void MetricsReport::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "shape,source,chamfer_l1,normal_consistency\n";
  for (const auto& r : rows) out << r.shape << "," << r.source << "," << r.chamfer_l1 << "," << r.normal_consistency << "\n";
  out << "mean,," << mean_chamfer_l1 << "," << mean_normal_consistency << "\n";
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"shape", r.shape}, {"source", r.source}, {"chamfer_l1", r.chamfer_l1},
                   {"normal_consistency", r.normal_consistency}});
  return {{"rows", arr}, {"mean_chamfer_l1", mean_chamfer_l1}, {"mean_normal_consistency", mean_normal_consistency}};
}

MetricsReport run_metrics(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& training_shapes,
                          const std::vector<NamedMesh>& eval_shapes, const MetricsOptions& opts) {
  if (eval_shapes.empty()) throw std::invalid_argument("metrics: the evaluation split is empty");
  numerics::Rng rng(opts.seed);
  MetricsReport rep;
  for (const auto& s : eval_shapes) {
    const std::uint64_t obs_seed = rng.next_u64();
    const std::uint64_t run_seed = rng.next_u64();
    const std::uint64_t eval_seed = rng.next_u64();
    const auto obs = embedding::noisy_observation(s.mesh, opts.observation_points, opts.noise, obs_seed);
    const auto r = embedding::reconstruct(ckpt, training_shapes, obs, opts.embed, run_seed);
    const auto m = embedding::eval_reconstruction(r.best().mesh, s.mesh, opts.eval_samples, eval_seed);
    rep.rows.push_back({s.name, r.best().shape, m.chamfer_l1, m.normal_consistency});
  }
  for (const auto& r : rep.rows) {
    rep.mean_chamfer_l1 += r.chamfer_l1;
    rep.mean_normal_consistency += r.normal_consistency;
  }
  rep.mean_chamfer_l1 /= static_cast<double>(rep.rows.size());
  rep.mean_normal_consistency /= static_cast<double>(rep.rows.size());
  return rep;
}

}  // namespace fm::diagnostics
