#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/ode/integrate.hpp"
#include "flowmorph/training/checkpoint.hpp"

namespace fm::embedding {

using flow::Vec;
using numerics::Mat;

struct EmbedConfig {
  double init_std = 1e-4;
  double learning_rate = 1e-2;
  int iterations = 30;
  int finetune_iterations = 30;
  double finetune_learning_rate = 1e-3;
  int k = 5;
  int shapes_per_step = 8;
  int samples = 512;  // surface points per training shape
  ode::OdeConfig ode = ode::OdeConfig::rk4(5);
  ode::OdeConfig eval_ode = ode::OdeConfig::dopri5(1e-4, 1e-4);
  int eval_samples = 2048;
  int threads = 0;

  void validate() const;
};

nlohmann::json to_json(const EmbedConfig& cfg);

struct EmbedResult {
  Vec code;
  // Objective on the fixed evaluation subset, per iterate (initial first).
  std::vector<double> objective;
  int best_iteration = 0;
};

// Optimizes a new latent code for the observation with the network frozen.
// The returned code is the best iterate under the recorded objective.
EmbedResult embed(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& shapes,
                  const Mat& observation, const EmbedConfig& cfg, std::uint64_t seed);

struct Ranked {
  int id = 0;
  double distance = 0.0;
};

// Ascending Euclidean distance to z; ties by lowest id.
std::vector<Ranked> retrieve_topk(const Mat& table, const Vec& z, int k);

struct Candidate {
  int shape = 0;
  geometry::Mesh mesh;         // deformed to the observation's code
  double chamfer = 0.0;        // eval Chamfer of the deformed mesh to the observation
  double raw_chamfer = 0.0;    // same, undeformed
  double latent_distance = 0.0;
};

struct ReconstructionResult {
  Vec code;
  std::vector<Candidate> candidates;  // ascending chamfer; the first is selected
  std::vector<double> embed_objective;
  std::vector<double> finetune_objective;
  training::Checkpoint tuned;  // fine-tuned clone

  const Candidate& best() const { return candidates.front(); }
};

ReconstructionResult reconstruct(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& shapes,
                                 const Mat& observation, const EmbedConfig& cfg, std::uint64_t seed);

struct SurfaceMetrics {
  double chamfer_l1 = 0.0;
  double normal_consistency = 0.0;
};

// Chamfer-L1 and symmetrized normal consistency between surface samples.
SurfaceMetrics eval_reconstruction(const geometry::Mesh& mesh, const geometry::Mesh& reference, std::size_t samples,
                                   std::uint64_t seed);

// Observation protocol for benchmarks: n surface samples plus N(0, sigma) noise.
Mat noisy_observation(const geometry::Mesh& mesh, std::size_t n, double sigma, std::uint64_t seed);

}  // namespace fm::embedding
