#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "flowmorph/flow/model.hpp"
#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/ode/integrate.hpp"

namespace fm::interp {

using flow::Vec;
using numerics::Mat;

struct InterpConfig {
  int frames = 11;
  int supervision_frames = 5;  // linear-interpolation targets strictly between the keyframes
  flow::FlowConfig flow = [] {
    flow::FlowConfig f;
    f.mode = flow::Mode::divergence_free;
    return f;
  }();
  double edge_weight = 2.0;
  int max_edges = 2000;
  long steps = 1000;
  double learning_rate = 2e-3;
  double latent_std = 0.1;
  ode::OdeConfig render_ode = ode::OdeConfig::dopri5(1e-6, 1e-6);
  int threads = 0;

  // Training integrates with rk4 at supervision_frames + 1 steps so every
  // target time is a step boundary.
  int rk4_steps() const { return supervision_frames + 1; }
  void validate() const;
};

nlohmann::json to_json(const InterpConfig& cfg);

struct FittedPair {
  flow::FlowModel model;
  Vec z0;  // pinned to the hub
  Vec z1;
  std::vector<double> loss;  // per training step
};

// Trains a flow carrying X0 to X1 under vertex-wise L2 supervision at the
// endpoints and the linear in-between targets, plus the edge term.
FittedPair fit_pair(const geometry::Mesh& x0, const geometry::Mesh& x1, const InterpConfig& cfg, std::uint64_t seed);

// 0.5 (P^{0->a}(X0) + P^{1->a}(X1)).
Mat interpolate(const FittedPair& fit, const geometry::Mesh& x0, const geometry::Mesh& x1, double alpha,
                const ode::OdeConfig& cfg);

// Interpolants for ascending alphas in [0, 1] from one integration per branch.
std::vector<Mat> interpolate_all(const FittedPair& fit, const geometry::Mesh& x0, const geometry::Mesh& x1,
                                 const std::vector<double>& alphas, const ode::OdeConfig& cfg);

struct FrameStats {
  double alpha = 0.0;
  double volume = 0.0;
  double volume_change = 0.0;  // (V - V(X0)) / |V(X0)|
  double edge_change = 0.0;    // mean relative edge change against X0
  std::size_t intersections = 0;
};

struct AnimationReport {
  std::vector<FrameStats> frames;
  std::vector<FrameStats> baseline;  // plain vertex lerp
  std::vector<Mat> frame_vertices;
  std::vector<Mat> baseline_vertices;

  double max_volume_drift() const;
  double max_baseline_volume_drift() const;
  nlohmann::json to_json() const;
};

FrameStats frame_stats(const geometry::Mesh& x0, const Mat& vertices, double alpha);

// Renders cfg.frames uniformly spaced interpolants and the lerp baseline.
// When out_dir is non-empty writes frame_%04d.obj, baseline_%04d.obj and report.json.
AnimationReport render_animation(const FittedPair& fit, const geometry::Mesh& x0, const geometry::Mesh& x1,
                                 const InterpConfig& cfg, const std::filesystem::path& out_dir = {});

}  // namespace fm::interp
