#pragma once

#include <vector>

#include "flowmorph/flow/taped.hpp"
#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/numerics/rng.hpp"
#include "flowmorph/ode/integrate.hpp"

namespace fm::training {

using flow::FlowModel;
using flow::FlowVars;
using flow::Vec;
using numerics::Mat;
using numerics::Tape;
using numerics::Var;

// Training Chamfer (sum of the two directed mean squared nearest distances).
// Nearest neighbours are found on the current values; gradients flow through
// the matched coordinates.
Var chamfer_taped(Var a, Var b);

// mean over edges of ((|e'| - |e|) / |e|)^2, skipping zero-length edges.
double edge_regularizer(const geometry::Mesh& before, const Mat& vertices_after);

// Edges drawn from a mesh together with the vertices they touch. a and b
// index rows of `vertices`.
struct EdgeSubset {
  std::vector<int> vertices;
  std::vector<int> a;
  std::vector<int> b;
  Mat inv_rest;  // k x 1, 1 / original length
};

// All non-degenerate edges when there are at most max_edges, otherwise a
// random subset of that size.
EdgeSubset select_edges(const geometry::Mesh& mesh, std::size_t max_edges, numerics::Rng& rng);

// Edge term for deformed copies of subset.vertices (rows in subset order).
Var edge_regularizer_taped(Var deformed, const EdgeSubset& subset);
double edge_regularizer(const EdgeSubset& subset, const Mat& deformed);

// mean over rows of |a_k - b_k|^2.
double vertex_l2_loss(const Mat& a, const Mat& b);
Var vertex_l2_taped(Var a, Var b);

// C(P0j(Pi0(pi)), pj) + C(pi, P0i(Pj0(pj))) with the training Chamfer.
double hub_spoke_loss(const FlowModel& model, const Vec& zi, const Vec& zj, const Mat& pi, const Mat& pj,
                      const ode::OdeConfig& cfg);
Var hub_spoke_taped(const FlowVars& vars, Var zi, Var zj, Var pi, Var pj, int steps);

// Routes points i -> hub -> j on the tape.
Var through_hub_taped(const FlowVars& vars, Var zi, Var zj, Var points, int steps);
Mat through_hub(const FlowModel& model, const Vec& zi, const Vec& zj, const Mat& points, const ode::OdeConfig& cfg);

// C(Pij(pi), pj) + C(pi, Pji(pj)); needs the odd sign network.
double pairwise_loss(const FlowModel& model, const Vec& zi, const Vec& zj, const Mat& pi, const Mat& pj,
                     const ode::OdeConfig& cfg);
Var pairwise_taped(const FlowVars& vars, Var zi, Var zj, Var pi, Var pj, int steps);

}  // namespace fm::training
