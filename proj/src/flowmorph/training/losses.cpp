#include "flowmorph/training/losses.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "flowmorph/geometry/chamfer.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/ode/deform.hpp"

namespace fm::training {

namespace {

void check_rows(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(what) + ": row count mismatch");
}

Var hub_of(Var z) { return z.tape->constant(Mat::Zero(1, cols(z))); }

}  // namespace

Var chamfer_taped(Var a, Var b) {
  const Mat& va = value_of(a);
  const Mat& vb = value_of(b);
  if (va.rows() == 0 || vb.rows() == 0) throw std::invalid_argument("chamfer: empty point set");
  const auto ab = geometry::nearest_indices(va, vb);
  const auto ba = geometry::nearest_indices(vb, va);
  const Var d_ab = mean_all(row_sq_norm(sub(a, gather_rows(b, ab))));
  const Var d_ba = mean_all(row_sq_norm(sub(b, gather_rows(a, ba))));
  return add(d_ab, d_ba);
}

double edge_regularizer(const geometry::Mesh& before, const Mat& vertices_after) {
  if (vertices_after.rows() != before.vertex_count() || vertices_after.cols() != 3)
    throw std::invalid_argument("edge_regularizer: vertex count mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : geometry::edge_lengths(before)) {
    if (e.length == 0.0) continue;
    const double after = (vertices_after.row(e.a) - vertices_after.row(e.b)).norm();
    const double r = (after - e.length) / e.length;
    sum += r * r;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

EdgeSubset select_edges(const geometry::Mesh& mesh, std::size_t max_edges, numerics::Rng& rng) {
  std::vector<geometry::Edge> edges;
  for (const auto& e : geometry::edge_lengths(mesh))
    if (e.length > 0.0) edges.push_back(e);
  if (edges.size() > max_edges) {
    // Partial Fisher-Yates, then restore mesh order.
    for (std::size_t k = 0; k < max_edges; ++k) std::swap(edges[k], edges[k + rng.index(edges.size() - k)]);
    edges.resize(max_edges);
    std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
  }
  EdgeSubset s;
  std::vector<int> slot(static_cast<std::size_t>(mesh.vertex_count()), -1);
  auto local = [&](int v) {
    int& r = slot[static_cast<std::size_t>(v)];
    if (r < 0) {
      r = static_cast<int>(s.vertices.size());
      s.vertices.push_back(v);
    }
    return r;
  };
  s.inv_rest.resize(static_cast<Eigen::Index>(edges.size()), 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    s.a.push_back(local(edges[k].a));
    s.b.push_back(local(edges[k].b));
    s.inv_rest(static_cast<Eigen::Index>(k), 0) = 1.0 / edges[k].length;
  }
  return s;
}

Var edge_regularizer_taped(Var deformed, const EdgeSubset& subset) {
  Tape& t = *deformed.tape;
  if (subset.a.empty()) return t.constant(Mat::Zero(1, 1));
  const Var len = sqrt_elem(row_sq_norm(sub(gather_rows(deformed, subset.a), gather_rows(deformed, subset.b))));
  const Var rel = add_const(mul_const(len, subset.inv_rest), Mat::Constant(subset.inv_rest.rows(), 1, -1.0));
  return mean_all(mul(rel, rel));
}

double edge_regularizer(const EdgeSubset& subset, const Mat& deformed) {
  if (subset.a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < subset.a.size(); ++k) {
    const double len = (deformed.row(subset.a[k]) - deformed.row(subset.b[k])).norm();
    const double r = len * subset.inv_rest(static_cast<Eigen::Index>(k), 0) - 1.0;
    sum += r * r;
  }
  return sum / static_cast<double>(subset.a.size());
}

double vertex_l2_loss(const Mat& a, const Mat& b) {
  check_rows(a, b, "vertex_l2_loss");
  if (a.rows() == 0) throw std::invalid_argument("vertex_l2_loss: empty point set");
  return (a - b).rowwise().squaredNorm().mean();
}

Var vertex_l2_taped(Var a, Var b) {
  check_rows(value_of(a), value_of(b), "vertex_l2_loss");
  return mean_all(row_sq_norm(sub(a, b)));
}

Var through_hub_taped(const FlowVars& vars, Var zi, Var zj, Var points, int steps) {
  const Var hub = hub_of(zi);
  return ode::deform_taped(vars, hub, zj, ode::deform_taped(vars, zi, hub, points, steps), steps);
}

Mat through_hub(const FlowModel& model, const Vec& zi, const Vec& zj, const Mat& points, const ode::OdeConfig& cfg) {
  const Vec hub = Vec::Zero(zi.size());
  return ode::deform(model, flow::PairContext(hub, zj), ode::deform(model, flow::PairContext(zi, hub), points, cfg), cfg);
}

double hub_spoke_loss(const FlowModel& model, const Vec& zi, const Vec& zj, const Mat& pi, const Mat& pj,
                      const ode::OdeConfig& cfg) {
  using geometry::ChamferVariant;
  return geometry::chamfer(through_hub(model, zi, zj, pi, cfg), pj, ChamferVariant::sq_l2_train) +
         geometry::chamfer(pi, through_hub(model, zj, zi, pj, cfg), ChamferVariant::sq_l2_train);
}

Var hub_spoke_taped(const FlowVars& vars, Var zi, Var zj, Var pi, Var pj, int steps) {
  return add(chamfer_taped(through_hub_taped(vars, zi, zj, pi, steps), pj),
             chamfer_taped(pi, through_hub_taped(vars, zj, zi, pj, steps)));
}

double pairwise_loss(const FlowModel& model, const Vec& zi, const Vec& zj, const Mat& pi, const Mat& pj,
                     const ode::OdeConfig& cfg) {
  using geometry::ChamferVariant;
  if (model.config.sign != flow::SignKind::odd_mlp)
    throw std::invalid_argument("pairwise_loss needs the odd sign network; the hub sign only covers hub paths");
  const flow::PairContext ij(zi, zj);
  return geometry::chamfer(ode::deform(model, ij, pi, cfg), pj, ChamferVariant::sq_l2_train) +
         geometry::chamfer(pi, ode::deform(model, ij.reversed(), pj, cfg), ChamferVariant::sq_l2_train);
}

Var pairwise_taped(const FlowVars& vars, Var zi, Var zj, Var pi, Var pj, int steps) {
  if (vars.sign_kind != flow::SignKind::odd_mlp)
    throw std::invalid_argument("pairwise_loss needs the odd sign network; the hub sign only covers hub paths");
  return add(chamfer_taped(ode::deform_taped(vars, zi, zj, pi, steps), pj),
             chamfer_taped(pi, ode::deform_taped(vars, zj, zi, pj, steps)));
}

}  // namespace fm::training
