#include "flowmorph/ode/deform.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "flowmorph/flow/eval.hpp"
#include "flowmorph/geometry/intersect.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/ode/rk4.hpp"

namespace fm::ode {

using numerics::Tape;
using numerics::Var;

namespace {

void check_points(const Mat& points) {
  if (points.cols() != 3) throw std::invalid_argument("deform: points must be N x 3");
}

Velocity velocity_of(const FlowModel& model, const PairContext& ctx) {
  const double factor = flow::flow_factor(model, ctx);
  auto view = std::make_shared<const flow::FieldView<Mat>>(flow::field_view_of(model));
  const Mat scale = Mat::Constant(1, 1, factor);
  return [view, ctx, scale](const Mat& x, double t) {
    const Mat cond = ctx.conditioning(t).transpose();
    return flow::velocity(*view, x, cond, scale);
  };
}

}  // namespace

Mat deform(const FlowModel& model, const PairContext& ctx, const Mat& points, const OdeConfig& cfg, double t_end) {
  check_points(points);
  if (ctx.is_identity()) return points;
  return integrate(velocity_of(model, ctx), points, 0.0, t_end, cfg).final_state();
}

Trajectory deform_trajectory(const FlowModel& model, const PairContext& ctx, const Mat& points, const OdeConfig& cfg,
                             double t_end, const std::vector<double>& output_times) {
  check_points(points);
  if (!ctx.is_identity()) return integrate(velocity_of(model, ctx), points, 0.0, t_end, cfg, output_times);
  Trajectory traj;
  traj.times.push_back(0.0);
  if (output_times.empty()) {
    traj.times.push_back(t_end);
  } else {
    traj.times.insert(traj.times.end(), output_times.begin(), output_times.end());
    if (traj.times.back() != t_end) traj.times.push_back(t_end);
  }
  traj.states.assign(traj.times.size(), points);
  return traj;
}

Var deform_taped(const flow::FlowVars& vars, Var zi, Var zj, Var points, int steps, double t_end,
                 std::vector<Var>* states) {
  const auto factor = flow::record_factor(vars, zi, zj);
  if (!factor) {
    if (states) states->assign(static_cast<std::size_t>(steps) + 1, points);
    return points;
  }
  const Var s = *factor;
  auto f = [&](const Var& x, double t) {
    const Var cond = flow::detail::lerp(zi, zj, t);
    return flow::velocity(vars.field, x, cond, s);
  };
  return rk4_integrate(f, points, 0.0, t_end, steps, states);
}

GradResult integrate_with_grad(const FlowModel& model, const PairContext& ctx, const Mat& points, const OdeConfig& cfg,
                               const LossFn& loss) {
  if (cfg.solver != OdeConfig::Solver::rk4)
    throw std::invalid_argument("integrate_with_grad: gradients are taken through fixed-step rk4; use solver rk4");
  cfg.validate();
  check_points(points);
  Tape tape;
  const auto vars = flow::record_flow(tape, model, true);
  const Var zi = tape.leaf(ctx.zi.transpose());
  const Var zj = tape.leaf(ctx.zj.transpose());
  const Var x0 = tape.constant(points);
  const Var out = deform_taped(vars, zi, zj, x0, cfg.steps);
  const Var l = loss(tape, out);
  tape.backward(l);
  GradResult r;
  r.loss = tape.value(l)(0, 0);
  r.grads = flow::flow_gradients(tape, vars, model);
  r.grad_zi = tape.grad(zi).row(0).transpose();
  r.grad_zj = tape.grad(zj).row(0).transpose();
  return r;
}

void export_trajectory(const Trajectory& traj, const geometry::Mesh& connectivity, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["frames"] = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const geometry::Mesh m = geometry::with_vertices(connectivity, traj.states[k]);
    char name[32];
    std::snprintf(name, sizeof name, "state_%04zu.obj", k);
    geometry::save_mesh(m, dir / name);
    index["frames"].push_back({{"file", name},
                               {"time", traj.times[k]},
                               {"volume", geometry::signed_volume(m)},
                               {"intersections", geometry::count_triangle_intersections(m)}});
  }
  std::ofstream out(dir / "index.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << "\n";
}

}  // namespace fm::ode
