#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "flowmorph/flow/model.hpp"
#include "flowmorph/flow/taped.hpp"
#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/ode/integrate.hpp"

namespace fm::ode {

using flow::FlowModel;
using flow::PairContext;

// Advects every row of `points` along the flow of ctx from t = 0 to t_end.
// An identity pair returns the input unchanged.
Mat deform(const FlowModel& model, const PairContext& ctx, const Mat& points, const OdeConfig& cfg,
           double t_end = 1.0);

Trajectory deform_trajectory(const FlowModel& model, const PairContext& ctx, const Mat& points,
                             const OdeConfig& cfg, double t_end = 1.0,
                             const std::vector<double>& output_times = {});

// Unrolled RK4 of the flow between two recorded codes, on the tape.
numerics::Var deform_taped(const flow::FlowVars& vars, numerics::Var zi, numerics::Var zj, numerics::Var points,
                           int steps, double t_end = 1.0, std::vector<numerics::Var>* states = nullptr);

struct GradResult {
  double loss = 0.0;
  FlowModel grads;  // same shapes as the model
  Eigen::VectorXd grad_zi;
  Eigen::VectorXd grad_zj;
};

using LossFn = std::function<numerics::Var(numerics::Tape&, numerics::Var deformed)>;

// Loss of the deformed points and its exact gradient through the unrolled
// integrator. Only RK4 is accepted.
GradResult integrate_with_grad(const FlowModel& model, const PairContext& ctx, const Mat& points,
                               const OdeConfig& cfg, const LossFn& loss);

// One mesh per trajectory state plus index.json (times, signed volumes,
// triangle-intersection counts).
void export_trajectory(const Trajectory& traj, const geometry::Mesh& connectivity,
                       const std::filesystem::path& dir);

}  // namespace fm::ode
