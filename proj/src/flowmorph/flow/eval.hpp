#pragma once

#include <Eigen/Core>

#include "flowmorph/flow/field.hpp"
#include "flowmorph/flow/model.hpp"

namespace fm::flow {

// Hub rule: +1 toward the hub (zj = 0), -1 away from it (zi = 0); throws
// std::invalid_argument when neither endpoint is the hub. Odd MLP: s(u).
double sign_value(const FlowModel& model, const PairContext& ctx);

// The odd sign network evaluated at an arbitrary direction u.
double sign_net_value(const FlowModel& model, const Vec& u);

// s * m, the scalar multiplying h along the path; 0 for an identity pair.
double flow_factor(const FlowModel& model, const PairContext& ctx);

// h(x, z) as the configured mode defines it (direct or curl, then symmetry).
Vec3 field_at(const FlowModel& model, const Vec3& x, const Vec& z);
Mat field_batch(const FlowModel& model, const Mat& x, const Vec& z);

// f(x, t) = h(x, (1 - t) zi + t zj) s m; exactly zero when zi == zj.
Vec3 eval_flow(const FlowModel& model, const PairContext& ctx, const Vec3& x, double t);
Mat eval_flow_batch(const FlowModel& model, const PairContext& ctx, const Mat& x, double t);

// curl of the backbone potential, without symmetrization. Requires
// divergence-free mode.
Vec3 curl_potential(const FlowModel& model, const Vec3& x, const Vec& z);

// Symmetrized inner field (direct or curl). Requires plane_yz symmetry.
Vec3 symmetrize(const FlowModel& model, const Vec3& x, const Vec& z);

// Exact spatial Jacobian of field_at, rows = output components.
Eigen::Matrix3d field_jacobian(const FlowModel& model, const Vec3& x, const Vec& z);

// Exact divergence of field_at by forward-mode differentiation (nested for
// curl fields).
double divergence(const FlowModel& model, const Vec3& x, const Vec& z);

// Central-difference divergence with step h.
double divergence_fd(const FlowModel& model, const Vec3& x, const Vec& z, double h = 1e-4);

// Largest |div h| over `samples` random points in [-0.5, 0.5]^3 with latent
// entries drawn from N(0, 0.1).
double max_sampled_divergence(const FlowModel& model, int samples, std::uint64_t seed);

}  // namespace fm::flow
