#include "flowmorph/flow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowmorph/numerics/rng.hpp"

namespace fm::flow {

using numerics::Dual;

namespace {

Mat row_of(const Vec& z) { return z.transpose(); }

Mat point_row(const Vec3& x) {
  if (!x.allFinite()) throw std::invalid_argument("flow evaluated at a non-finite point");
  return x.transpose();
}

void check_latent(const FlowModel& model, const Vec& z) {
  if (z.size() != model.config.latent_dim) throw std::invalid_argument("latent code has the wrong dimension");
}

}  // namespace

double sign_net_value(const FlowModel& model, const Vec& u) {
  if (model.config.sign != SignKind::odd_mlp) throw std::invalid_argument("model has no sign network");
  return numerics::mlp_forward(model.sign_net, u)(0);
}

double sign_value(const FlowModel& model, const PairContext& ctx) {
  if (model.config.sign == SignKind::hub) {
    if (is_hub(ctx.zj)) return 1.0;
    if (is_hub(ctx.zi)) return -1.0;
    throw std::invalid_argument("hub sign rule needs one endpoint at the hub (zero code)");
  }
  return sign_net_value(model, ctx.direction());
}

double flow_factor(const FlowModel& model, const PairContext& ctx) {
  const double m = ctx.magnitude();
  if (m == 0.0) return 0.0;
  return sign_value(model, ctx) * m;
}

Mat field_batch(const FlowModel& model, const Mat& x, const Vec& z) {
  check_latent(model, z);
  return field(field_view_of(model), x, row_of(z));
}

Vec3 field_at(const FlowModel& model, const Vec3& x, const Vec& z) {
  return field_batch(model, point_row(x), z).row(0).transpose();
}

Mat eval_flow_batch(const FlowModel& model, const PairContext& ctx, const Mat& x, double t) {
  if (!x.allFinite()) throw std::invalid_argument("flow evaluated at a non-finite point");
  const double factor = flow_factor(model, ctx);
  if (factor == 0.0) return Mat::Zero(x.rows(), 3);
  check_latent(model, ctx.zi);
  const Mat cond = row_of(ctx.conditioning(t));
  const Mat scale = Mat::Constant(1, 1, factor);
  return velocity(field_view_of(model), x, cond, scale);
}

Vec3 eval_flow(const FlowModel& model, const PairContext& ctx, const Vec3& x, double t) {
  return eval_flow_batch(model, ctx, point_row(x), t).row(0).transpose();
}

Vec3 curl_potential(const FlowModel& model, const Vec3& x, const Vec& z) {
  if (model.config.mode != Mode::divergence_free) throw std::invalid_argument("curl_potential: model is not divfree");
  check_latent(model, z);
  FieldView<Mat> v = field_view_of(model);
  v.symmetry = Symmetry::off;
  return field(v, point_row(x), row_of(z)).row(0).transpose();
}

Vec3 symmetrize(const FlowModel& model, const Vec3& x, const Vec& z) {
  if (model.config.symmetry != Symmetry::plane_yz) throw std::invalid_argument("symmetrize: model has no symmetry");
  return field_at(model, x, z);
}

Eigen::Matrix3d field_jacobian(const FlowModel& model, const Vec3& x, const Vec& z) {
  check_latent(model, z);
  if (model.backbone.uses(Activation::relu))
    throw std::invalid_argument("field_jacobian: relu backbone is not differentiable");
  const Dual<Mat> out = field(field_view_of(model), numerics::seed_spatial(point_row(x)), row_of(z));
  Eigen::Matrix3d j;
  for (int k = 0; k < 3; ++k) j.col(k) = out.d[static_cast<std::size_t>(k)].row(0).transpose();
  return j;
}

double divergence(const FlowModel& model, const Vec3& x, const Vec& z) { return field_jacobian(model, x, z).trace(); }

double divergence_fd(const FlowModel& model, const Vec3& x, const Vec& z, double h) {
  Mat pts(6, 3);
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    pts.row(2 * k) = (x + e).transpose();
    pts.row(2 * k + 1) = (x - e).transpose();
  }
  const Mat v = field_batch(model, pts, z);
  double div = 0.0;
  for (int k = 0; k < 3; ++k) div += (v(2 * k, k) - v(2 * k + 1, k)) / (2.0 * h);
  return div;
}

double max_sampled_divergence(const FlowModel& model, int samples, std::uint64_t seed) {
  numerics::Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = rng.uniform(-0.5, 0.5);
    Vec z(model.config.latent_dim);
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal(0.0, 0.1);
    const double d = std::abs(divergence(model, x, z));
    if (!(d <= worst)) worst = d;  // NaN propagates
  }
  return worst;
}

}  // namespace fm::flow
