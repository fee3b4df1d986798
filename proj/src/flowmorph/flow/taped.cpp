#include "flowmorph/flow/taped.hpp"

#include <stdexcept>

namespace fm::flow {

FlowVars record_flow(Tape& tape, const FlowModel& model, bool trainable) {
  FlowVars v;
  v.field.mode = model.config.mode;
  v.field.symmetry = model.config.symmetry;
  v.field.backbone = numerics::record_split_on(tape, model.backbone, trainable);
  v.sign_kind = model.config.sign;
  if (model.config.sign == SignKind::odd_mlp) v.sign = numerics::record_on(tape, model.sign_net, trainable, false);
  return v;
}

FlowModel flow_gradients(const Tape& tape, const FlowVars& vars, const FlowModel& like) {
  FlowModel g = like;
  g.backbone = numerics::gradients_of(tape, vars.field.backbone);
  if (vars.sign_kind == SignKind::odd_mlp) g.sign_net = numerics::gradients_of(tape, vars.sign);
  return g;
}

std::optional<Var> record_factor(const FlowVars& vars, Var zi, Var zj) {
  const Mat& a = value_of(zi);
  const Mat& b = value_of(zj);
  if (a.size() != b.size()) throw std::invalid_argument("record_factor: latent size mismatch");
  if (a == b) return std::nullopt;
  const Var d = sub(zj, zi);
  const Var m = norm(d);
  if (vars.sign_kind == SignKind::hub) {
    if ((b.array() == 0.0).all()) return m;
    if ((a.array() == 0.0).all()) return scale(m, -1.0);
    throw std::invalid_argument("hub sign rule needs one endpoint at the hub (zero code)");
  }
  const Var u = mul_scalar(d, reciprocal(m));
  const Var s = numerics::mlp_apply(vars.sign, u);
  return mul(s, m);
}

}  // namespace fm::flow
