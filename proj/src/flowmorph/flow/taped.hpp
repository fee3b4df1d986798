#pragma once

#include <optional>

#include "flowmorph/flow/field.hpp"
#include "flowmorph/flow/model.hpp"
#include "flowmorph/numerics/tape.hpp"

namespace fm::flow {

using numerics::Tape;
using numerics::Var;

// A FlowModel lifted onto a tape.
struct FlowVars {
  FieldView<Var> field;
  numerics::MlpView<Var> sign;
  SignKind sign_kind = SignKind::hub;
};

// With `trainable` false every parameter is a tape constant. Sign-network
// biases are always constants so they stay at zero.
FlowVars record_flow(Tape& tape, const FlowModel& model, bool trainable);

// Gradients of the recorded parameters after backward(), shaped like the model.
FlowModel flow_gradients(const Tape& tape, const FlowVars& vars, const FlowModel& like);

// s * m on the tape, or nullopt when zi and zj are equal (identity path).
std::optional<Var> record_factor(const FlowVars& vars, Var zi, Var zj);

}  // namespace fm::flow
