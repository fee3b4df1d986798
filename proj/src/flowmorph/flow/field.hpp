#pragma once

// The velocity field written once over the computation mode. T is the point
// batch type (Mat, Var, Dual<Mat>, ...); P is the parameter type (Mat or Var).

#include "flowmorph/flow/model.hpp"
#include "flowmorph/numerics/dual.hpp"
#include "flowmorph/numerics/mlp.hpp"
#include "flowmorph/numerics/tape.hpp"

namespace fm::flow {

template <class P>
struct FieldView {
  Mode mode = Mode::direct;
  Symmetry symmetry = Symmetry::off;
  numerics::SplitMlpView<P> backbone;
};

namespace detail {

using namespace fm::numerics;

// d[k] holds dg/dx_k for every row.
template <class T>
T curl_of(const Dual<T>& g) {
  const T cx = sub(col(g.d[1], 2), col(g.d[2], 1));
  const T cy = sub(col(g.d[2], 0), col(g.d[0], 2));
  const T cz = sub(col(g.d[0], 1), col(g.d[1], 0));
  return cols3(cx, cy, cz);
}

template <class T, class P>
T inner_field(const FieldView<P>& f, const T& x, const P& cond) {
  if (f.mode == Mode::direct) return split_apply(f.backbone, x, cond);
  return curl_of(split_apply(f.backbone, seed_spatial(x), cond));
}

// Plane-yz symmetrization: the x component keeps the part odd under x -> -x,
// y and z keep the even part. Equivalent to (a + mirror(b)) / 2 with b the
// field at the mirrored point.
template <class T, class P>
T field(const FieldView<P>& f, const T& x, const P& cond) {
  if (f.symmetry == Symmetry::off) return inner_field(f, x, cond);
  const T a = inner_field(f, x, cond);
  const T b = inner_field(f, mirror_x(x), cond);
  return scale(add(a, mirror_x(b)), 0.5);
}

template <class T, class P>
T velocity(const FieldView<P>& f, const T& x, const P& cond, const P& factor) {
  return mul_scalar(field(f, x, cond), factor);
}

template <class P>
P lerp(const P& zi, const P& zj, double t) {
  return add(scale(zi, 1.0 - t), scale(zj, t));
}

}  // namespace detail

using detail::field;
using detail::velocity;

inline FieldView<Mat> field_view_of(const FlowModel& m) {
  return FieldView<Mat>{m.config.mode, m.config.symmetry, numerics::split_view_of(m.backbone)};
}

}  // namespace fm::flow
