#pragma once

// Forward-mode dual numbers over matrix batches with three tangent
// directions, one per spatial axis. The tangent of a batch of points is
// carried as three matrices of the same shape as the value, so one pass
// yields the full 3-column spatial Jacobian of every output.
//
// T may itself be a Var (dual arithmetic recorded on a tape, used to train
// curl-parameterized fields) or a Dual (nested, used for exact divergence).

#include <array>

#include "flowmorph/numerics/ops.hpp"
#include "flowmorph/numerics/tape.hpp"

namespace fm::numerics {

template <class T>
struct Dual {
  T v;
  std::array<T, 3> d;
};

template <class T>
Eigen::Index rows(const Dual<T>& a) {
  return rows(a.v);
}
template <class T>
Eigen::Index cols(const Dual<T>& a) {
  return cols(a.v);
}

template <class T>
Dual<T> constant_like(const Dual<T>& like, Mat value) {
  const Eigen::Index r = value.rows(), c = value.cols();
  return Dual<T>{constant_like(like.v, std::move(value)),
                 {constant_like(like.v, Mat::Zero(r, c)), constant_like(like.v, Mat::Zero(r, c)),
                  constant_like(like.v, Mat::Zero(r, c))}};
}

// Seeds a point batch (N x 3) so tangent k is the unit vector along axis k.
template <class T>
Dual<T> seed_spatial(const T& x) {
  Dual<T> out{x, {}};
  for (int k = 0; k < 3; ++k) {
    Mat e = Mat::Zero(rows(x), 3);
    e.col(k).setOnes();
    out.d[static_cast<std::size_t>(k)] = constant_like(x, std::move(e));
  }
  return out;
}

template <class T, class P>
Dual<T> matmul_wt(const Dual<T>& h, const P& w) {
  return {matmul_wt(h.v, w), {matmul_wt(h.d[0], w), matmul_wt(h.d[1], w), matmul_wt(h.d[2], w)}};
}

template <class T, class P>
Dual<T> add_row(const Dual<T>& h, const P& row) {
  return {add_row(h.v, row), h.d};
}

template <class T>
Dual<T> add(const Dual<T>& a, const Dual<T>& b) {
  return {add(a.v, b.v), {add(a.d[0], b.d[0]), add(a.d[1], b.d[1]), add(a.d[2], b.d[2])}};
}

template <class T>
Dual<T> sub(const Dual<T>& a, const Dual<T>& b) {
  return {sub(a.v, b.v), {sub(a.d[0], b.d[0]), sub(a.d[1], b.d[1]), sub(a.d[2], b.d[2])}};
}

template <class T>
Dual<T> mul(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> out{mul(a.v, b.v), {}};
  for (std::size_t k = 0; k < 3; ++k) out.d[k] = add(mul(a.d[k], b.v), mul(a.v, b.d[k]));
  return out;
}

template <class T>
Dual<T> scale(const Dual<T>& a, double s) {
  return {scale(a.v, s), {scale(a.d[0], s), scale(a.d[1], s), scale(a.d[2], s)}};
}

template <class T>
Dual<T> act(Activation k, const Dual<T>& a) {
  const T slope = act_d1(k, a.v);
  return {act(k, a.v), {mul(slope, a.d[0]), mul(slope, a.d[1]), mul(slope, a.d[2])}};
}

template <class T>
Dual<T> act_d1(Activation k, const Dual<T>& a) {
  const T curv = act_d2(k, a.v);
  return {act_d1(k, a.v), {mul(curv, a.d[0]), mul(curv, a.d[1]), mul(curv, a.d[2])}};
}

template <class T>
Dual<T> col(const Dual<T>& a, int c) {
  return {col(a.v, c), {col(a.d[0], c), col(a.d[1], c), col(a.d[2], c)}};
}

template <class T>
Dual<T> cols3(const Dual<T>& x, const Dual<T>& y, const Dual<T>& z) {
  Dual<T> out{cols3(x.v, y.v, z.v), {}};
  for (std::size_t k = 0; k < 3; ++k) out.d[k] = cols3(x.d[k], y.d[k], z.d[k]);
  return out;
}

template <class T>
Dual<T> mirror_x(const Dual<T>& a) {
  return {mirror_x(a.v), {mirror_x(a.d[0]), mirror_x(a.d[1]), mirror_x(a.d[2])}};
}

template <class T, class P>
Dual<T> mul_scalar(const Dual<T>& a, const P& s) {
  return {mul_scalar(a.v, s), {mul_scalar(a.d[0], s), mul_scalar(a.d[1], s), mul_scalar(a.d[2], s)}};
}

}  // namespace fm::numerics
