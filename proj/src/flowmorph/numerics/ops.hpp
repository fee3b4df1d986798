#pragma once

// Eager matrix kernels shared by the plain evaluation path, the tape and the
// dual-number wrappers. Every op here has a same-named overload for `Var`
// (tape.hpp) and for `Dual<T>` (dual.hpp), so field code written once as a
// template runs in all three modes.

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fm::numerics {

using Mat = Eigen::MatrixXd;

enum class Activation { relu, elu, tanh, identity };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

// True when the activation has a continuous first derivative.
inline bool is_c1(Activation a) { return a != Activation::relu; }

Mat apply_activation(Activation a, const Mat& x);
Mat activation_d1(Activation a, const Mat& x);
Mat activation_d2(Activation a, const Mat& x);

inline Eigen::Index rows(const Mat& m) { return m.rows(); }
inline Eigen::Index cols(const Mat& m) { return m.cols(); }
inline const Mat& value_of(const Mat& m) { return m; }

// h * w^T, where w is stored (out x in).
inline Mat matmul_wt(const Mat& h, const Mat& w) { return h * w.transpose(); }
inline Mat add_row(const Mat& h, const Mat& row) {
  if (row.rows() != 1 || row.cols() != h.cols()) throw std::invalid_argument("add_row: shape mismatch");
  return h.rowwise() + row.row(0);
}
inline Mat add(const Mat& a, const Mat& b) { return a + b; }
inline Mat sub(const Mat& a, const Mat& b) { return a - b; }
inline Mat mul(const Mat& a, const Mat& b) { return a.cwiseProduct(b); }
inline Mat scale(const Mat& a, double s) { return a * s; }
inline Mat act(Activation k, const Mat& a) { return apply_activation(k, a); }
inline Mat act_d1(Activation k, const Mat& a) { return activation_d1(k, a); }
inline Mat act_d2(Activation k, const Mat& a) { return activation_d2(k, a); }
inline Mat col(const Mat& a, int c) { return a.col(c); }
inline Mat cols3(const Mat& x, const Mat& y, const Mat& z) {
  Mat out(x.rows(), 3);
  out.col(0) = x;
  out.col(1) = y;
  out.col(2) = z;
  return out;
}
inline Mat mirror_x(const Mat& a) {
  Mat out = a;
  out.col(0) = -out.col(0);
  return out;
}
// Multiplies every entry by the 1x1 matrix s.
inline Mat mul_scalar(const Mat& a, const Mat& s) { return a * s(0, 0); }
inline Mat constant_like(const Mat&, Mat value) { return value; }
inline Mat norm(const Mat& a) { return Mat::Constant(1, 1, a.norm()); }

}  // namespace fm::numerics
