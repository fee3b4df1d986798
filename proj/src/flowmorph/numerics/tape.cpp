#include "flowmorph/numerics/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace fm::numerics {

Var Tape::leaf(Mat value) { return record(std::move(value), true, nullptr); }

Var Tape::constant(Mat value) { return record(std::move(value), false, nullptr); }

Var Tape::record(Mat value, bool requires_grad, Backward fn) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), Mat(), requires_grad, requires_grad ? std::move(fn) : Backward()});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Mat Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var scalar) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  if (scalar.tape != this) throw std::invalid_argument("backward: variable belongs to another tape");
  if (value(scalar).size() != 1) throw std::invalid_argument("backward: result is not a scalar");
  consumed_ = true;
  accumulate(scalar.id, Mat::Ones(1, 1));
  for (int i = scalar.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.size() == 0) continue;
    // Callbacks only accumulate into parents, which have smaller ids.
    n.backward(*this, n.grad);
  }
}

namespace {

bool any_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs)
    if (v.tape->requires_grad(v)) return true;
  return false;
}

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul_wt(Var h, Var w) {
  Tape& t = *h.tape;
  if (t.value(h).cols() != t.value(w).cols()) throw std::invalid_argument("matmul_wt: shape mismatch");
  Mat out = t.value(h) * t.value(w).transpose();
  return t.record(std::move(out), any_grad({h, w}), [h, w](Tape& tp, const Mat& g) {
    if (tp.requires_grad(h)) tp.accumulate(h.id, g * tp.value(w));
    if (tp.requires_grad(w)) tp.accumulate(w.id, g.transpose() * tp.value(h));
  });
}

Var add_row(Var h, Var row) {
  Tape& t = *h.tape;
  Mat out = numerics::add_row(t.value(h), t.value(row));
  return t.record(std::move(out), any_grad({h, row}), [h, row](Tape& tp, const Mat& g) {
    tp.accumulate(h.id, g);
    if (tp.requires_grad(row)) tp.accumulate(row.id, g.colwise().sum());
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "add");
  Mat out = t.value(a) + t.value(b);
  return t.record(std::move(out), any_grad({a, b}), [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "sub");
  Mat out = t.value(a) - t.value(b);
  return t.record(std::move(out), any_grad({a, b}), [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, g);
    if (tp.requires_grad(b)) tp.accumulate(b.id, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "mul");
  Mat out = t.value(a).cwiseProduct(t.value(b));
  return t.record(std::move(out), any_grad({a, b}), [a, b](Tape& tp, const Mat& g) {
    if (tp.requires_grad(a)) tp.accumulate(a.id, g.cwiseProduct(tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b.id, g.cwiseProduct(tp.value(a)));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Mat out = t.value(a) * s;
  return t.record(std::move(out), any_grad({a}), [a, s](Tape& tp, const Mat& g) { tp.accumulate(a.id, g * s); });
}

Var act(Activation k, Var a) {
  Tape& t = *a.tape;
  Mat out = apply_activation(k, t.value(a));
  return t.record(std::move(out), any_grad({a}), [a, k](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, g.cwiseProduct(activation_d1(k, tp.value(a))));
  });
}

Var act_d1(Activation k, Var a) {
  Tape& t = *a.tape;
  Mat out = activation_d1(k, t.value(a));
  return t.record(std::move(out), any_grad({a}), [a, k](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, g.cwiseProduct(activation_d2(k, tp.value(a))));
  });
}

Var col(Var a, int c) {
  Tape& t = *a.tape;
  Mat out = t.value(a).col(c);
  return t.record(std::move(out), any_grad({a}), [a, c](Tape& tp, const Mat& g) {
    Mat full = Mat::Zero(tp.value(a).rows(), tp.value(a).cols());
    full.col(c) = g;
    tp.accumulate(a.id, full);
  });
}

Var cols3(Var x, Var y, Var z) {
  Tape& t = *x.tape;
  Mat out = numerics::cols3(t.value(x), t.value(y), t.value(z));
  return t.record(std::move(out), any_grad({x, y, z}), [x, y, z](Tape& tp, const Mat& g) {
    tp.accumulate(x.id, g.col(0));
    tp.accumulate(y.id, g.col(1));
    tp.accumulate(z.id, g.col(2));
  });
}

Var mirror_x(Var a) {
  Tape& t = *a.tape;
  Mat out = numerics::mirror_x(t.value(a));
  return t.record(std::move(out), any_grad({a}),
                  [a](Tape& tp, const Mat& g) { tp.accumulate(a.id, numerics::mirror_x(g)); });
}

Var mul_scalar(Var a, Var s) {
  Tape& t = *a.tape;
  if (t.value(s).size() != 1) throw std::invalid_argument("mul_scalar: factor is not 1x1");
  Mat out = t.value(a) * t.value(s)(0, 0);
  return t.record(std::move(out), any_grad({a, s}), [a, s](Tape& tp, const Mat& g) {
    if (tp.requires_grad(a)) tp.accumulate(a.id, g * tp.value(s)(0, 0));
    if (tp.requires_grad(s)) tp.accumulate(s.id, Mat::Constant(1, 1, g.cwiseProduct(tp.value(a)).sum()));
  });
}

Var constant_like(Var like, Mat value) { return like.tape->constant(std::move(value)); }

Var norm(Var a) {
  Tape& t = *a.tape;
  const double n = t.value(a).norm();
  return t.record(Mat::Constant(1, 1, n), any_grad({a}), [a, n](Tape& tp, const Mat& g) {
    if (n > 0.0) tp.accumulate(a.id, tp.value(a) * (g(0, 0) / n));
  });
}

Var reciprocal(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).cwiseInverse();
  return t.record(std::move(out), any_grad({a}), [a](Tape& tp, const Mat& g) {
    const Mat& v = tp.value(a);
    tp.accumulate(a.id, -g.cwiseQuotient(v.cwiseProduct(v)));
  });
}

Var gather_rows(Var a, std::span<const int> index) {
  Tape& t = *a.tape;
  const Mat& v = t.value(a);
  Mat out(static_cast<Eigen::Index>(index.size()), v.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= v.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = v.row(index[r]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return t.record(std::move(out), any_grad({a}), [a, idx = std::move(idx)](Tape& tp, const Mat& g) {
    Mat full = Mat::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) full.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    tp.accumulate(a.id, full);
  });
}

Var row_sq_norm(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).rowwise().squaredNorm();
  return t.record(std::move(out), any_grad({a}), [a](Tape& tp, const Mat& g) {
    Mat ga = tp.value(a) * 2.0;
    ga.array().colwise() *= g.col(0).array();
    tp.accumulate(a.id, ga);
  });
}

Var sqrt_elem(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).cwiseSqrt();
  Mat half_inv = out.unaryExpr([](double s) { return s > 0.0 ? 0.5 / s : 0.0; });
  return t.record(std::move(out), any_grad({a}), [a, half_inv = std::move(half_inv)](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, g.cwiseProduct(half_inv));
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  Mat out = Mat::Constant(1, 1, t.value(a).sum());
  return t.record(std::move(out), any_grad({a}), [a](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, Mat::Constant(tp.value(a).rows(), tp.value(a).cols(), g(0, 0)));
  });
}

Var mean_all(Var a) {
  const double n = static_cast<double>(a.tape->value(a).size());
  if (n == 0) throw std::invalid_argument("mean_all: empty input");
  return scale(sum_all(a), 1.0 / n);
}

Var add_const(Var a, const Mat& c) {
  Tape& t = *a.tape;
  check_same_shape(t.value(a), c, "add_const");
  Mat out = t.value(a) + c;
  return t.record(std::move(out), any_grad({a}), [a](Tape& tp, const Mat& g) { tp.accumulate(a.id, g); });
}

Var mul_const(Var a, const Mat& c) {
  Tape& t = *a.tape;
  check_same_shape(t.value(a), c, "mul_const");
  Mat out = t.value(a).cwiseProduct(c);
  return t.record(std::move(out), any_grad({a}), [a, c](Tape& tp, const Mat& g) {
    tp.accumulate(a.id, g.cwiseProduct(c));
  });
}

}  // namespace fm::numerics
