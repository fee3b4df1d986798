#pragma once

#include <functional>
#include <span>
#include <vector>

#include "flowmorph/numerics/ops.hpp"

namespace fm::numerics {

class Tape;

// Handle to a matrix-valued node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Reverse-mode record of a matrix computation. Nodes are appended in
// evaluation order; backward() walks them once in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Mat value);
  Var constant(Mat value);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

  // Gradient of the scalar passed to backward(); zeros for nodes the scalar
  // does not depend on.
  Mat grad(Var v) const;

  // Throws std::logic_error when called a second time.
  void backward(Var scalar);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  Var record(Mat value, bool requires_grad, Backward fn);
  void accumulate(int id, const Mat& g);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

inline Eigen::Index rows(Var v) { return v.tape->value(v).rows(); }
inline Eigen::Index cols(Var v) { return v.tape->value(v).cols(); }
inline const Mat& value_of(Var v) { return v.tape->value(v); }

Var matmul_wt(Var h, Var w);
Var add_row(Var h, Var row);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var act(Activation k, Var a);
Var act_d1(Activation k, Var a);
Var col(Var a, int c);
Var cols3(Var x, Var y, Var z);
Var mirror_x(Var a);
Var mul_scalar(Var a, Var s);
Var constant_like(Var like, Mat value);
Var norm(Var a);

// Loss-side ops.
Var reciprocal(Var a);
Var gather_rows(Var a, std::span<const int> index);
Var row_sq_norm(Var a);
Var sqrt_elem(Var a);
Var sum_all(Var a);
Var mean_all(Var a);
Var add_const(Var a, const Mat& c);
Var mul_const(Var a, const Mat& c);

}  // namespace fm::numerics
