#include "flowmorph/numerics/ops.hpp"

#include <cmath>

namespace fm::numerics {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

Mat apply_activation(Activation a, const Mat& x) {
  switch (a) {
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::elu:
      return x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    case Activation::tanh:
      return x.unaryExpr([](double v) { return std::tanh(v); });
    case Activation::identity: return x;
  }
  return x;
}

Mat activation_d1(Activation a, const Mat& x) {
  switch (a) {
    case Activation::relu:
      return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::elu:
      return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
    case Activation::tanh:
      return x.unaryExpr([](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
    case Activation::identity: return Mat::Ones(x.rows(), x.cols());
  }
  return x;
}

Mat activation_d2(Activation a, const Mat& x) {
  switch (a) {
    case Activation::relu: return Mat::Zero(x.rows(), x.cols());
    case Activation::elu:
      return x.unaryExpr([](double v) { return v > 0.0 ? 0.0 : std::exp(v); });
    case Activation::tanh:
      return x.unaryExpr([](double v) {
        const double t = std::tanh(v);
        return -2.0 * t * (1.0 - t * t);
      });
    case Activation::identity: return Mat::Zero(x.rows(), x.cols());
  }
  return x;
}

}  // namespace fm::numerics
