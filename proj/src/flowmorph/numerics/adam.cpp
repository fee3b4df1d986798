#include "flowmorph/numerics/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fm::numerics {

void Adam::step(std::span<Mat* const> params, std::span<const Mat> grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient count mismatch");
  if (first_.empty()) {
    for (const Mat* p : params) {
      first_.push_back(Mat::Zero(p->rows(), p->cols()));
      second_.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  if (first_.size() != params.size()) throw std::invalid_argument("adam: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        first_[i].rows() != grads[i].rows() || first_[i].cols() != grads[i].cols())
      throw std::invalid_argument("adam: shape mismatch in slot " + std::to_string(i));
  }
  ++step_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_[i] = kBeta1 * first_[i] + (1.0 - kBeta1) * grads[i];
    second_[i] = kBeta2 * second_[i] + (1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
    const Mat mhat = first_[i] / c1;
    const Mat vhat = second_[i] / c2;
    *params[i] -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + kEpsilon).matrix());
  }
}

}  // namespace fm::numerics
