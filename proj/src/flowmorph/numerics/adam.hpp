#pragma once

#include <span>
#include <vector>

#include "flowmorph/numerics/ops.hpp"

namespace fm::numerics {

// Adam with bias correction. State slots are bound positionally to the
// parameter list on the first step; later steps must pass the same shapes.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  void step(std::span<Mat* const> params, std::span<const Mat> grads, double lr);

  long steps() const { return step_; }

 private:
  std::vector<Mat> first_;
  std::vector<Mat> second_;
  long step_ = 0;
};

}  // namespace fm::numerics
