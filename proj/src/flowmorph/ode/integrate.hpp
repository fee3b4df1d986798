#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowmorph/numerics/ops.hpp"

namespace fm::ode {

using numerics::Mat;

struct OdeConfig {
  enum class Solver { rk4, dopri5 };

  Solver solver = Solver::rk4;
  int steps = 5;
  double rtol = 1e-4;
  double atol = 1e-4;
  long max_steps = 100000;

  static OdeConfig rk4(int steps);
  static OdeConfig dopri5(double rtol, double atol, long max_steps = 100000);

  void validate() const;
  std::string describe() const;
};

OdeConfig parse_solver(const std::string& name, int steps, double rtol, double atol);

struct Trajectory {
  std::vector<double> times;
  std::vector<Mat> states;

  const Mat& final_state() const { return states.back(); }
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, Trajectory partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

// Velocity of every row of x at time t.
using Velocity = std::function<Mat(const Mat& x, double t)>;

// Integrates dx/dt = f(x, t) forward from t0 to t1 (t0 < t1).
//
// RK4 takes `steps` uniform steps. dopri5 is the Dormand-Prince 5(4) pair
// with PI step-size control; the error norm is the max over all entries of
// |err| / (atol + rtol * max(|x|, |x_new|)).
//
// Without output times the trajectory holds every step. With output times
// (ascending, inside (t0, t1]) it holds t0, those times and t1; dopri5
// shortens steps to land on them, RK4 requires them to lie on its grid.
Trajectory integrate(const Velocity& f, const Mat& x0, double t0, double t1, const OdeConfig& cfg,
                     const std::vector<double>& output_times = {});

}  // namespace fm::ode
