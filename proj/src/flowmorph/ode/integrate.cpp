#include "flowmorph/ode/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "flowmorph/ode/rk4.hpp"

namespace fm::ode {

OdeConfig OdeConfig::rk4(int steps) {
  OdeConfig c;
  c.solver = Solver::rk4;
  c.steps = steps;
  c.validate();
  return c;
}

OdeConfig OdeConfig::dopri5(double rtol, double atol, long max_steps) {
  OdeConfig c;
  c.solver = Solver::dopri5;
  c.rtol = rtol;
  c.atol = atol;
  c.max_steps = max_steps;
  c.validate();
  return c;
}

void OdeConfig::validate() const {
  if (solver == Solver::rk4 && steps < 1) throw std::invalid_argument("rk4 steps must be >= 1");
  if (solver == Solver::dopri5) {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("dopri5 tolerances must be > 0");
    if (max_steps < 1) throw std::invalid_argument("dopri5 max_steps must be >= 1");
  }
}

std::string OdeConfig::describe() const {
  std::ostringstream s;
  if (solver == Solver::rk4)
    s << "rk4(steps=" << steps << ")";
  else
    s << "dopri5(rtol=" << rtol << ", atol=" << atol << ", max_steps=" << max_steps << ")";
  return s.str();
}

OdeConfig parse_solver(const std::string& name, int steps, double rtol, double atol) {
  if (name == "rk4") return OdeConfig::rk4(steps);
  if (name == "dopri5") return OdeConfig::dopri5(rtol, atol);
  throw std::invalid_argument("unknown solver '" + name + "' (expected rk4 or dopri5)");
}

namespace {

std::vector<double> checked_outputs(const std::vector<double>& out, double t0, double t1) {
  std::vector<double> times;
  double prev = t0;
  for (double t : out) {
    if (!(t > prev) || t > t1) throw std::invalid_argument("output times must be ascending within (t0, t1]");
    times.push_back(t);
    prev = t;
  }
  if (times.empty() || times.back() != t1) times.push_back(t1);
  return times;
}

Trajectory run_rk4(const Velocity& f, const Mat& x0, double t0, double t1, const OdeConfig& cfg,
                   const std::vector<double>& output_times) {
  std::vector<Mat> states;
  rk4_integrate(f, x0, t0, t1, cfg.steps, &states);
  Trajectory traj;
  const double h = (t1 - t0) / cfg.steps;
  if (output_times.empty()) {
    for (int i = 0; i <= cfg.steps; ++i) traj.times.push_back(i == cfg.steps ? t1 : t0 + i * h);
    traj.states = std::move(states);
    return traj;
  }
  traj.times.push_back(t0);
  traj.states.push_back(states.front());
  for (double t : checked_outputs(output_times, t0, t1)) {
    const double k = (t - t0) / h;
    const long i = std::lround(k);
    if (std::abs(k - static_cast<double>(i)) > 1e-9) throw std::invalid_argument("rk4 output time is off the step grid");
    traj.times.push_back(t);
    traj.states.push_back(states[static_cast<std::size_t>(i)]);
  }
  return traj;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;

Trajectory run_dopri5(const Velocity& f, const Mat& x0, double t0, double t1, const OdeConfig& cfg,
                      const std::vector<double>& output_times) {
  const bool every_step = output_times.empty();
  const std::vector<double> stops = checked_outputs(output_times, t0, t1);
  std::size_t next_stop = 0;

  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(x0);

  const double span = t1 - t0;
  double t = t0;
  double h = 0.1 * span;
  double err_prev = 1e-4;
  bool rejected_last = false;
  Mat x = x0;
  Mat k1 = f(x, t);
  long attempts = 0;

  while (next_stop < stops.size()) {
    if (++attempts > cfg.max_steps) {
      std::ostringstream msg;
      msg << "dopri5 exceeded max_steps=" << cfg.max_steps << " at t=" << t;
      throw IntegrationError(msg.str(), std::move(traj));
    }
    const double target = stops[next_stop];
    bool lands = false;
    double step = h;
    if (t + step >= target || target - (t + step) < 1e-12 * span) {
      step = target - t;
      lands = true;
    }
    if (!(step > 1e-14 * span)) throw IntegrationError("dopri5 step size underflow at t=" + std::to_string(t), traj);

    const Mat k2 = f(x + step * (a21 * k1), t + c2 * step);
    const Mat k3 = f(x + step * (a31 * k1 + a32 * k2), t + c3 * step);
    const Mat k4 = f(x + step * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * step);
    const Mat k5 = f(x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + c5 * step);
    const Mat k6 = f(x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + step);
    const double t_new = lands ? target : t + step;
    const Mat x_new = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Mat k7 = f(x_new, t_new);
    const Mat err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const Mat scale = (cfg.atol + cfg.rtol * x.cwiseAbs().cwiseMax(x_new.cwiseAbs()).array()).matrix();
    double norm = err.size() ? (err.cwiseAbs().array() / scale.array()).maxCoeff() : 0.0;
    if (!std::isfinite(norm) || !x_new.allFinite()) norm = std::numeric_limits<double>::infinity();

    if (norm <= 1.0) {
      t = t_new;
      x = x_new;
      k1 = k7;
      double factor = norm == 0.0 ? kMaxFactor : kSafety * std::pow(norm, -kAlpha) * std::pow(err_prev, kBeta);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      if (rejected_last) factor = std::min(factor, 1.0);
      err_prev = std::max(norm, 1e-4);
      rejected_last = false;
      // A step shortened only to hit a stop leaves the proposal untouched.
      if (!(lands && step < h)) h = step * factor;
      if (lands) ++next_stop;
      if (every_step || lands) {
        traj.times.push_back(t);
        traj.states.push_back(x);
      }
    } else {
      const double factor = std::isfinite(norm) ? std::max(kMinFactor, kSafety * std::pow(norm, -kAlpha)) : kMinFactor;
      h = step * factor;
      rejected_last = true;
    }
  }
  return traj;
}

}  // namespace

Trajectory integrate(const Velocity& f, const Mat& x0, double t0, double t1, const OdeConfig& cfg,
                     const std::vector<double>& output_times) {
  cfg.validate();
  if (!(t0 < t1)) throw std::invalid_argument("integrate: need t0 < t1 (reverse paths use the negated flow)");
  if (cfg.solver == OdeConfig::Solver::rk4) return run_rk4(f, x0, t0, t1, cfg, output_times);
  return run_dopri5(f, x0, t0, t1, cfg, output_times);
}

}  // namespace fm::ode
