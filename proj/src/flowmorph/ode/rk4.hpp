#pragma once

#include <stdexcept>
#include <vector>

#include "flowmorph/numerics/dual.hpp"
#include "flowmorph/numerics/tape.hpp"

namespace fm::ode {

// Classic fixed-step RK4 over [t0, t1] for any state type with add/scale.
// `f(x, t)` returns the velocity. When `states` is given it receives the
// state after every step, starting with x0.
template <class T, class F>
T rk4_integrate(F&& f, const T& x0, double t0, double t1, int steps, std::vector<T>* states = nullptr) {
  using numerics::add;
  using numerics::scale;
  if (steps < 1) throw std::invalid_argument("rk4: steps must be >= 1");
  const double h = (t1 - t0) / steps;
  T x = x0;
  if (states) states->push_back(x);
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const T k1 = f(x, t);
    const T k2 = f(add(x, scale(k1, 0.5 * h)), t + 0.5 * h);
    const T k3 = f(add(x, scale(k2, 0.5 * h)), t + 0.5 * h);
    const T k4 = f(add(x, scale(k3, h)), i + 1 == steps ? t1 : t + h);
    x = add(x, scale(add(add(k1, scale(add(k2, k3), 2.0)), k4), h / 6.0));
    if (states) states->push_back(x);
  }
  return x;
}

}  // namespace fm::ode
