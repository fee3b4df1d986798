#include "flowmorph/diagnostics/verify.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

#include "flowmorph/flow/eval.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/geometry/primitives.hpp"
#include "flowmorph/ode/deform.hpp"
#include "flowmorph/training/losses.hpp"

namespace fm::diagnostics {

using flow::FlowConfig;
using flow::FlowModel;
using flow::Mode;
using flow::PairContext;
using flow::SignKind;
using flow::Symmetry;
using flow::Vec;
using flow::Vec3;
using numerics::Mat;
using numerics::Rng;

namespace {

Vec random_code(Rng& rng, int c, double sd) {
  Vec z(c);
  for (int k = 0; k < c; ++k) z[k] = rng.normal(0.0, sd);
  return z;
}

Vec3 random_point(Rng& rng) { return {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)}; }

Mat random_points(Rng& rng, int n) {
  Mat m(n, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.5, 0.5);
  return m;
}

FlowConfig config(const VerifyOptions& o, Mode mode, Symmetry sym, SignKind sign) {
  FlowConfig c;
  c.mode = mode;
  c.symmetry = sym;
  c.sign = sign;
  c.latent_dim = o.latent_dim;
  c.width = o.width;
  if (o.inject_relu_fault && mode == Mode::divergence_free) c.activation = numerics::Activation::relu;
  return c;
}

// Runs a check; an exception marks the property failed with its message.
PropertyResult guarded(const std::string& name, double tol, const std::function<double()>& measure,
                       const std::function<bool(double)>& ok) {
  PropertyResult r;
  r.name = name;
  r.tolerance = tol;
  try {
    r.value = measure();
    r.pass = ok(r.value);
  } catch (const std::exception& e) {
    r.pass = false;
    r.value = NAN;
    r.detail = e.what();
  }
  return r;
}

PropertyResult below(const std::string& name, double tol, const std::function<double()>& measure) {
  return guarded(name, tol, measure, [tol](double v) { return v < tol; });
}

PropertyResult at_most(const std::string& name, double tol, const std::function<double()>& measure) {
  return guarded(name, tol, measure, [tol](double v) { return v <= tol; });
}

}  // namespace

bool VerifyReport::pass() const {
  for (const auto& p : properties)
    if (!p.pass) return false;
  return !properties.empty();
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : properties) {
    nlohmann::json j = {{"name", p.name}, {"pass", p.pass}, {"tolerance", p.tolerance}};
    j["value"] = std::isfinite(p.value) ? nlohmann::json(p.value) : nlohmann::json(nullptr);
    if (!p.detail.empty()) j["detail"] = p.detail;
    props.push_back(j);
  }
  nlohmann::json rt = nlohmann::json::array();
  for (const auto& [steps, err] : round_trip) rt.push_back({{"steps", steps}, {"error", err}});
  return {{"seed", seed}, {"pass", pass()}, {"properties", props}, {"round_trip", rt}};
}

std::string VerifyReport::table() const {
  std::ostringstream s;
  s << std::left << std::setw(28) << "property" << std::setw(6) << "ok" << std::setw(14) << "value"
    << "tolerance\n";
  for (const auto& p : properties) {
    s << std::setw(28) << p.name << std::setw(6) << (p.pass ? "PASS" : "FAIL") << std::setw(14) << std::setprecision(4)
      << p.value << p.tolerance;
    if (!p.detail.empty()) s << "  (" << p.detail << ")";
    s << "\n";
  }
  if (!round_trip.empty()) {
    s << "rk4 round trip:";
    for (const auto& [steps, err] : round_trip) s << "  " << steps << ":" << std::setprecision(3) << err;
    s << "\n";
  }
  s << (pass() ? "all properties pass" : "some properties FAIL") << "\n";
  return s.str();
}

VerifyReport run_verify(const VerifyOptions& o) {
  VerifyReport rep;
  rep.seed = o.seed;
  Rng master(o.seed);
  const int c = o.latent_dim;

  {
    Rng rng = master.fork(1);
    rep.properties.push_back(at_most("identity_flow", 0.0, [&] {
      const FlowModel m = FlowModel::create(config(o, Mode::direct, Symmetry::off, SignKind::hub), rng.next_u64());
      const Mat x = random_points(rng, 100);
      const Vec z = random_code(rng, c, 0.1);
      const Mat y = ode::deform(m, PairContext(z, z), x, ode::OdeConfig::dopri5(1e-4, 1e-4));
      return y == x ? 0.0 : std::max(1e-300, (y - x).cwiseAbs().maxCoeff());  // bitwise check
    }));
  }
  {
    Rng rng = master.fork(2);
    rep.properties.push_back(at_most("negation_residual", 1e-12, [&] {
      double worst = 0.0;
      for (Mode mode : {Mode::direct, Mode::divergence_free})
        for (Symmetry sym : {Symmetry::off, Symmetry::plane_yz})
          for (SignKind sign : {SignKind::hub, SignKind::odd_mlp}) {
            const FlowModel m = FlowModel::create(config(o, mode, sym, sign), rng.next_u64());
            for (int i = 0; i < o.negation_points; ++i) {
              Vec zi = random_code(rng, c, 0.1), zj = random_code(rng, c, 0.1);
              if (sign == SignKind::hub) (i % 2 ? zi : zj).setZero();
              const PairContext ij(zi, zj);
              const Vec3 x = random_point(rng);
              const double t = rng.uniform();
              worst = std::max(worst, (flow::eval_flow(m, ij, x, t) + flow::eval_flow(m, ij.reversed(), x, 1.0 - t))
                                          .cwiseAbs()
                                          .maxCoeff());
            }
          }
      return worst;
    }));
  }
  {
    Rng rng = master.fork(3);
    rep.properties.push_back(below("divergence_residual", 1e-9, [&] {
      const FlowModel m =
          FlowModel::create(config(o, Mode::divergence_free, Symmetry::off, SignKind::hub), rng.next_u64());
      double worst = 0.0;
      for (int i = 0; i < o.points; ++i)
        worst = std::max(worst, std::abs(flow::divergence(m, random_point(rng), random_code(rng, c, 0.1))));
      return worst;
    }));
  }
  {
    Rng rng = master.fork(4);
    rep.properties.push_back(at_most("symmetry_residual", 1e-12, [&] {
      double worst = 0.0;
      for (Mode mode : {Mode::direct, Mode::divergence_free}) {
        const FlowModel m = FlowModel::create(config(o, mode, Symmetry::plane_yz, SignKind::hub), rng.next_u64());
        for (int i = 0; i < o.symmetry_points / 2; ++i) {
          const Vec3 p = random_point(rng);
          const Vec z = random_code(rng, c, 0.1);
          const Vec3 q(-p.x(), p.y(), p.z());
          const Vec3 a = flow::symmetrize(m, p, z), b = flow::symmetrize(m, q, z);
          worst = std::max({worst, std::abs(a.x() + b.x()), std::abs(a.y() - b.y()), std::abs(a.z() - b.z())});
          const Vec3 on_plane(0.0, p.y(), p.z());
          worst = std::max(worst, std::abs(flow::symmetrize(m, on_plane, z).x()));
        }
      }
      return worst;
    }));
  }
  {
    Rng rng = master.fork(5);
    const FlowModel m = FlowModel::create(config(o, Mode::direct, Symmetry::off, SignKind::hub), rng.next_u64());
    const Mat x = random_points(rng, 100);
    const PairContext ctx(random_code(rng, c, 0.3), Vec::Zero(c));
    rep.properties.push_back(below("round_trip_dopri5_1e-8", 1e-6, [&] {
      const auto cfg = ode::OdeConfig::dopri5(1e-8, 1e-8);
      return (ode::deform(m, ctx.reversed(), ode::deform(m, ctx, x, cfg), cfg) - x).cwiseAbs().maxCoeff();
    }));
    rep.properties.push_back(guarded(
        "round_trip_monotone", 0.0,
        [&] {
          double violations = 0.0;
          for (int steps : {5, 10, 20, 40}) {
            const auto cfg = ode::OdeConfig::rk4(steps);
            const double err = (ode::deform(m, ctx.reversed(), ode::deform(m, ctx, x, cfg), cfg) - x).cwiseAbs().maxCoeff();
            if (!rep.round_trip.empty() && !(err < rep.round_trip.back().second)) violations += 1.0;
            rep.round_trip.emplace_back(steps, err);
          }
          return violations;
        },
        [](double v) { return v == 0.0; }));
  }
  rep.properties.push_back(guarded(
      "rk4_order", 0.0,
      [] {
        const ode::Velocity decay = [](const Mat& x, double) { return Mat(-x); };
        auto err = [&](int steps) {
          return std::abs(ode::integrate(decay, Mat::Ones(1, 1), 0, 1, ode::OdeConfig::rk4(steps)).final_state()(0, 0) -
                          std::exp(-1.0));
        };
        return std::log2(err(5) / err(40)) / 3.0;
      },
      [](double v) { return v >= 3.5 && v <= 4.5; }));
  rep.properties.back().detail = "expected within [3.5, 4.5]";
  {
    Rng rng = master.fork(6);
    rep.properties.push_back(below("volume_drift", 5e-3, [&] {
      const FlowModel m =
          FlowModel::create(config(o, Mode::divergence_free, Symmetry::off, SignKind::hub), rng.next_u64());
      const geometry::Mesh sphere = geometry::icosphere(3, 0.3);
      const PairContext ctx(random_code(rng, c, 0.3), Vec::Zero(c));
      std::vector<double> stops;
      for (int k = 1; k <= 10; ++k) stops.push_back(0.1 * k);
      stops.back() = 1.0;
      const auto traj = ode::deform_trajectory(m, ctx, sphere.vertices, ode::OdeConfig::dopri5(1e-4, 1e-4), 1.0, stops);
      const double v0 = geometry::signed_volume(sphere);
      double worst = 0.0;
      for (const auto& s : traj.states)
        worst = std::max(worst, std::abs(geometry::signed_volume(s, sphere.faces) - v0) / std::abs(v0));
      return worst;
    }));
  }
  {
    Rng rng = master.fork(7);
    rep.properties.push_back(below("gradient_vs_fd", 1e-4, [&] {
      double worst = 0.0;
      for (Mode mode : {Mode::direct, Mode::divergence_free}) {
        VerifyOptions small = o;
        small.width = 8;
        small.latent_dim = 4;
        const FlowModel m = FlowModel::create(config(small, mode, Symmetry::plane_yz, SignKind::hub), rng.next_u64());
        const Vec zi = random_code(rng, 4, 0.3), zj = random_code(rng, 4, 0.3);
        const Mat pi = random_points(rng, 12), pj = random_points(rng, 12);
        const int steps = 5;
        numerics::Tape tape;
        const auto vars = flow::record_flow(tape, m, false);
        const auto zv = tape.leaf(zi.transpose());
        const auto l = training::hub_spoke_taped(vars, zv, tape.constant(zj.transpose()), tape.constant(pi),
                                                 tape.constant(pj), steps);
        tape.backward(l);
        const Mat g = tape.grad(zv);
        const double h = 1e-5;
        double scale = 0.0, err = 0.0;
        for (int k = 0; k < 4; ++k) {
          Vec a = zi, b = zi;
          a[k] += h;
          b[k] -= h;
          const auto cfg = ode::OdeConfig::rk4(steps);
          const double fd = (training::hub_spoke_loss(m, a, zj, pi, pj, cfg) - training::hub_spoke_loss(m, b, zj, pi, pj, cfg)) / (2 * h);
          scale = std::max(scale, std::abs(fd));
          err = std::max(err, std::abs(fd - g(0, k)));
        }
        worst = std::max(worst, err / std::max(scale, 1e-300));
      }
      return worst;
    }));
  }
  return rep;
}

}  // namespace fm::diagnostics
