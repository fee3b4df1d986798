#include "flowmorph/interp/interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "flowmorph/geometry/intersect.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/numerics/adam.hpp"
#include "flowmorph/ode/deform.hpp"
#include "flowmorph/training/losses.hpp"

namespace fm::interp {

using numerics::Tape;
using numerics::Var;

namespace {

void check_pair(const geometry::Mesh& x0, const geometry::Mesh& x1) {
  x0.validate();
  x1.validate();
  if (x0.vertex_count() != x1.vertex_count())
    throw std::invalid_argument("keyframes need the same vertex count (vertex-wise correspondence)");
}

Mat lerp(const Mat& a, const Mat& b, double alpha) { return (1.0 - alpha) * a + alpha * b; }

// States of one branch at the requested times (ascending, within [0, 1]).
std::vector<Mat> branch_states(const FittedPair& fit, const flow::PairContext& ctx, const Mat& start,
                               const std::vector<double>& times, const ode::OdeConfig& cfg) {
  std::vector<double> stops;
  for (double t : times)
    if (t > 0.0 && (stops.empty() || t > stops.back())) stops.push_back(t);
  std::vector<Mat> out;
  if (stops.empty()) {
    out.assign(times.size(), start);
    return out;
  }
  const auto traj = ode::deform_trajectory(fit.model, ctx, start, cfg, 1.0, stops);
  for (double t : times) {
    if (t <= 0.0) {
      out.push_back(start);
      continue;
    }
    const auto it = std::find(traj.times.begin(), traj.times.end(), t);
    if (it == traj.times.end()) throw std::logic_error("interpolation: requested time missing from trajectory");
    out.push_back(traj.states[static_cast<std::size_t>(it - traj.times.begin())]);
  }
  return out;
}

}  // namespace

void InterpConfig::validate() const {
  if (frames < 2) throw std::invalid_argument("frame count must be at least 2");
  if (supervision_frames < 0) throw std::invalid_argument("supervision_frames must be non-negative");
  if (!(edge_weight >= 0.0)) throw std::invalid_argument("edge_weight must be non-negative");
  if (max_edges < 1) throw std::invalid_argument("max_edges must be at least 1");
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  flow.validate();
  render_ode.validate();
}

nlohmann::json to_json(const InterpConfig& c) {
  return {{"frames", c.frames},
          {"supervision_frames", c.supervision_frames},
          {"mode", flow::mode_name(c.flow.mode)},
          {"symmetry", flow::symmetry_name(c.flow.symmetry)},
          {"sign", flow::sign_name(c.flow.sign)},
          {"latent_dim", c.flow.latent_dim},
          {"width", c.flow.width},
          {"activation", numerics::activation_name(c.flow.activation)},
          {"edge_weight", c.edge_weight},
          {"max_edges", c.max_edges},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"latent_std", c.latent_std},
          {"train_ode", ode::OdeConfig::rk4(c.rk4_steps()).describe()},
          {"render_ode", c.render_ode.describe()}};
}

FittedPair fit_pair(const geometry::Mesh& x0, const geometry::Mesh& x1, const InterpConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_pair(x0, x1);
  numerics::Rng rng(seed);
  FittedPair fit;
  fit.model = flow::FlowModel::create(cfg.flow, rng.next_u64());
  const int c = cfg.flow.latent_dim;
  fit.z0 = Vec::Zero(c);
  fit.z1 = Vec::Zero(c);
  // Identical keyframes: the zero-length path is the exact minimizer.
  if (x0.vertices == x1.vertices) return fit;
  for (int k = 0; k < c; ++k) fit.z1[k] = rng.normal(0.0, cfg.latent_std);

  const int steps = cfg.rk4_steps();
  std::vector<Mat> targets;  // at alpha = k / steps
  for (int k = 0; k <= steps; ++k) targets.push_back(lerp(x0.vertices, x1.vertices, static_cast<double>(k) / steps));
  const bool with_edges = cfg.edge_weight > 0.0;

  numerics::Adam opt;
  Mat z1 = fit.z1.transpose();
  for (long step = 0; step < cfg.steps; ++step) {
    numerics::Rng step_rng = rng.fork(static_cast<std::uint64_t>(step));
    Tape tape;
    const auto vars = flow::record_flow(tape, fit.model, true);
    const Var hub = tape.constant(Mat::Zero(1, c));
    const Var zv = tape.leaf(z1);
    std::vector<Var> fwd, bwd;
    ode::deform_taped(vars, hub, zv, tape.constant(x0.vertices), steps, 1.0, &fwd);
    ode::deform_taped(vars, zv, hub, tape.constant(x1.vertices), steps, 1.0, &bwd);
    std::vector<Var> terms;
    training::EdgeSubset e0, e1;
    if (with_edges) {
      e0 = training::select_edges(x0, static_cast<std::size_t>(cfg.max_edges), step_rng);
      e1 = training::select_edges(x1, static_cast<std::size_t>(cfg.max_edges), step_rng);
    }
    for (int k = 1; k <= steps; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      Var term = add(training::vertex_l2_taped(fwd[uk], tape.constant(targets[uk])),
                     training::vertex_l2_taped(bwd[uk], tape.constant(targets[static_cast<std::size_t>(steps - k)])));
      if (with_edges) {
        const Var edge = add(training::edge_regularizer_taped(gather_rows(fwd[uk], e0.vertices), e0),
                             training::edge_regularizer_taped(gather_rows(bwd[uk], e1.vertices), e1));
        term = add(term, scale(edge, cfg.edge_weight));
      }
      terms.push_back(term);
    }
    Var total = terms.front();
    for (std::size_t k = 1; k < terms.size(); ++k) total = add(total, terms[k]);
    total = scale(total, 1.0 / steps);
    const double value = tape.value(total)(0, 0);
    if (!std::isfinite(value)) throw std::runtime_error("fit_pair: non-finite loss at step " + std::to_string(step));
    fit.loss.push_back(value);
    tape.backward(total);
    const flow::FlowModel g = flow::flow_gradients(tape, vars, fit.model);
    std::vector<Mat*> params;
    std::vector<Mat> grads;
    for (std::size_t l = 0; l < fit.model.backbone.layers.size(); ++l) {
      params.push_back(&fit.model.backbone.layers[l].weight);
      params.push_back(&fit.model.backbone.layers[l].bias);
      grads.push_back(g.backbone.layers[l].weight);
      grads.push_back(g.backbone.layers[l].bias);
    }
    for (std::size_t l = 0; l < fit.model.sign_net.layers.size(); ++l) {
      params.push_back(&fit.model.sign_net.layers[l].weight);
      grads.push_back(g.sign_net.layers[l].weight);
    }
    params.push_back(&z1);
    grads.push_back(tape.grad(zv));
    opt.step(params, grads, cfg.learning_rate);
  }
  fit.z1 = z1.row(0).transpose();
  return fit;
}

std::vector<Mat> interpolate_all(const FittedPair& fit, const geometry::Mesh& x0, const geometry::Mesh& x1,
                                 const std::vector<double>& alphas, const ode::OdeConfig& cfg) {
  check_pair(x0, x1);
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] >= 0.0 && alphas[k] <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (k > 0 && alphas[k] < alphas[k - 1]) throw std::invalid_argument("alphas must be ascending");
  }
  const flow::PairContext forward(fit.z0, fit.z1);
  std::vector<double> back_times;
  for (auto it = alphas.rbegin(); it != alphas.rend(); ++it) back_times.push_back(1.0 - *it);
  const auto a = branch_states(fit, forward, x0.vertices, alphas, cfg);
  const auto b = branch_states(fit, forward.reversed(), x1.vertices, back_times, cfg);
  std::vector<Mat> out;
  for (std::size_t k = 0; k < alphas.size(); ++k) out.push_back(0.5 * (a[k] + b[alphas.size() - 1 - k]));
  return out;
}

Mat interpolate(const FittedPair& fit, const geometry::Mesh& x0, const geometry::Mesh& x1, double alpha,
                const ode::OdeConfig& cfg) {
  return interpolate_all(fit, x0, x1, {alpha}, cfg).front();
}

FrameStats frame_stats(const geometry::Mesh& x0, const Mat& vertices, double alpha) {
  FrameStats s;
  s.alpha = alpha;
  const geometry::Mesh m = geometry::with_vertices(x0, vertices);
  const double v0 = geometry::signed_volume(x0);
  s.volume = geometry::signed_volume(m);
  s.volume_change = v0 != 0.0 ? (s.volume - v0) / std::abs(v0) : 0.0;
  s.edge_change = geometry::mean_relative_edge_change(x0, vertices);
  s.intersections = geometry::count_triangle_intersections(m);
  return s;
}

namespace {

double max_drift(const std::vector<FrameStats>& f) {
  double worst = 0.0;
  for (const auto& s : f) worst = std::max(worst, std::abs(s.volume_change));
  return worst;
}

nlohmann::json frames_json(const std::vector<FrameStats>& frames) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : frames)
    arr.push_back({{"alpha", s.alpha},
                   {"volume", s.volume},
                   {"volume_change", s.volume_change},
                   {"edge_change", s.edge_change},
                   {"intersections", s.intersections}});
  return arr;
}

}  // namespace

double AnimationReport::max_volume_drift() const { return max_drift(frames); }
double AnimationReport::max_baseline_volume_drift() const { return max_drift(baseline); }

nlohmann::json AnimationReport::to_json() const {
  return {{"frames", frames_json(frames)},
          {"baseline", frames_json(baseline)},
          {"max_volume_drift", max_volume_drift()},
          {"max_baseline_volume_drift", max_baseline_volume_drift()}};
}

AnimationReport render_animation(const FittedPair& fit, const geometry::Mesh& x0, const geometry::Mesh& x1,
                                 const InterpConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::vector<double> alphas;
  for (int f = 0; f < cfg.frames; ++f) alphas.push_back(static_cast<double>(f) / (cfg.frames - 1));
  AnimationReport r;
  r.frame_vertices = interpolate_all(fit, x0, x1, alphas, cfg.render_ode);
  for (std::size_t f = 0; f < alphas.size(); ++f) {
    r.baseline_vertices.push_back(lerp(x0.vertices, x1.vertices, alphas[f]));
    r.frames.push_back(frame_stats(x0, r.frame_vertices[f], alphas[f]));
    r.baseline.push_back(frame_stats(x0, r.baseline_vertices[f], alphas[f]));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    char name[32];
    for (std::size_t f = 0; f < alphas.size(); ++f) {
      std::snprintf(name, sizeof name, "frame_%04zu.obj", f);
      geometry::save_mesh(geometry::with_vertices(x0, r.frame_vertices[f]), out_dir / name);
      std::snprintf(name, sizeof name, "baseline_%04zu.obj", f);
      geometry::save_mesh(geometry::with_vertices(x0, r.baseline_vertices[f]), out_dir / name);
    }
    nlohmann::json j = r.to_json();
    j["config"] = to_json(cfg);
    std::ofstream out(out_dir / "report.json");
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "report.json").string());
    out << j.dump(2) << "\n";
  }
  return r;
}

}  // namespace fm::interp
