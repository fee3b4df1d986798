#include "flowmorph/canonical/correspond.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "flowmorph/geometry/spatial_index.hpp"
#include "flowmorph/ode/deform.hpp"

namespace fm::canonical {

geometry::Mesh canonicalize(const FlowModel& model, const geometry::Mesh& mesh, const Vec& z, const ode::OdeConfig& cfg) {
  mesh.validate();
  const flow::PairContext to_hub(z, Vec::Zero(z.size()));
  return geometry::with_vertices(mesh, ode::deform(model, to_hub, mesh.vertices, cfg));
}

Correspondence match_points(const Mat& from, const Mat& to) {
  if (to.rows() == 0) throw std::invalid_argument("correspondence target has no vertices");
  const geometry::SpatialIndex index(to);
  Correspondence c;
  c.target.reserve(static_cast<std::size_t>(from.rows()));
  c.distance.reserve(static_cast<std::size_t>(from.rows()));
  for (const auto& nb : index.nearest_all(from)) {
    c.target.push_back(nb.index);
    c.distance.push_back(std::sqrt(nb.sq_distance));
  }
  return c;
}

Correspondence correspond(const FlowModel& model, const geometry::Mesh& xi, const Vec& zi, const geometry::Mesh& xj,
                          const Vec& zj, const ode::OdeConfig& cfg) {
  return match_points(canonicalize(model, xi, zi, cfg).vertices, canonicalize(model, xj, zj, cfg).vertices);
}

Correspondence naive_correspond(const geometry::Mesh& xi, const geometry::Mesh& xj) {
  return match_points(xi.vertices, xj.vertices);
}

SmsReport sms(const geometry::Mesh& xi, const geometry::Mesh& xj, const Correspondence& fwd, const Correspondence& bwd) {
  if (!xi.has_labels() || !xj.has_labels()) throw std::invalid_argument("sms needs labels on both shapes");
  if (fwd.size() != static_cast<std::size_t>(xi.vertex_count()) || bwd.size() != static_cast<std::size_t>(xj.vertex_count()))
    throw std::invalid_argument("sms: correspondence does not cover the shape's vertices");
  auto rate = [](const std::vector<int>& from, const std::vector<int>& to, const Correspondence& c) {
    if (c.size() == 0) return 0.0;
    std::size_t same = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const int t = c.target[k];
      if (t < 0 || static_cast<std::size_t>(t) >= to.size()) throw std::out_of_range("sms: target index out of range");
      same += from[k] == to[static_cast<std::size_t>(t)];
    }
    return static_cast<double>(same) / static_cast<double>(c.size());
  };
  SmsReport r;
  r.forward = rate(xi.labels, xj.labels, fwd);
  r.backward = rate(xj.labels, xi.labels, bwd);
  r.score = 0.5 * (r.forward + r.backward);
  r.matched = fwd.size() + bwd.size();
  return r;
}

void save_correspondence_csv(const Correspondence& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "source,target,distance\n";
  for (std::size_t k = 0; k < c.size(); ++k) out << k << "," << c.target[k] << "," << c.distance[k] << "\n";
}

}  // namespace fm::canonical
