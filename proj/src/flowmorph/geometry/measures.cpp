#include "flowmorph/geometry/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowmorph/numerics/rng.hpp"

namespace fm::geometry {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

SurfaceSample sample_surface_detailed(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  mesh.validate();
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    total += triangle_area(mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2]));
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_surface: mesh has no non-degenerate triangle");

  numerics::Rng rng(seed);
  SurfaceSample s;
  s.points.resize(static_cast<Eigen::Index>(n), 3);
  s.barycentric.resize(static_cast<Eigen::Index>(n), 3);
  s.face.resize(n);
  if (mesh.has_labels()) s.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    // upper_bound never lands on a zero-area face.
    const auto f = static_cast<std::size_t>(it - cumulative.begin());
    const auto& t = mesh.faces[f];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double w0 = 1.0 - r1, w1 = r1 * (1.0 - r2), w2 = r1 * r2;
    const auto row = static_cast<Eigen::Index>(i);
    s.points.row(row) = w0 * mesh.vertices.row(t[0]) + w1 * mesh.vertices.row(t[1]) + w2 * mesh.vertices.row(t[2]);
    s.barycentric.row(row) << w0, w1, w2;
    s.face[i] = static_cast<int>(f);
    if (mesh.has_labels()) {
      const Vec3 p = s.points.row(row).transpose();
      std::size_t k = 0;
      double best = (p - mesh.vertex(t[0])).squaredNorm();
      for (std::size_t c = 1; c < 3; ++c) {
        const double d = (p - mesh.vertex(t[c])).squaredNorm();
        if (d < best) {
          best = d;
          k = c;
        }
      }
      s.labels[i] = mesh.labels[static_cast<std::size_t>(t[k])];
    }
  }
  return s;
}

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  SurfaceSample s = sample_surface_detailed(mesh, n, seed);
  return PointCloud{std::move(s.points), std::move(s.labels)};
}

Mat face_normals(const Mesh& mesh) {
  Mat n(static_cast<Eigen::Index>(mesh.faces.size()), 3);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const Vec3 c = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
    const double len = c.norm();
    n.row(static_cast<Eigen::Index>(f)) = len > 0.0 ? Vec3(c / len) : Vec3::Zero();
  }
  return n;
}

double signed_volume(const Mat& v, const std::vector<Face>& faces) {
  double sum = 0.0;
  for (const auto& t : faces) {
    const Vec3 a = v.row(t[0]), b = v.row(t[1]), c = v.row(t[2]);
    sum += a.dot(b.cross(c));
  }
  return sum / 6.0;
}

double signed_volume(const Mesh& mesh) { return signed_volume(mesh.vertices, mesh.faces); }

std::vector<std::pair<int, int>> unique_edges(const std::vector<Face>& faces) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(faces.size() * 3);
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
      if (a == b) continue;
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<Edge> edge_lengths(const Mesh& mesh) {
  std::vector<Edge> out;
  for (const auto& [a, b] : unique_edges(mesh.faces)) out.push_back({a, b, (mesh.vertex(a) - mesh.vertex(b)).norm()});
  // A face with a repeated vertex contributes a zero-length self edge.
  for (const auto& t : mesh.faces)
    for (int k = 0; k < 3; ++k)
      if (t[static_cast<std::size_t>(k)] == t[static_cast<std::size_t>((k + 1) % 3)]) {
        const int a = t[static_cast<std::size_t>(k)];
        Edge e{a, a, 0.0};
        auto pos = std::lower_bound(out.begin(), out.end(), e,
                                    [](const Edge& x, const Edge& y) { return std::pair(x.a, x.b) < std::pair(y.a, y.b); });
        if (pos == out.end() || pos->a != a || pos->b != a) out.insert(pos, e);
      }
  return out;
}

double mean_relative_edge_change(const Mesh& before, const Mat& after) {
  if (after.rows() != before.vertices.rows()) throw std::invalid_argument("mean_relative_edge_change: count mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [a, b] : unique_edges(before.faces)) {
    const double l0 = (before.vertices.row(a) - before.vertices.row(b)).norm();
    if (l0 <= 0.0) continue;
    sum += std::abs((after.row(a) - after.row(b)).norm() - l0) / l0;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace fm::geometry
