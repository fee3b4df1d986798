#include "flowmorph/geometry/primitives.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace fm::geometry {

namespace {

Mesh from_lists(const std::vector<Vec3>& v, std::vector<Face> f) {
  Mesh m;
  m.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  m.faces = std::move(f);
  return m;
}

}  // namespace

Mesh unit_cube() { return box_surface(Vec3::Ones(), {1, 1, 1}); }

Mesh icosphere(int level, double radius) {
  if (level < 0) throw std::invalid_argument("icosphere: negative level");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v{{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                      {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (auto& x : v) x.normalize();
  std::vector<Face> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(Vec3(0.5 * (v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)])).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& x : v) x *= radius;
  return from_lists(v, std::move(f));
}

Mesh box_surface(const Vec3& extent, const std::array<int, 3>& divisions) {
  for (int d : divisions)
    if (d < 1) throw std::invalid_argument("box_surface: divisions must be >= 1");
  std::map<std::array<int, 3>, int> ids;
  std::vector<Vec3> v;
  auto vertex = [&](std::array<int, 3> g) {
    auto it = ids.find(g);
    if (it != ids.end()) return it->second;
    Vec3 p;
    for (int a = 0; a < 3; ++a)
      p[a] = extent[a] * (static_cast<double>(g[static_cast<std::size_t>(a)]) / divisions[static_cast<std::size_t>(a)] - 0.5);
    v.push_back(p);
    const int id = static_cast<int>(v.size()) - 1;
    ids.emplace(g, id);
    return id;
  };
  std::vector<Face> f;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, w = (axis + 2) % 3;
    const int nu = divisions[static_cast<std::size_t>(u)], nw = divisions[static_cast<std::size_t>(w)];
    for (int side = 0; side < 2; ++side) {
      for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nw; ++j) {
          auto at = [&](int di, int dj) {
            std::array<int, 3> g{};
            g[static_cast<std::size_t>(axis)] = side * divisions[static_cast<std::size_t>(axis)];
            g[static_cast<std::size_t>(u)] = i + di;
            g[static_cast<std::size_t>(w)] = j + dj;
            return vertex(g);
          };
          const int a = at(0, 0), b = at(1, 0), c = at(1, 1), d = at(0, 1);
          // (u, w, axis) is right-handed, so a-b-c winds toward +axis.
          if (side == 1) {
            f.push_back({a, b, c});
            f.push_back({a, c, d});
          } else {
            f.push_back({a, c, b});
            f.push_back({a, d, c});
          }
        }
    }
  }
  return from_lists(v, std::move(f));
}

Mesh flat_grid(int nx, int ny, double spacing) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("flat_grid: need at least one cell");
  std::vector<Vec3> v;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) v.emplace_back(i * spacing, j * spacing, 0.0);
  std::vector<Face> f;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return from_lists(v, std::move(f));
}

Mesh bend_about_z(const Mesh& mesh, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("bend_about_z: radius must be positive");
  Mat out = mesh.vertices;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double x = mesh.vertices(i, 0), y = mesh.vertices(i, 1);
    out(i, 0) = (radius - y) * std::sin(x / radius);
    out(i, 1) = radius - (radius - y) * std::cos(x / radius);
  }
  return with_vertices(mesh, std::move(out));
}

Mesh merge(const std::vector<Mesh>& parts) {
  Mesh out;
  Eigen::Index total = 0;
  bool labels = !parts.empty();
  for (const auto& p : parts) {
    total += p.vertex_count();
    labels = labels && p.has_labels();
  }
  out.vertices.resize(total, 3);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.vertices.middleRows(at, p.vertex_count()) = p.vertices;
    const int off = static_cast<int>(at);
    for (const auto& t : p.faces) out.faces.push_back({t[0] + off, t[1] + off, t[2] + off});
    if (labels) out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    at += p.vertex_count();
  }
  return out;
}

Mesh translated(const Mesh& mesh, const Vec3& by) {
  Mat v = mesh.vertices.rowwise() + by.transpose();
  return with_vertices(mesh, std::move(v));
}

Mesh scaled(const Mesh& mesh, const Vec3& by) {
  Mat v = mesh.vertices * by.asDiagonal();
  return with_vertices(mesh, std::move(v));
}

Mesh flipped(const Mesh& mesh) {
  Mesh out = mesh;
  for (auto& t : out.faces) std::swap(t[1], t[2]);
  return out;
}

}  // namespace fm::geometry
