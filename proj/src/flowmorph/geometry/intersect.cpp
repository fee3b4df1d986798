#include "flowmorph/geometry/intersect.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Geometry>

namespace fm::geometry {

namespace {

bool separated_along(const Vec3& axis, const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b, double eps) {
  const double len2 = axis.squaredNorm();
  if (len2 < 1e-30) return false;
  const Vec3 n = axis / std::sqrt(len2);
  double amin = n.dot(a[0]), amax = amin, bmin = n.dot(b[0]), bmax = bmin;
  for (int k = 1; k < 3; ++k) {
    const double pa = n.dot(a[static_cast<std::size_t>(k)]);
    const double pb = n.dot(b[static_cast<std::size_t>(k)]);
    amin = std::min(amin, pa);
    amax = std::max(amax, pa);
    bmin = std::min(bmin, pb);
    bmax = std::max(bmax, pb);
  }
  return amax < bmin - eps || bmax < amin - eps;
}

struct Box {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Box& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool overlaps(const Box& o) const { return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all(); }
};

class Bvh {
 public:
  Bvh(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
    order_.resize(boxes_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) build(0, static_cast<int>(order_.size()));
  }

  template <class Fn>
  void query(const Box& q, Fn&& fn) const {
    if (nodes_.empty()) return;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      if (!n.box.overlaps(q)) continue;
      if (n.left < 0) {
        for (int k = n.begin; k < n.end; ++k) fn(order_[static_cast<std::size_t>(k)]);
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
  }

 private:
  struct Node {
    Box box;
    int begin = 0, end = 0;
    int left = -1, right = -1;
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{});
    Box box, centers;
    for (int k = begin; k < end; ++k) {
      const Box& b = boxes_[static_cast<std::size_t>(order_[static_cast<std::size_t>(k)])];
      box.grow(b);
      centers.grow(Vec3(0.5 * (b.lo + b.hi)));
    }
    nodes_[static_cast<std::size_t>(id)].box = box;
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    if (end - begin <= 4) return id;
    int axis;
    (centers.hi - centers.lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      const double ca = boxes_[static_cast<std::size_t>(a)].lo[axis] + boxes_[static_cast<std::size_t>(a)].hi[axis];
      const double cb = boxes_[static_cast<std::size_t>(b)].lo[axis] + boxes_[static_cast<std::size_t>(b)].hi[axis];
      return ca < cb || (ca == cb && a < b);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  std::vector<Box> boxes_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace

bool triangles_intersect(const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b, double eps) {
  const std::array<Vec3, 3> ea{a[1] - a[0], a[2] - a[1], a[0] - a[2]};
  const std::array<Vec3, 3> eb{b[1] - b[0], b[2] - b[1], b[0] - b[2]};
  const Vec3 na = ea[0].cross(a[2] - a[0]);
  const Vec3 nb = eb[0].cross(b[2] - b[0]);
  if (separated_along(na, a, b, eps) || separated_along(nb, a, b, eps)) return false;
  for (const auto& u : ea)
    for (const auto& v : eb)
      if (separated_along(u.cross(v), a, b, eps)) return false;
  for (const auto& u : ea)
    if (separated_along(na.cross(u), a, b, eps)) return false;
  for (const auto& v : eb)
    if (separated_along(nb.cross(v), a, b, eps)) return false;
  return true;
}

bool share_vertex(const Face& a, const Face& b) {
  for (int x : a)
    for (int y : b)
      if (x == y) return true;
  return false;
}

std::size_t count_triangle_intersections(const Mesh& mesh, double eps) {
  mesh.validate();
  const auto tri = [&](std::size_t f) {
    const auto& t = mesh.faces[f];
    return std::array<Vec3, 3>{mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])};
  };
  std::vector<Box> boxes(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (const auto& p : tri(f)) boxes[f].grow(p);
    boxes[f].lo.array() -= eps;
    boxes[f].hi.array() += eps;
  }
  const Bvh bvh(boxes);
  std::size_t count = 0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto ti = tri(i);
    bvh.query(boxes[i], [&](int j) {
      const auto sj = static_cast<std::size_t>(j);
      if (sj <= i || share_vertex(mesh.faces[i], mesh.faces[sj])) return;
      if (triangles_intersect(ti, tri(sj), eps)) ++count;
    });
  }
  return count;
}

}  // namespace fm::geometry
