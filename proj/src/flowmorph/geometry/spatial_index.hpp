#pragma once

#include <vector>

#include "flowmorph/geometry/mesh.hpp"

namespace fm::geometry {

struct Neighbor {
  int index = -1;
  double sq_distance = 0.0;
};

// Exact nearest-neighbor kd-tree over a fixed point set. Distances are
// computed exactly as a brute-force scan would, and equal distances resolve
// to the lowest point index, so results match brute force bit for bit.
// Immutable after construction; concurrent queries are safe.
class SpatialIndex {
 public:
  explicit SpatialIndex(Mat points);

  Neighbor nearest(const Vec3& q) const;
  std::vector<Neighbor> nearest_all(const Mat& queries) const;

  const Mat& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }

 private:
  struct Node {
    int begin = 0, end = 0;  // range into order_
    int left = -1, right = -1;
    int axis = -1;           // -1 for leaves
    double split = 0.0;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, Neighbor& best) const;

  Mat points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

inline double sq_dist(const Mat& pts, int i, const Vec3& q) {
  const double dx = pts(i, 0) - q.x();
  const double dy = pts(i, 1) - q.y();
  const double dz = pts(i, 2) - q.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace fm::geometry
