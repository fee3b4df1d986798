#include "flowmorph/geometry/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fm::geometry {

namespace {
constexpr int kLeafSize = 8;
}

SpatialIndex::SpatialIndex(Mat points) : points_(std::move(points)) {
  if (points_.cols() != 3) throw std::invalid_argument("SpatialIndex: points must be N x 3");
  if (points_.rows() == 0) throw std::invalid_argument("SpatialIndex: empty point set");
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * order_.size() / kLeafSize + 2);
  build(0, static_cast<int>(order_.size()));
}

int SpatialIndex::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int k = begin; k < end; ++k) {
    const Vec3 p = points_.row(order_[static_cast<std::size_t>(k)]);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const int mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double pa = points_(a, axis), pb = points_(b, axis);
    return pa < pb || (pa == pb && a < b);
  });
  const double split = points_(order_[static_cast<std::size_t>(mid)], axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void SpatialIndex::search(int node_id, const Vec3& q, Neighbor& best) const {
  const Node& n = nodes_[static_cast<std::size_t>(node_id)];
  if (n.axis < 0) {
    for (int k = n.begin; k < n.end; ++k) {
      const int i = order_[static_cast<std::size_t>(k)];
      const double d = sq_dist(points_, i, q);
      if (d < best.sq_distance || (d == best.sq_distance && (best.index < 0 || i < best.index))) best = {i, d};
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[n.axis] - n.split;
  const int near = diff <= 0.0 ? n.left : n.right;
  const int far = diff <= 0.0 ? n.right : n.left;
  search(near, q, best);
  // Ties must still be visited so the lowest index wins.
  if (diff * diff <= best.sq_distance) search(far, q, best);
}

Neighbor SpatialIndex::nearest(const Vec3& q) const {
  Neighbor best{-1, std::numeric_limits<double>::infinity()};
  search(0, q, best);
  // Only NaN distances remain; hand back a valid index so the NaN propagates.
  if (best.index < 0 && points_.rows() > 0) best = {0, std::numeric_limits<double>::quiet_NaN()};
  return best;
}

std::vector<Neighbor> SpatialIndex::nearest_all(const Mat& queries) const {
  std::vector<Neighbor> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out[static_cast<std::size_t>(i)] = nearest(queries.row(i).transpose());
  return out;
}

}  // namespace fm::geometry
