#include "flowmorph/geometry/chamfer.hpp"

#include <cmath>
#include <stdexcept>

namespace fm::geometry {

namespace {

double directed(const Mat& from, const SpatialIndex& to, bool squared) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    const double d = to.nearest(from.row(i).transpose()).sq_distance;
    sum += squared ? d : std::sqrt(d);
  }
  return sum / static_cast<double>(from.rows());
}

}  // namespace

double chamfer(const Mat& a, const Mat& b, ChamferVariant variant) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("chamfer: empty point cloud");
  const SpatialIndex ia(a), ib(b);
  const bool sq = variant == ChamferVariant::sq_l2_train;
  const double ab = directed(a, ib, sq);
  const double ba = directed(b, ia, sq);
  return sq ? ab + ba : 0.5 * (ab + ba);
}

double chamfer(const PointCloud& a, const PointCloud& b, ChamferVariant variant) {
  return chamfer(a.points, b.points, variant);
}

std::vector<int> nearest_indices(const Mat& queries, const Mat& target) {
  const SpatialIndex index(target);
  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    out[static_cast<std::size_t>(i)] = index.nearest(queries.row(i).transpose()).index;
  return out;
}

}  // namespace fm::geometry
