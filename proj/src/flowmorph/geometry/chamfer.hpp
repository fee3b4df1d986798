#pragma once

#include <vector>

#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/geometry/spatial_index.hpp"

namespace fm::geometry {

enum class ChamferVariant {
  // mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2
  sq_l2_train,
  // (mean_a min_b |a-b| + mean_b min_a |a-b|) / 2
  l1_eval,
};

double chamfer(const Mat& a, const Mat& b, ChamferVariant variant);
double chamfer(const PointCloud& a, const PointCloud& b, ChamferVariant variant);

// Index of the nearest row of `target` for every row of `queries`.
std::vector<int> nearest_indices(const Mat& queries, const Mat& target);

}  // namespace fm::geometry
