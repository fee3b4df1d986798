#pragma once

#include <array>
#include <cstddef>

#include "flowmorph/geometry/mesh.hpp"

namespace fm::geometry {

inline constexpr double kIntersectEpsilon = 1e-10;

// Closed-triangle overlap test by separating axes: both face normals, the
// nine edge-edge cross products and the six in-plane edge normals. Touching
// within `eps` counts as intersecting.
bool triangles_intersect(const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b,
                         double eps = kIntersectEpsilon);

bool share_vertex(const Face& a, const Face& b);

// Number of face pairs that share no vertex index and intersect. A bounding
// volume hierarchy prunes candidate pairs; the predicate is the same as above.
std::size_t count_triangle_intersections(const Mesh& mesh, double eps = kIntersectEpsilon);

}  // namespace fm::geometry
