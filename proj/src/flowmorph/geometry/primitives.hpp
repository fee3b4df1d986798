#pragma once

#include <vector>

#include "flowmorph/geometry/mesh.hpp"

namespace fm::geometry {

// Axis-aligned cube of side 1 centered at the origin, 12 outward triangles.
Mesh unit_cube();

// Icosahedron refined `level` times by edge midpoints, projected to the sphere.
Mesh icosphere(int level, double radius = 1.0);

// Closed surface of the box [-e/2, e/2] with `divisions` grid cells along each
// axis, outward oriented. Vertices on shared edges are welded.
Mesh box_surface(const Vec3& extent, const std::array<int, 3>& divisions);

// Open nx x ny grid of unit-spaced quads in the z = 0 plane, two triangles each.
Mesh flat_grid(int nx, int ny, double spacing = 1.0);

// Wraps the x axis around a circle of radius r in the xy plane:
// x' = (r - y) sin(x / r), y' = r - (r - y) cos(x / r).
Mesh bend_about_z(const Mesh& mesh, double radius);

// Concatenates meshes, offsetting face indices. Labels are kept only when
// every part has them.
Mesh merge(const std::vector<Mesh>& parts);

Mesh translated(const Mesh& mesh, const Vec3& by);
Mesh scaled(const Mesh& mesh, const Vec3& by);

// Reverses the winding of every face.
Mesh flipped(const Mesh& mesh);

}  // namespace fm::geometry
