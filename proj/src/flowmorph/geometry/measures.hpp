#pragma once

#include <cstdint>
#include <vector>

#include "flowmorph/geometry/mesh.hpp"

namespace fm::geometry {

struct SurfaceSample {
  Mat points = Mat(0, 3);
  std::vector<int> face;
  Mat barycentric = Mat(0, 3);  // weights of the face's three vertices
  std::vector<int> labels;      // label of the nearest face vertex, if the mesh has labels
};

// Area-weighted surface sampling, uniform within each triangle. Equal seeds
// give bitwise-equal output.
SurfaceSample sample_surface_detailed(const Mesh& mesh, std::size_t n, std::uint64_t seed);
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Unit normals per face; zero for degenerate faces.
Mat face_normals(const Mesh& mesh);

// (1/6) sum over faces of det[v0 v1 v2]; positive for closed outward-oriented meshes.
double signed_volume(const Mesh& mesh);
double signed_volume(const Mat& vertices, const std::vector<Face>& faces);

struct Edge {
  int a = 0;  // a < b
  int b = 0;
  double length = 0.0;
};

// Undirected edges of the triangle graph sorted by (a, b).
std::vector<std::pair<int, int>> unique_edges(const std::vector<Face>& faces);
std::vector<Edge> edge_lengths(const Mesh& mesh);

// Mean of |len' - len| / len over edges with nonzero original length.
double mean_relative_edge_change(const Mesh& before, const Mat& vertices_after);

}  // namespace fm::geometry
