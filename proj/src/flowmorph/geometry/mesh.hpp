#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fm::geometry {

using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Triangle mesh. Vertices are rows of an N x 3 matrix; labels, when present,
// hold one small integer id per vertex.
struct Mesh {
  Mat vertices = Mat(0, 3);
  std::vector<Face> faces;
  std::vector<int> labels;

  Eigen::Index vertex_count() const { return vertices.rows(); }
  std::size_t face_count() const { return faces.size(); }
  bool has_labels() const { return !labels.empty(); }
  Vec3 vertex(int i) const { return vertices.row(i).transpose(); }

  // Throws std::invalid_argument if a face index or the label count is invalid.
  void validate() const;
};

// Unordered point samples, one per row.
struct PointCloud {
  Mat points = Mat(0, 3);
  std::vector<int> labels;

  Eigen::Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }
};

enum class MeshFormat { obj, ply };

struct LoadReport {
  std::size_t degenerate_faces = 0;
  std::size_t polygons_split = 0;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Format deduced from the extension when not given. OBJ labels are read from
// the sidecar `<stem>.labels.txt` next to the mesh when it exists.
Mesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt,
               LoadReport* report = nullptr);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt);

std::filesystem::path label_sidecar_path(const std::filesystem::path& mesh_path);
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

// Point files: whitespace-separated "x y z [label]" rows (.xyz/.txt/.pts),
// or the vertices of an OBJ/PLY file.
PointCloud load_points(const std::filesystem::path& path);
void save_points(const PointCloud& cloud, const std::filesystem::path& path);

struct NormalizeResult {
  Mesh mesh;
  double scale = 1.0;
  Vec3 offset = Vec3::Zero();
};

// Centers the bounding box at the origin and scales the longest side to 1.
// Original coordinates are recovered as v * scale + offset.
NormalizeResult normalize_to_unit(const Mesh& mesh);

Mesh with_vertices(const Mesh& mesh, Mat vertices);

}  // namespace fm::geometry
