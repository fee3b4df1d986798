#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flowmorph/geometry/mesh.hpp"

namespace fm::geometry {

namespace fs = std::filesystem;

void Mesh::validate() const {
  if (vertices.cols() != 3) throw std::invalid_argument("mesh vertices must have 3 columns");
  const auto n = vertices.rows();
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int v : faces[f])
      if (v < 0 || v >= n)
        throw std::invalid_argument("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                                    " of " + std::to_string(n));
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("label count does not match vertex count");
}

Mesh with_vertices(const Mesh& mesh, Mat vertices) {
  if (vertices.rows() != mesh.vertices.rows() || vertices.cols() != 3)
    throw std::invalid_argument("with_vertices: vertex count mismatch");
  Mesh out = mesh;
  out.vertices = std::move(vertices);
  return out;
}

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

MeshFormat deduce_format(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".ply") return MeshFormat::ply;
  throw std::invalid_argument("cannot deduce mesh format from extension '" + ext + "'");
}

bool is_degenerate(const Mat& v, const Face& f) {
  if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) return true;
  const Vec3 a = v.row(f[0]), b = v.row(f[1]), c = v.row(f[2]);
  return (b - a).cross(c - a).squaredNorm() == 0.0;
}

void fan_triangulate(const std::vector<int>& poly, std::vector<Face>& faces, LoadReport& report) {
  if (poly.size() > 3) ++report.polygons_split;
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

void finish(Mesh& m, LoadReport& report, const fs::path& path) {
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  for (const auto& f : m.faces)
    if (is_degenerate(m.vertices, f)) ++report.degenerate_faces;
}

Mesh load_obj(const fs::path& path, LoadReport& report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> coords;
  std::vector<std::vector<int>> polys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      coords.insert(coords.end(), {x, y, z});
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      const long nverts = static_cast<long>(coords.size() / 3);
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long idx;
        try {
          std::size_t used = 0;
          idx = std::stol(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad face index '" + tok + "'");
        }
        // Negative indices are relative to the vertices read so far.
        const long resolved = idx < 0 ? nverts + idx : idx - 1;
        if (idx == 0) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": face index 0");
        poly.push_back(static_cast<int>(resolved));
      }
      if (poly.size() < 3) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": face with < 3 vertices");
      polys.push_back(std::move(poly));
    }
  }
  Mesh m;
  m.vertices.resize(static_cast<Eigen::Index>(coords.size() / 3), 3);
  for (Eigen::Index i = 0; i < m.vertices.rows(); ++i)
    for (int c = 0; c < 3; ++c) m.vertices(i, c) = coords[static_cast<std::size_t>(3 * i + c)];
  for (const auto& p : polys) fan_triangulate(p, m.faces, report);
  const fs::path sidecar = label_sidecar_path(path);
  if (fs::exists(sidecar)) m.labels = load_labels(sidecar);
  finish(m, report, path);
  return m;
}

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_ply_type(const std::string& s, const fs::path& path) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  throw ParseError(path.string() + ": unknown PLY type '" + s + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

enum class PlyEncoding { ascii, binary_le, binary_be };

class PlyReader {
 public:
  PlyReader(std::istream& in, PlyEncoding enc, const fs::path& path) : in_(in), enc_(enc), path_(path) {}

  double read(PlyType t) {
    if (enc_ == PlyEncoding::ascii) {
      double v;
      if (!(in_ >> v)) throw ParseError(path_.string() + ": truncated PLY body");
      return v;
    }
    unsigned char buf[8];
    const std::size_t n = ply_size(t);
    if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n)))
      throw ParseError(path_.string() + ": truncated PLY body");
    if ((enc_ == PlyEncoding::binary_be) == (std::endian::native == std::endian::little)) std::reverse(buf, buf + n);
    switch (t) {
      case PlyType::i8: return static_cast<std::int8_t>(buf[0]);
      case PlyType::u8: return buf[0];
      case PlyType::i16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
      case PlyType::u16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
      case PlyType::i32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::u32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::f32: { float v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::f64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
  }

 private:
  std::istream& in_;
  PlyEncoding enc_;
  const fs::path& path_;
};

Mesh load_ply(const fs::path& path, LoadReport& report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw ParseError(path.string() + ": missing 'ply' magic");
  PlyEncoding enc = PlyEncoding::ascii;
  std::vector<PlyElement> elements;
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") enc = PlyEncoding::ascii;
      else if (f == "binary_little_endian") enc = PlyEncoding::binary_le;
      else if (f == "binary_big_endian") enc = PlyEncoding::binary_be;
      else throw ParseError(path.string() + ": unknown PLY format '" + f + "'");
    } else if (tag == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) throw ParseError(path.string() + ": bad element line");
      elements.push_back(std::move(e));
    } else if (tag == "property") {
      if (elements.empty()) throw ParseError(path.string() + ": property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(ct, path);
        p.type = parse_ply_type(it, path);
      } else {
        p.type = parse_ply_type(type, path);
        ls >> p.name;
      }
      elements.back().props.push_back(std::move(p));
    } else if (tag == "end_header") {
      ended = true;
      break;
    }
  }
  if (!ended) throw ParseError(path.string() + ": missing end_header");

  PlyReader reader(in, enc, path);
  Mesh m;
  std::vector<std::vector<int>> polys;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      m.vertices.resize(static_cast<Eigen::Index>(e.count), 3);
      bool has_label = false;
      for (const auto& p : e.props) has_label |= (p.name == "label");
      if (has_label) m.labels.resize(e.count);
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.props) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(reader.read(p.count_type));
            for (std::size_t k = 0; k < n; ++k) reader.read(p.type);
            continue;
          }
          const double v = reader.read(p.type);
          const auto r = static_cast<Eigen::Index>(i);
          if (p.name == "x") m.vertices(r, 0) = v;
          else if (p.name == "y") m.vertices(r, 1) = v;
          else if (p.name == "z") m.vertices(r, 2) = v;
          else if (p.name == "label") m.labels[i] = static_cast<int>(v);
        }
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.props) {
          if (!p.is_list) {
            reader.read(p.type);
            continue;
          }
          const double count = reader.read(p.count_type);
          if (count < 0 || count != std::floor(count)) throw ParseError(path.string() + ": bad list count");
          std::vector<int> idx(static_cast<std::size_t>(count));
          for (auto& v : idx) v = static_cast<int>(reader.read(p.type));
          if (e.name == "face" && (p.name == "vertex_indices" || p.name == "vertex_index")) {
            if (idx.size() < 3) throw ParseError(path.string() + ": face with < 3 vertices");
            polys.push_back(std::move(idx));
          }
        }
      }
    }
  }
  for (const auto& p : polys) fan_triangulate(p, m.faces, report);
  finish(m, report, path);
  return m;
}

void save_obj(const Mesh& m, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.vertices.rows(); ++i)
    out << "v " << fmt9(m.vertices(i, 0)) << ' ' << fmt9(m.vertices(i, 1)) << ' ' << fmt9(m.vertices(i, 2)) << '\n';
  for (const auto& f : m.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
  if (m.has_labels()) save_labels(m.labels, label_sidecar_path(path));
}

void save_ply(const Mesh& m, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << m.vertices.rows() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (m.has_labels()) out << "property int label\n";
  out << "element face " << m.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (Eigen::Index i = 0; i < m.vertices.rows(); ++i) {
    out << fmt9(m.vertices(i, 0)) << ' ' << fmt9(m.vertices(i, 1)) << ' ' << fmt9(m.vertices(i, 2));
    if (m.has_labels()) out << ' ' << m.labels[static_cast<std::size_t>(i)];
    out << '\n';
  }
  for (const auto& f : m.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

fs::path label_sidecar_path(const fs::path& mesh_path) {
  fs::path p = mesh_path;
  p.replace_extension(".labels.txt");
  return p;
}

std::vector<int> load_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<int> labels;
  std::string tok;
  while (in >> tok) {
    try {
      labels.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad label '" + tok + "'");
    }
  }
  return labels;
}

void save_labels(const std::vector<int>& labels, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
}

Mesh load_mesh(const fs::path& path, std::optional<MeshFormat> format, LoadReport* report) {
  LoadReport local;
  LoadReport& r = report ? *report : local;
  r = LoadReport{};
  if (!fs::exists(path)) throw std::runtime_error("no such file: " + path.string());
  return format.value_or(deduce_format(path)) == MeshFormat::obj ? load_obj(path, r) : load_ply(path, r);
}

void save_mesh(const Mesh& mesh, const fs::path& path, std::optional<MeshFormat> format) {
  mesh.validate();
  if (format.value_or(deduce_format(path)) == MeshFormat::obj)
    save_obj(mesh, path);
  else
    save_ply(mesh, path);
}

PointCloud load_points(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj" || ext == ".ply") {
    Mesh m = load_mesh(path);
    return PointCloud{m.vertices, m.labels};
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> coords;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected x y z");
    coords.insert(coords.end(), {x, y, z});
    int label;
    if (ls >> label) labels.push_back(label);
  }
  PointCloud pc;
  pc.points.resize(static_cast<Eigen::Index>(coords.size() / 3), 3);
  for (Eigen::Index i = 0; i < pc.points.rows(); ++i)
    for (int c = 0; c < 3; ++c) pc.points(i, c) = coords[static_cast<std::size_t>(3 * i + c)];
  if (!labels.empty()) {
    if (static_cast<Eigen::Index>(labels.size()) != pc.points.rows())
      throw ParseError(path.string() + ": labels present on some rows only");
    pc.labels = std::move(labels);
  }
  return pc;
}

void save_points(const PointCloud& cloud, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
    out << fmt9(cloud.points(i, 0)) << ' ' << fmt9(cloud.points(i, 1)) << ' ' << fmt9(cloud.points(i, 2));
    if (!cloud.labels.empty()) out << ' ' << cloud.labels[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

NormalizeResult normalize_to_unit(const Mesh& mesh) {
  if (mesh.vertices.rows() == 0) throw std::invalid_argument("normalize_to_unit: empty mesh");
  const Vec3 lo = mesh.vertices.colwise().minCoeff().transpose();
  const Vec3 hi = mesh.vertices.colwise().maxCoeff().transpose();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw std::invalid_argument("normalize_to_unit: all vertices coincide (zero extent)");
  NormalizeResult r;
  r.offset = 0.5 * (lo + hi);
  r.scale = extent;
  r.mesh = mesh;
  r.mesh.vertices = ((mesh.vertices.rowwise() - r.offset.transpose()) / extent).eval();
  return r;
}

}  // namespace fm::geometry
