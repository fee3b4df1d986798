#include "flowmorph/numerics/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fm::numerics {

namespace fs = std::filesystem;

const Mat& Archive::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw std::out_of_range("archive has no tensor named " + name);
}

bool Archive::has(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

namespace {

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_archive(const fs::path& dir, const Archive& archive) {
  fs::create_directories(dir);
  nlohmann::json manifest = archive.manifest;
  nlohmann::json table = nlohmann::json::array();
  std::string blob;
  for (const auto& t : archive.tensors) {
    table.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put_f64(blob, t.value(r, c));
  }
  manifest["tensors"] = table;
  {
    std::ofstream f(dir / kManifestFile, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir / kManifestFile).string());
    f << manifest.dump(2) << '\n';
  }
  std::ofstream f(dir / kTensorFile, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + (dir / kTensorFile).string());
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) throw std::runtime_error("write failed: " + (dir / kTensorFile).string());
}

Archive load_archive(const fs::path& dir) {
  std::ifstream mf(dir / kManifestFile, std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open " + (dir / kManifestFile).string());
  Archive a;
  try {
    a.manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest: " + std::string(e.what()));
  }
  std::ifstream bf(dir / kTensorFile, std::ios::binary);
  if (!bf) throw std::runtime_error("cannot open " + (dir / kTensorFile).string());
  std::ostringstream ss;
  ss << bf.rdbuf();
  const std::string blob = ss.str();
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  std::size_t offset = 0;
  for (const auto& entry : a.manifest.at("tensors")) {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const std::size_t need = static_cast<std::size_t>(rows * cols) * 8;
    if (offset + need > blob.size()) throw std::runtime_error("tensor blob is truncated");
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c, offset += 8) m(r, c) = get_f64(bytes + offset);
    a.tensors.push_back({entry.at("name").get<std::string>(), std::move(m)});
  }
  if (offset != blob.size()) throw std::runtime_error("tensor blob has trailing bytes");
  a.manifest.erase("tensors");
  return a;
}

}  // namespace fm::numerics
