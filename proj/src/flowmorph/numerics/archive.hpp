#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowmorph/numerics/ops.hpp"

namespace fm::numerics {

struct NamedTensor {
  std::string name;
  Mat value;
};

// A directory holding `manifest.json` (caller metadata plus a "tensors"
// table of names and shapes) and `tensors.bin` (every tensor, row-major,
// little-endian IEEE-754 binary64, in table order).
struct Archive {
  nlohmann::json manifest;
  std::vector<NamedTensor> tensors;

  const Mat& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTensorFile = "tensors.bin";

void save_archive(const std::filesystem::path& dir, const Archive& archive);
Archive load_archive(const std::filesystem::path& dir);

}  // namespace fm::numerics
