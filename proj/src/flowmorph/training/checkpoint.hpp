#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowmorph/flow/model.hpp"

namespace fm::training {

// A trained deformation space: shared flow parameters plus one latent code
// per training shape. The hub code is implicit (all zeros) and never stored.
struct Checkpoint {
  flow::FlowModel model;
  numerics::Mat latents = numerics::Mat(0, 0);  // N x latent_dim
  std::vector<std::string> shapes;              // mesh path per latent row
  std::uint64_t seed = 0;
  long step = 0;
  nlohmann::json config = nlohmann::json::object();  // effective settings

  Eigen::VectorXd code(int shape) const;
  int shape_count() const { return static_cast<int>(latents.rows()); }
  void validate() const;
};

// manifest.json + tensors.bin; see numerics/archive.hpp.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace fm::training
