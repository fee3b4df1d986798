#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowmorph/flow/model.hpp"
#include "flowmorph/ode/integrate.hpp"

namespace fm::training {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;  // shape pairs per step
  long steps = 1000;
  int samples = 512;  // surface points per shape per step
  double edge_weight = 0.0;
  int max_edges = 2000;
  double latent_std = 0.1;
  std::uint64_t seed = 0;
  flow::FlowConfig flow;
  ode::OdeConfig ode = ode::OdeConfig::rk4(5);
  long checkpoint_every = 0;  // 0 writes only the final checkpoint
  int threads = 0;
  bool normalize = false;  // rescale meshes to the unit box at load

  void validate() const;
};

// Sets one key; throws std::invalid_argument on an unknown key or bad value.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);

// "key = value" lines; '#' starts a comment. The result is validated.
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

enum class Split { train, test, val };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

// {"shapes": [{"mesh": "a.obj", "labels": "a.labels.txt", "split": "train"}, ...]}
// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  struct Entry {
    std::filesystem::path mesh;
    std::optional<std::filesystem::path> labels;
    Split split = Split::train;
  };
  std::vector<Entry> entries;

  std::vector<Entry> of(Split s) const;

  static DatasetManifest load(const std::filesystem::path& path);
};

}  // namespace fm::training
