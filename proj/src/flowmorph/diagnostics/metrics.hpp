#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowmorph/embedding/embed.hpp"

namespace fm::diagnostics {

struct MetricsOptions {
  std::size_t observation_points = 300;
  double noise = 0.05;
  std::size_t eval_samples = 2048;
  std::uint64_t seed = 0;
  embedding::EmbedConfig embed;
};

struct MetricsRow {
  std::string shape;
  int source = -1;  // training shape the selected reconstruction came from
  double chamfer_l1 = 0.0;
  double normal_consistency = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  double mean_chamfer_l1 = 0.0;
  double mean_normal_consistency = 0.0;

  // Columns shape,source,chamfer_l1,normal_consistency; a final "mean" row.
  void save_csv(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
};

struct NamedMesh {
  std::string name;
  geometry::Mesh mesh;
};

// Reconstructs every evaluation shape from a noisy sparse observation and
// scores the selected mesh against the clean reference.
MetricsReport run_metrics(const training::Checkpoint& ckpt, const std::vector<geometry::Mesh>& training_shapes,
                          const std::vector<NamedMesh>& eval_shapes, const MetricsOptions& opts);

}  // namespace fm::diagnostics
