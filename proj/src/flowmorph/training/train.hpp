#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/training/checkpoint.hpp"
#include "flowmorph/training/config.hpp"

namespace fm::training {

struct StepLog {
  long step = 0;
  double loss = 0.0;     // mean over the batch of chamfer + edge_weight * edge
  double chamfer = 0.0;  // mean hub-and-spoke Chamfer term
  double edge = 0.0;     // mean edge term (0 when edge_weight is 0)
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  // Called every checkpoint_every steps with the current state.
  std::function<void(const Checkpoint&)> on_checkpoint;
  // Where the state is written when the loss turns non-finite; empty skips it.
  std::filesystem::path diagnostic_dir;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Initial state: model from the seed, latent codes ~ N(0, latent_std).
Checkpoint initial_checkpoint(int shape_count, const TrainConfig& cfg);

// Hub-and-spoke auto-decoder training over in-memory shapes. Equal inputs and
// seeds give bitwise-equal results regardless of thread count.
Checkpoint train(const std::vector<geometry::Mesh>& shapes, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Loads the train split, trains, and writes the checkpoint plus metrics.csv
// into out_dir.
Checkpoint train_manifest(const DatasetManifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir);

// Meshes of the checkpoint's training shapes, read from the stored paths.
std::vector<geometry::Mesh> load_training_shapes(const Checkpoint& ckpt);

geometry::Mesh load_dataset_mesh(const DatasetManifest::Entry& entry, bool normalize);

}  // namespace fm::training
