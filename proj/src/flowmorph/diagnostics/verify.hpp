#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace fm::diagnostics {

struct VerifyOptions {
  std::uint64_t seed = 0;
  int points = 1000;            // divergence samples
  int symmetry_points = 10000;  // mirror-relation samples
  int negation_points = 500;    // per mode combination
  int width = 16;
  int latent_dim = 8;
  bool inject_relu_fault = false;  // relu backbone in divergence-free mode
};

struct PropertyResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;  // error text or extra context
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<PropertyResult> properties;
  std::vector<std::pair<int, double>> round_trip;  // rk4 steps -> max round-trip error

  bool pass() const;
  nlohmann::json to_json() const;
  std::string table() const;
};

// Generates random models and toy meshes and checks the structural
// properties of the flow. Failures, including thrown errors, become report
// entries.
VerifyReport run_verify(const VerifyOptions& opts);

}  // namespace fm::diagnostics
