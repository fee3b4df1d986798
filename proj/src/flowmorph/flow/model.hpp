#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

#include "flowmorph/numerics/mlp.hpp"

namespace fm::flow {

using numerics::Activation;
using numerics::Mat;
using numerics::MlpParams;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

enum class Mode { direct, divergence_free };
enum class Symmetry { off, plane_yz };
enum class SignKind { hub, odd_mlp };

std::string_view mode_name(Mode m);         // "direct" | "divfree"
std::string_view symmetry_name(Symmetry s);  // "off" | "yz"
std::string_view sign_name(SignKind s);      // "hub" | "oddmlp"
Mode parse_mode(std::string_view s);
Symmetry parse_symmetry(std::string_view s);
SignKind parse_sign(std::string_view s);

struct FlowConfig {
  Mode mode = Mode::direct;
  Symmetry symmetry = Symmetry::off;
  SignKind sign = SignKind::hub;
  int latent_dim = 8;
  int width = 16;
  Activation activation = Activation::elu;

  void validate() const;
};

// Backbone realizes h directly, or the potential g whose curl is h. The sign
// network exists only for SignKind::odd_mlp and its biases stay zero.
struct FlowModel {
  FlowConfig config;
  MlpParams backbone;
  MlpParams sign_net;

  static FlowModel create(const FlowConfig& config, std::uint64_t seed);

  // Checks widths against the config and the structural rules of each mode.
  void validate() const;
};

// Endpoints of a deformation path in latent space.
struct PairContext {
  Vec zi;
  Vec zj;

  PairContext() = default;
  PairContext(Vec from, Vec to);

  double magnitude() const { return (zj - zi).norm(); }
  bool is_identity() const { return magnitude() == 0.0; }
  // Only defined when magnitude() > 0.
  Vec direction() const { return (zj - zi) / magnitude(); }
  // (1 - t) zi + t zj; exact at both ends.
  Vec conditioning(double t) const;
  PairContext reversed() const { return PairContext(zj, zi); }
};

bool is_hub(const Vec& z);

}  // namespace fm::flow
