#include "flowmorph/flow/model.hpp"

#include <stdexcept>
#include <string>

#include "flowmorph/flow/eval.hpp"

namespace fm::flow {

std::string_view mode_name(Mode m) { return m == Mode::direct ? "direct" : "divfree"; }
std::string_view symmetry_name(Symmetry s) { return s == Symmetry::off ? "off" : "yz"; }
std::string_view sign_name(SignKind s) { return s == SignKind::hub ? "hub" : "oddmlp"; }

Mode parse_mode(std::string_view s) {
  if (s == "direct") return Mode::direct;
  if (s == "divfree" || s == "divergence_free") return Mode::divergence_free;
  throw std::invalid_argument("unknown flow mode '" + std::string(s) + "' (expected direct or divfree)");
}

Symmetry parse_symmetry(std::string_view s) {
  if (s == "off" || s == "none") return Symmetry::off;
  if (s == "yz" || s == "plane_yz") return Symmetry::plane_yz;
  throw std::invalid_argument("unknown symmetry '" + std::string(s) + "' (expected off or yz)");
}

SignKind parse_sign(std::string_view s) {
  if (s == "hub") return SignKind::hub;
  if (s == "oddmlp" || s == "odd_mlp") return SignKind::odd_mlp;
  throw std::invalid_argument("unknown sign kind '" + std::string(s) + "' (expected hub or oddmlp)");
}

void FlowConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  if (mode == Mode::divergence_free && !numerics::is_c1(activation))
    throw std::invalid_argument("divergence-free mode needs a C1 activation (elu or tanh), got " +
                                std::string(numerics::activation_name(activation)));
}

FlowModel FlowModel::create(const FlowConfig& config, std::uint64_t seed) {
  config.validate();
  numerics::Rng rng(seed);
  FlowModel m;
  m.config = config;
  m.backbone = numerics::make_backbone(config.latent_dim, config.width, config.activation, rng);
  if (config.sign == SignKind::odd_mlp) m.sign_net = numerics::make_sign_net(config.latent_dim, config.width, rng);
  if (config.mode == Mode::divergence_free && config.symmetry == Symmetry::plane_yz) {
    // The mirror composition is checked rather than assumed.
    const double div = max_sampled_divergence(m, 64, seed ^ 0x5eedULL);
    if (!(div < 1e-9))
      throw std::runtime_error("divergence-free + yz symmetry failed the divergence check (max " +
                               std::to_string(div) + "); combination disabled");
  }
  return m;
}

void FlowModel::validate() const {
  config.validate();
  backbone.validate();
  if (backbone.input_width() != 3 + config.latent_dim || backbone.output_width() != 3)
    throw std::invalid_argument("backbone widths do not match latent_dim");
  if (config.mode == Mode::divergence_free && backbone.uses(Activation::relu))
    throw std::invalid_argument("divergence-free mode with a relu backbone");
  if (config.sign == SignKind::odd_mlp) {
    sign_net.validate();
    if (sign_net.input_width() != config.latent_dim || sign_net.output_width() != 1)
      throw std::invalid_argument("sign network widths do not match latent_dim");
    for (const auto& l : sign_net.layers) {
      if (l.activation != Activation::tanh) throw std::invalid_argument("sign network must use tanh");
      if (!l.bias.isZero(0.0)) throw std::invalid_argument("sign network biases must be zero");
    }
  }
}

PairContext::PairContext(Vec from, Vec to) : zi(std::move(from)), zj(std::move(to)) {
  if (zi.size() != zj.size()) throw std::invalid_argument("PairContext: latent size mismatch");
  if (!zi.allFinite() || !zj.allFinite()) throw std::invalid_argument("PairContext: non-finite latent code");
}

Vec PairContext::conditioning(double t) const { return zi * (1.0 - t) + zj * t; }

bool is_hub(const Vec& z) { return (z.array() == 0.0).all(); }

}  // namespace fm::flow
