#include "flowmorph/training/checkpoint.hpp"

#include <stdexcept>

#include "flowmorph/numerics/archive.hpp"

namespace fm::training {

namespace {

constexpr const char* kFormat = "flowmorph-checkpoint";
constexpr int kVersion = 1;

nlohmann::json describe_net(const numerics::MlpParams& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers)
    layers.push_back({{"in", l.weight.cols()}, {"out", l.weight.rows()}, {"activation", numerics::activation_name(l.activation)}});
  return layers;
}

void push_net(numerics::Archive& a, const std::string& prefix, const numerics::MlpParams& net) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const std::string base = prefix + "." + std::to_string(k);
    a.tensors.push_back({base + ".weight", net.layers[k].weight});
    a.tensors.push_back({base + ".bias", net.layers[k].bias});
  }
}

numerics::MlpParams read_net(const numerics::Archive& a, const std::string& prefix, const nlohmann::json& layers) {
  numerics::MlpParams net;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string base = prefix + "." + std::to_string(k);
    numerics::DenseLayer l;
    l.weight = a.get(base + ".weight");
    l.bias = a.get(base + ".bias");
    l.activation = numerics::parse_activation(layers[k].at("activation").get<std::string>());
    if (l.weight.rows() != layers[k].at("out").get<Eigen::Index>() || l.weight.cols() != layers[k].at("in").get<Eigen::Index>())
      throw std::runtime_error("checkpoint: layer shape disagrees with manifest for " + base);
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace

Eigen::VectorXd Checkpoint::code(int shape) const {
  if (shape < 0 || shape >= shape_count()) throw std::out_of_range("checkpoint: shape id out of range");
  return latents.row(shape).transpose();
}

void Checkpoint::validate() const {
  model.validate();
  if (latents.rows() > 0 && latents.cols() != model.config.latent_dim)
    throw std::invalid_argument("checkpoint: latent table width differs from latent_dim");
  if (!shapes.empty() && shapes.size() != static_cast<std::size_t>(latents.rows()))
    throw std::invalid_argument("checkpoint: one shape path per latent row expected");
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c) {
  c.validate();
  numerics::Archive a;
  const auto& f = c.model.config;
  a.manifest = {{"format", kFormat},
                {"version", kVersion},
                {"flow",
                 {{"mode", flow::mode_name(f.mode)},
                  {"symmetry", flow::symmetry_name(f.symmetry)},
                  {"sign", flow::sign_name(f.sign)},
                  {"latent_dim", f.latent_dim},
                  {"width", f.width},
                  {"activation", numerics::activation_name(f.activation)}}},
                {"backbone", describe_net(c.model.backbone)},
                {"sign_net", describe_net(c.model.sign_net)},
                {"latents", {{"count", c.latents.rows()}, {"dim", c.latents.cols()}}},
                {"shapes", c.shapes},
                {"seed", c.seed},
                {"step", c.step},
                {"config", c.config}};
  push_net(a, "backbone", c.model.backbone);
  push_net(a, "sign_net", c.model.sign_net);
  a.tensors.push_back({"latents", c.latents});
  numerics::save_archive(dir, a);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const numerics::Archive a = numerics::load_archive(dir);
  const auto& m = a.manifest;
  if (m.value("format", std::string()) != kFormat) throw std::runtime_error("not a flowmorph checkpoint: " + dir.string());
  if (m.at("version").get<int>() != kVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint c;
  const auto& f = m.at("flow");
  c.model.config.mode = flow::parse_mode(f.at("mode").get<std::string>());
  c.model.config.symmetry = flow::parse_symmetry(f.at("symmetry").get<std::string>());
  c.model.config.sign = flow::parse_sign(f.at("sign").get<std::string>());
  c.model.config.latent_dim = f.at("latent_dim").get<int>();
  c.model.config.width = f.at("width").get<int>();
  c.model.config.activation = numerics::parse_activation(f.at("activation").get<std::string>());
  c.model.backbone = read_net(a, "backbone", m.at("backbone"));
  c.model.sign_net = read_net(a, "sign_net", m.at("sign_net"));
  c.latents = a.get("latents");
  c.shapes = m.at("shapes").get<std::vector<std::string>>();
  c.seed = m.at("seed").get<std::uint64_t>();
  c.step = m.at("step").get<long>();
  c.config = m.at("config");
  c.validate();
  return c;
}

}  // namespace fm::training
