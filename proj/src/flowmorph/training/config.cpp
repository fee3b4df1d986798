#include "flowmorph/training/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fm::training {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  if (!(edge_weight >= 0.0)) throw std::invalid_argument("edge_weight must be non-negative");
  if (max_edges < 1) throw std::invalid_argument("max_edges must be at least 1");
  if (!(latent_std >= 0.0)) throw std::invalid_argument("latent_std must be non-negative");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be non-negative");
  if (ode.solver != ode::OdeConfig::Solver::rk4)
    throw std::invalid_argument("training differentiates through rk4; set solver = rk4");
  ode.validate();
  flow.validate();
}

void apply_setting(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "learning_rate" || key == "lr") c.learning_rate = parse_number<double>(key, v);
  else if (key == "batch_size") c.batch_size = parse_number<int>(key, v);
  else if (key == "steps") c.steps = parse_number<long>(key, v);
  else if (key == "samples") c.samples = parse_number<int>(key, v);
  else if (key == "edge_weight") c.edge_weight = parse_number<double>(key, v);
  else if (key == "max_edges") c.max_edges = parse_number<int>(key, v);
  else if (key == "latent_std") c.latent_std = parse_number<double>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "mode") c.flow.mode = flow::parse_mode(v);
  else if (key == "symmetry") c.flow.symmetry = flow::parse_symmetry(v);
  else if (key == "sign") c.flow.sign = flow::parse_sign(v);
  else if (key == "latent_dim") c.flow.latent_dim = parse_number<int>(key, v);
  else if (key == "width" || key == "nf") c.flow.width = parse_number<int>(key, v);
  else if (key == "activation") c.flow.activation = numerics::parse_activation(v);
  else if (key == "solver") c.ode = ode::parse_solver(v, c.ode.steps, c.ode.rtol, c.ode.atol);
  else if (key == "rk4_steps" || key == "ode_steps") c.ode.steps = parse_number<int>(key, v);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_number<long>(key, v);
  else if (key == "threads") c.threads = parse_number<int>(key, v);
  else if (key == "normalize") c.normalize = parse_bool(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

TrainConfig parse_train_config(const std::string& text, TrainConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  return parse_train_config(read_file(path), std::move(base));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"steps", c.steps},
          {"samples", c.samples},
          {"edge_weight", c.edge_weight},
          {"max_edges", c.max_edges},
          {"latent_std", c.latent_std},
          {"seed", c.seed},
          {"mode", flow::mode_name(c.flow.mode)},
          {"symmetry", flow::symmetry_name(c.flow.symmetry)},
          {"sign", flow::sign_name(c.flow.sign)},
          {"latent_dim", c.flow.latent_dim},
          {"width", c.flow.width},
          {"activation", numerics::activation_name(c.flow.activation)},
          {"solver", "rk4"},
          {"rk4_steps", c.ode.steps},
          {"checkpoint_every", c.checkpoint_every},
          {"normalize", c.normalize}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.steps = j.at("steps").get<long>();
  c.samples = j.at("samples").get<int>();
  c.edge_weight = j.at("edge_weight").get<double>();
  c.max_edges = j.at("max_edges").get<int>();
  c.latent_std = j.at("latent_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.flow.mode = flow::parse_mode(j.at("mode").get<std::string>());
  c.flow.symmetry = flow::parse_symmetry(j.at("symmetry").get<std::string>());
  c.flow.sign = flow::parse_sign(j.at("sign").get<std::string>());
  c.flow.latent_dim = j.at("latent_dim").get<int>();
  c.flow.width = j.at("width").get<int>();
  c.flow.activation = numerics::parse_activation(j.at("activation").get<std::string>());
  c.ode = ode::OdeConfig::rk4(j.at("rk4_steps").get<int>());
  c.checkpoint_every = j.at("checkpoint_every").get<long>();
  c.normalize = j.at("normalize").get<bool>();
  return c;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::val: return "val";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "val") return Split::val;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

std::vector<DatasetManifest::Entry> DatasetManifest::of(Split s) const {
  std::vector<Entry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  DatasetManifest m;
  for (const auto& s : j.at("shapes")) {
    Entry e;
    e.mesh = resolve(s.at("mesh").get<std::string>());
    if (s.contains("labels") && !s["labels"].is_null()) e.labels = resolve(s["labels"].get<std::string>());
    e.split = parse_split(s.value("split", std::string("train")));
    if (!std::filesystem::exists(e.mesh)) throw std::runtime_error("manifest: missing mesh " + e.mesh.string());
    if (e.labels && !std::filesystem::exists(*e.labels))
      throw std::runtime_error("manifest: missing labels " + e.labels->string());
    m.entries.push_back(std::move(e));
  }
  if (m.of(Split::train).empty()) throw std::invalid_argument("manifest has no train entries");
  return m;
}

}  // namespace fm::training
