// flowmorph command-line front end over the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowmorph/flowmorph.h"

namespace {

using nlohmann::json;

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct ApiError {
  fm_status status;
  std::string what;
};

void check(fm_status s) {
  if (s != FM_OK) throw ApiError{s, fm_last_error()};
}

struct MeshDel {
  void operator()(fm_mesh* m) const { fm_mesh_free(m); }
};
struct PointsDel {
  void operator()(fm_points* p) const { fm_points_free(p); }
};
struct SpaceDel {
  void operator()(fm_space* s) const { fm_space_free(s); }
};
using MeshPtr = std::unique_ptr<fm_mesh, MeshDel>;
using PointsPtr = std::unique_ptr<fm_points, PointsDel>;
using SpacePtr = std::unique_ptr<fm_space, SpaceDel>;

std::string take(char* s) {
  std::string out = s ? s : "";
  fm_string_free(s);
  return out;
}

MeshPtr load_mesh(const std::string& path) {
  fm_mesh* m = nullptr;
  check(fm_mesh_load(path.c_str(), &m));
  return MeshPtr(m);
}

SpacePtr load_space(const std::string& dir) {
  fm_space* s = nullptr;
  check(fm_space_load(dir.c_str(), &s));
  return SpacePtr(s);
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ApiError{FM_ERR_IO, "cannot write " + path};
  out << text << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ApiError{FM_ERR_IO, "cannot read " + path};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ApiError{FM_ERR_PARSE, path + ": " + e.what()};
  }
}

// A code file is either a bare array or an object with a "code" array.
std::vector<double> read_code(const std::string& path, int dim) {
  json j = read_json(path);
  if (j.is_object()) j = j.value("code", json());
  if (!j.is_array()) throw ApiError{FM_ERR_PARSE, path + ": no latent code array"};
  auto code = j.get<std::vector<double>>();
  if (static_cast<int>(code.size()) != dim)
    throw ApiError{FM_ERR_INVALID_ARGUMENT, path + ": code has " + std::to_string(code.size()) +
                                                " entries, the checkpoint expects " + std::to_string(dim)};
  return code;
}

std::uint64_t seed_fallback() {
  if (const char* env = std::getenv("FLOWMORPH_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ApiError{FM_ERR_INVALID_ARGUMENT, std::string("FLOWMORPH_SEED is not an integer: ") + env};
    }
  }
  return 0;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) { return flag ? *flag : seed_fallback(); }

void add_seed(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
  cmd->add_option("--seed", seed, "Random seed (falls back to FLOWMORPH_SEED, then 0)");
}

struct EmbedFlags {
  fm_embed_options o{};
  EmbedFlags() { fm_embed_options_default(&o); }

  void add(CLI::App* cmd, bool finetune) {
    cmd->add_option("--init-std", o.init_std, "Latent initialization std")->capture_default_str();
    cmd->add_option("--lr", o.learning_rate, "Embedding learning rate")->capture_default_str();
    cmd->add_option("--iterations", o.iterations, "Embedding iterations")->capture_default_str();
    cmd->add_option("--shapes-per-step", o.shapes_per_step, "Training shapes per embedding step")
        ->capture_default_str();
    cmd->add_option("--samples", o.samples, "Surface samples per training shape")->capture_default_str();
    cmd->add_option("--eval-samples", o.eval_samples, "Samples for evaluation Chamfer")->capture_default_str();
    if (finetune) {
      cmd->add_option("--k", o.k, "Retrieved candidates")->capture_default_str();
      cmd->add_option("--finetune-iterations", o.finetune_iterations, "Fine-tuning iterations")
          ->capture_default_str();
      cmd->add_option("--finetune-lr", o.finetune_learning_rate, "Fine-tuning learning rate")->capture_default_str();
    }
  }
};

// A shape given as a training id or as a mesh file plus a code file.
struct Endpoint {
  std::optional<std::size_t> id;
  std::string mesh;
  std::string code;

  void add(CLI::App* cmd, const std::string& role) {
    cmd->add_option("--" + role + "-id", id, "Training shape id for the " + role);
    cmd->add_option("--" + role, mesh, "Mesh file for the " + role);
    cmd->add_option("--" + role + "-code", code, "Latent code JSON for the " + role + " mesh");
  }

  MeshPtr resolve(fm_space* space, std::vector<double>& z, const std::string& role) const {
    const int dim = fm_space_latent_dim(space);
    z.assign(static_cast<std::size_t>(dim), 0.0);
    MeshPtr m;
    if (id) {
      check(fm_space_code(space, *id, z.data()));
      if (mesh.empty()) {
        fm_mesh* raw = nullptr;
        check(fm_space_shape_mesh(space, *id, &raw));
        m.reset(raw);
      }
    } else if (!code.empty()) {
      z = read_code(code, dim);
    } else {
      throw ApiError{FM_ERR_INVALID_ARGUMENT, "--" + role + "-id or --" + role + "-code is required"};
    }
    if (!mesh.empty()) m = load_mesh(mesh);
    if (!m) throw ApiError{FM_ERR_INVALID_ARGUMENT, "--" + role + " mesh is required"};
    return m;
  }
};

struct Tolerance {
  double rtol = 1e-6;
  double atol = 1e-6;
  void add(CLI::App* cmd) {
    cmd->add_option("--rtol", rtol, "dopri5 relative tolerance")->capture_default_str();
    cmd->add_option("--atol", atol, "dopri5 absolute tolerance")->capture_default_str();
  }
  json to_json() const { return {{"solver", "dopri5"}, {"rtol", rtol}, {"atol", atol}}; }
};

json embed_json(const fm_embed_options& o) {
  return {{"init_std", o.init_std},         {"learning_rate", o.learning_rate},
          {"iterations", o.iterations},     {"finetune_iterations", o.finetune_iterations},
          {"finetune_learning_rate", o.finetune_learning_rate}, {"k", o.k},
          {"shapes_per_step", o.shapes_per_step}, {"samples", o.samples},
          {"eval_samples", o.eval_samples}};
}

std::vector<std::int32_t> correspondence(fm_space* space, const fm_mesh* a, const std::vector<double>& za,
                                         const fm_mesh* b, const std::vector<double>& zb, const Tolerance& tol,
                                         bool naive, std::vector<double>* dist) {
  std::vector<std::int32_t> t(fm_mesh_vertex_count(a));
  if (dist) dist->assign(t.size(), 0.0);
  double* d = dist ? dist->data() : nullptr;
  if (naive)
    check(fm_naive_correspond(a, b, t.data(), d));
  else
    check(fm_correspond(space, a, za.data(), b, zb.data(), tol.rtol, tol.atol, t.data(), d));
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowmorph: learned deformation flows between 3D shapes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fm_version()));
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware count)")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a deformation space from a dataset manifest");
  std::string manifest, config_file, out_dir;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> train_seed;
  std::optional<double> t_lr, t_edge, t_latent_std;
  std::optional<long> t_steps;
  std::optional<int> t_batch, t_samples, t_width, t_latent, t_rk4;
  std::optional<std::string> t_mode, t_sym, t_sign;
  train->add_option("--manifest", manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "Checkpoint directory")->required();
  train->add_option("--steps", t_steps, "Training steps");
  train->add_option("--lr", t_lr, "Learning rate");
  train->add_option("--batch", t_batch, "Shape pairs per step");
  train->add_option("--samples", t_samples, "Surface samples per shape");
  train->add_option("--edge-weight", t_edge, "Edge regularizer weight");
  train->add_option("--latent-std", t_latent_std, "Latent initialization std");
  train->add_option("--mode", t_mode, "Flow mode")->check(CLI::IsMember({"direct", "divfree"}));
  train->add_option("--symmetry", t_sym, "Plane symmetry")->check(CLI::IsMember({"off", "yz"}));
  train->add_option("--sign", t_sign, "Sign function")->check(CLI::IsMember({"hub", "oddmlp"}));
  train->add_option("--width", t_width, "Hidden width n_f");
  train->add_option("--latent-dim", t_latent, "Latent dimension");
  train->add_option("--rk4-steps", t_rk4, "RK4 steps per deformation");
  train->add_option("--set", settings, "Extra key=value setting (repeatable)");
  add_seed(train, train_seed);

  // embed
  auto* embed = app.add_subcommand("embed", "Embed a point cloud into a trained space");
  std::string ckpt, points, out_path, report_path;
  std::optional<std::uint64_t> embed_seed;
  EmbedFlags embed_flags;
  embed->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  embed->add_option("--points", points, "Observation point file")->required()->check(CLI::ExistingFile);
  embed->add_option("--out", out_path, "Output code JSON")->required();
  add_seed(embed, embed_seed);
  embed_flags.add(embed, false);

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct a mesh from a point cloud");
  std::optional<std::uint64_t> recon_seed;
  EmbedFlags recon_flags;
  recon->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  recon->add_option("--points", points, "Observation point file")->required()->check(CLI::ExistingFile);
  recon->add_option("--out", out_path, "Output mesh")->required();
  recon->add_option("--report", report_path, "Ranked candidate report JSON");
  add_seed(recon, recon_seed);
  recon_flags.add(recon, true);

  // canonicalize
  auto* canon = app.add_subcommand("canonicalize", "Deform a shape to the hub");
  Endpoint canon_src;
  Tolerance canon_tol;
  canon->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  canon->add_option("--shape", canon_src.id, "Training shape id");
  canon->add_option("--mesh", canon_src.mesh, "Mesh file");
  canon->add_option("--code", canon_src.code, "Latent code JSON for --mesh");
  canon->add_option("--out", out_path, "Output mesh")->required();
  canon_tol.add(canon);

  // correspond
  auto* corr = app.add_subcommand("correspond", "Dense correspondence through canonical space");
  Endpoint corr_a, corr_b;
  Tolerance corr_tol;
  bool corr_naive = false;
  corr->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  corr_a.add(corr, "source");
  corr_b.add(corr, "target");
  corr->add_option("--out", out_path, "Output CSV")->required();
  corr->add_flag("--naive", corr_naive, "Match in the original frame instead");
  corr_tol.add(corr);

  // sms
  auto* sms = app.add_subcommand("sms", "Semantic matching score, canonical and naive");
  Endpoint sms_a, sms_b;
  Tolerance sms_tol;
  sms->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  sms_a.add(sms, "source");
  sms_b.add(sms, "target");
  sms->add_option("--report", report_path, "Output JSON");
  sms_tol.add(sms);

  // interpolate
  auto* interp = app.add_subcommand("interpolate", "Fit a keyframe pair and render interpolated frames");
  std::string source_mesh, target_mesh, mode = "divfree", symmetry = "off";
  std::optional<std::uint64_t> interp_seed;
  fm_interp_options io{};
  fm_interp_options_default(&io);
  interp->add_option("--source", source_mesh, "Source keyframe mesh")->required()->check(CLI::ExistingFile);
  interp->add_option("--target", target_mesh, "Target keyframe mesh (vertex-corresponded)")
      ->required()
      ->check(CLI::ExistingFile);
  interp->add_option("--frames", io.frames, "Frame count")->capture_default_str();
  interp->add_option("--mode", mode, "Flow mode")->check(CLI::IsMember({"direct", "divfree"}))->capture_default_str();
  interp->add_option("--symmetry", symmetry, "Plane symmetry")->check(CLI::IsMember({"off", "yz"}))->capture_default_str();
  interp->add_option("--edge-weight", io.edge_weight, "Edge regularizer weight")->capture_default_str();
  interp->add_option("--steps", io.steps, "Training steps")->capture_default_str();
  interp->add_option("--lr", io.learning_rate, "Learning rate")->capture_default_str();
  interp->add_option("--supervision-frames", io.supervision_frames, "Linear in-between targets")
      ->capture_default_str();
  interp->add_option("--width", io.width, "Hidden width n_f")->capture_default_str();
  interp->add_option("--latent-dim", io.latent_dim, "Latent dimension")->capture_default_str();
  interp->add_option("--render-tol", io.render_tolerance, "dopri5 tolerance for rendering")->capture_default_str();
  interp->add_option("--out", out_dir, "Output directory")->required();
  add_seed(interp, interp_seed);

  // verify
  auto* verify = app.add_subcommand("verify", "Check the structural properties of the flow");
  std::optional<std::uint64_t> verify_seed;
  std::string verify_json;
  bool fault = false;
  verify->add_option("--json", verify_json, "Write the report as JSON");
  verify->add_flag("--fault", fault, "Inject a relu backbone into divergence-free mode");
  add_seed(verify, verify_seed);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Reconstruction metrics over a dataset split");
  std::string split = "test";
  std::optional<std::uint64_t> metrics_seed;
  EmbedFlags metrics_flags;
  metrics->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--manifest", manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  metrics->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"train", "test", "val"}))
      ->capture_default_str();
  metrics->add_option("--out", out_path, "Per-shape CSV")->required();
  metrics->add_option("--report", report_path, "Summary JSON");
  add_seed(metrics, metrics_seed);
  metrics_flags.add(metrics, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  try {
    fm_set_threads(threads);

    if (train->parsed()) {
      std::ostringstream ov;
      if (t_steps) ov << "steps = " << *t_steps << "\n";
      if (t_lr) ov << "learning_rate = " << *t_lr << "\n";
      if (t_batch) ov << "batch_size = " << *t_batch << "\n";
      if (t_samples) ov << "samples = " << *t_samples << "\n";
      if (t_edge) ov << "edge_weight = " << *t_edge << "\n";
      if (t_latent_std) ov << "latent_std = " << *t_latent_std << "\n";
      if (t_mode) ov << "mode = " << *t_mode << "\n";
      if (t_sym) ov << "symmetry = " << *t_sym << "\n";
      if (t_sign) ov << "sign = " << *t_sign << "\n";
      if (t_width) ov << "width = " << *t_width << "\n";
      if (t_latent) ov << "latent_dim = " << *t_latent << "\n";
      if (t_rk4) ov << "rk4_steps = " << *t_rk4 << "\n";
      for (const auto& s : settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ApiError{FM_ERR_INVALID_ARGUMENT, "--set expects key=value: " + s};
        ov << s.substr(0, eq) << " = " << s.substr(eq + 1) << "\n";
      }
      // The seed flag wins over the file; the environment only fills in when neither sets one.
      if (train_seed)
        ov << "seed = " << *train_seed << "\n";
      else if (std::getenv("FLOWMORPH_SEED") && config_file.empty())
        ov << "seed = " << seed_fallback() << "\n";
      fm_space* raw = nullptr;
      check(fm_train(manifest.c_str(), config_file.empty() ? nullptr : config_file.c_str(), ov.str().c_str(),
                     out_dir.c_str(), &raw));
      SpacePtr space(raw);
      char* info = nullptr;
      check(fm_space_info(space.get(), &info));
      const std::string text = take(info);
      write_text((std::filesystem::path(out_dir) / "train_report.json").string(), text);
      std::cout << "trained " << fm_space_shape_count(space.get()) << " shapes into " << out_dir << "\n";
      return 0;
    }

    if (embed->parsed()) {
      const auto space = load_space(ckpt);
      fm_points* p = nullptr;
      check(fm_points_load(points.c_str(), &p));
      PointsPtr obs(p);
      std::vector<double> code(static_cast<std::size_t>(fm_space_latent_dim(space.get())));
      char* rep = nullptr;
      check(fm_embed(space.get(), obs.get(), &embed_flags.o, resolve_seed(embed_seed), code.data(), &rep));
      write_text(out_path, take(rep));
      return 0;
    }

    if (recon->parsed()) {
      const auto space = load_space(ckpt);
      fm_points* p = nullptr;
      check(fm_points_load(points.c_str(), &p));
      PointsPtr obs(p);
      fm_mesh* m = nullptr;
      char* rep = nullptr;
      check(fm_reconstruct(space.get(), obs.get(), &recon_flags.o, resolve_seed(recon_seed), &m, &rep));
      MeshPtr mesh(m);
      const std::string text = take(rep);
      check(fm_mesh_save(mesh.get(), out_path.c_str()));
      if (!report_path.empty()) write_text(report_path, text);
      return 0;
    }

    if (canon->parsed()) {
      const auto space = load_space(ckpt);
      std::vector<double> z;
      const auto mesh = canon_src.resolve(space.get(), z, "mesh");
      fm_mesh* out = nullptr;
      check(fm_canonicalize(space.get(), mesh.get(), z.data(), canon_tol.rtol, canon_tol.atol, &out));
      MeshPtr result(out);
      check(fm_mesh_save(result.get(), out_path.c_str()));
      return 0;
    }

    if (corr->parsed()) {
      const auto space = load_space(ckpt);
      std::vector<double> za, zb, dist;
      const auto a = corr_a.resolve(space.get(), za, "source");
      const auto b = corr_b.resolve(space.get(), zb, "target");
      const auto t = correspondence(space.get(), a.get(), za, b.get(), zb, corr_tol, corr_naive, &dist);
      check(fm_correspondence_save_csv(t.data(), dist.data(), t.size(), out_path.c_str()));
      return 0;
    }

    if (sms->parsed()) {
      const auto space = load_space(ckpt);
      std::vector<double> za, zb;
      const auto a = sms_a.resolve(space.get(), za, "source");
      const auto b = sms_b.resolve(space.get(), zb, "target");
      json j = {{"tolerance", sms_tol.to_json()}};
      for (bool naive : {false, true}) {
        const auto fwd = correspondence(space.get(), a.get(), za, b.get(), zb, sms_tol, naive, nullptr);
        const auto bwd = correspondence(space.get(), b.get(), zb, a.get(), za, sms_tol, naive, nullptr);
        double score = 0, f = 0, g = 0;
        check(fm_sms(a.get(), b.get(), fwd.data(), bwd.data(), &score, &f, &g));
        j[naive ? "naive" : "canonical"] = {{"score", score}, {"forward", f}, {"backward", g}};
      }
      std::cout << "canonical " << j["canonical"]["score"].get<double>() << "  naive "
                << j["naive"]["score"].get<double>() << "\n";
      if (!report_path.empty()) write_text(report_path, j.dump(2));
      return 0;
    }

    if (interp->parsed()) {
      const auto a = load_mesh(source_mesh);
      const auto b = load_mesh(target_mesh);
      io.divergence_free = mode == "divfree" ? 1 : 0;
      io.symmetric = symmetry == "yz" ? 1 : 0;
      char* rep = nullptr;
      check(fm_interpolate(a.get(), b.get(), &io, resolve_seed(interp_seed), out_dir.c_str(), &rep));
      const json j = json::parse(take(rep));
      std::cout << "frames " << j["frames"].size() << "  max volume drift " << j.value("max_volume_drift", 0.0)
                << "\n";
      return 0;
    }

    if (verify->parsed()) {
      char* rep = nullptr;
      char* table = nullptr;
      int passed = 0;
      check(fm_verify(resolve_seed(verify_seed), fault ? 1 : 0, &rep, &table, &passed));
      const std::string text = take(rep);
      std::cout << take(table);
      if (!verify_json.empty()) write_text(verify_json, text);
      return passed ? 0 : kFailure;
    }

    if (metrics->parsed()) {
      const auto space = load_space(ckpt);
      char* rep = nullptr;
      check(fm_metrics(space.get(), manifest.c_str(), split.c_str(), &metrics_flags.o, resolve_seed(metrics_seed),
                       out_path.c_str(), &rep));
      const std::string text = take(rep);
      if (!report_path.empty()) write_text(report_path, text);
      const json j = json::parse(text);
      std::cout << "mean chamfer_l1 " << j["mean_chamfer_l1"].get<double>() << "  normal consistency "
                << j["mean_normal_consistency"].get<double>() << "\n";
      return 0;
    }
  } catch (const ApiError& e) {
    std::cerr << "error: " << fm_status_name(e.status) << ": " << e.what << "\n";
    return e.status == FM_ERR_INVALID_ARGUMENT ? kUsage : kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
