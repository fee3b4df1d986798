#include "flowmorph/flowmorph.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "flowmorph/canonical/correspond.hpp"
#include "flowmorph/diagnostics/metrics.hpp"
#include "flowmorph/diagnostics/verify.hpp"
#include "flowmorph/embedding/embed.hpp"
#include "flowmorph/geometry/intersect.hpp"
#include "flowmorph/geometry/measures.hpp"
#include "flowmorph/interp/interp.hpp"
#include "flowmorph/numerics/parallel.hpp"
#include "flowmorph/training/train.hpp"

using namespace fm;

struct fm_mesh {
  geometry::Mesh mesh;
};

struct fm_points {
  geometry::Mat points;
};

struct fm_space {
  training::Checkpoint ckpt;
  std::optional<std::vector<geometry::Mesh>> shapes;

  const std::vector<geometry::Mesh>& training_shapes() {
    if (!shapes) shapes = training::load_training_shapes(ckpt);
    return *shapes;
  }
};

namespace {

thread_local std::string last_error;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_path(const char* path) {
  if (!std::filesystem::exists(path)) throw IoError(std::string("no such file or directory: ") + path);
}

fm_status fail(fm_status s, const char* what) {
  last_error = what;
  return s;
}

// Maps the exception in flight to a status.
fm_status translate() {
  try {
    throw;
  } catch (const geometry::ParseError& e) {
    return fail(FM_ERR_PARSE, e.what());
  } catch (const IoError& e) {
    return fail(FM_ERR_IO, e.what());
  } catch (const ode::IntegrationError& e) {
    return fail(FM_ERR_NUMERIC, e.what());
  } catch (const training::TrainingError& e) {
    return fail(FM_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FM_ERR_IO, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(FM_ERR_PARSE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(FM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(FM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(FM_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(FM_ERR_RUNTIME, "unknown error");
  }
}

template <class F>
fm_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return FM_OK;
  } catch (...) {
    return translate();
  }
}

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** dst, const nlohmann::json& j) {
  if (dst) *dst = dup_string(j.dump(2));
}

flow::Vec code_of(const fm_space* space, const double* code) {
  return Eigen::Map<const flow::Vec>(code, space->ckpt.model.config.latent_dim);
}

embedding::EmbedConfig embed_config(const fm_embed_options* o) {
  embedding::EmbedConfig cfg;
  if (o) {
    cfg.init_std = o->init_std;
    cfg.learning_rate = o->learning_rate;
    cfg.iterations = o->iterations;
    cfg.finetune_iterations = o->finetune_iterations;
    cfg.finetune_learning_rate = o->finetune_learning_rate;
    cfg.k = o->k;
    cfg.shapes_per_step = o->shapes_per_step;
    cfg.samples = o->samples;
    cfg.eval_samples = o->eval_samples;
  }
  cfg.validate();
  return cfg;
}

nlohmann::json code_json(const flow::Vec& z) { return std::vector<double>(z.data(), z.data() + z.size()); }

}  // namespace

extern "C" {

const char* fm_version(void) { return "0.1.0"; }

const char* fm_last_error(void) { return last_error.c_str(); }

const char* fm_status_name(fm_status s) {
  switch (s) {
    case FM_OK: return "ok";
    case FM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FM_ERR_IO: return "i/o error";
    case FM_ERR_PARSE: return "parse error";
    case FM_ERR_NUMERIC: return "numerical failure";
    case FM_ERR_RUNTIME: return "runtime error";
  }
  return "unknown";
}

void fm_string_free(char* s) { delete[] s; }

void fm_set_threads(int threads) { numerics::set_default_threads(threads); }

fm_status fm_mesh_load(const char* path, fm_mesh** out) {
  return guarded([&] {
    require(path && out, "fm_mesh_load: null argument");
    require_path(path);
    *out = new fm_mesh{geometry::load_mesh(path)};
  });
}

fm_status fm_mesh_save(const fm_mesh* mesh, const char* path) {
  return guarded([&] {
    require(mesh && path, "fm_mesh_save: null argument");
    geometry::save_mesh(mesh->mesh, path);
  });
}

fm_status fm_mesh_from_arrays(const double* vertices, size_t nv, const int32_t* faces, size_t nf,
                              const int32_t* labels, fm_mesh** out) {
  return guarded([&] {
    require(out && (vertices || nv == 0) && (faces || nf == 0), "fm_mesh_from_arrays: null argument");
    geometry::Mesh m;
    m.vertices = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
        vertices, static_cast<Eigen::Index>(nv), 3);
    for (size_t f = 0; f < nf; ++f) m.faces.push_back({faces[3 * f], faces[3 * f + 1], faces[3 * f + 2]});
    if (labels) m.labels.assign(labels, labels + nv);
    m.validate();
    *out = new fm_mesh{std::move(m)};
  });
}

size_t fm_mesh_vertex_count(const fm_mesh* mesh) { return mesh ? static_cast<size_t>(mesh->mesh.vertex_count()) : 0; }

size_t fm_mesh_face_count(const fm_mesh* mesh) { return mesh ? mesh->mesh.face_count() : 0; }

int fm_mesh_has_labels(const fm_mesh* mesh) { return mesh && mesh->mesh.has_labels() ? 1 : 0; }

fm_status fm_mesh_vertices(const fm_mesh* mesh, double* out) {
  return guarded([&] {
    require(mesh && out, "fm_mesh_vertices: null argument");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(out, mesh->mesh.vertex_count(), 3) =
        mesh->mesh.vertices;
  });
}

fm_status fm_mesh_signed_volume(const fm_mesh* mesh, double* out) {
  return guarded([&] {
    require(mesh && out, "fm_mesh_signed_volume: null argument");
    *out = geometry::signed_volume(mesh->mesh);
  });
}

fm_status fm_mesh_intersections(const fm_mesh* mesh, size_t* out) {
  return guarded([&] {
    require(mesh && out, "fm_mesh_intersections: null argument");
    *out = geometry::count_triangle_intersections(mesh->mesh);
  });
}

void fm_mesh_free(fm_mesh* mesh) { delete mesh; }

fm_status fm_points_load(const char* path, fm_points** out) {
  return guarded([&] {
    require(path && out, "fm_points_load: null argument");
    require_path(path);
    *out = new fm_points{geometry::load_points(path).points};
  });
}

fm_status fm_points_from_array(const double* xyz, size_t n, fm_points** out) {
  return guarded([&] {
    require(out && (xyz || n == 0), "fm_points_from_array: null argument");
    geometry::Mat p = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
        xyz, static_cast<Eigen::Index>(n), 3);
    require(p.allFinite(), "fm_points_from_array: non-finite coordinate");
    *out = new fm_points{std::move(p)};
  });
}

fm_status fm_mesh_sample(const fm_mesh* mesh, size_t n, uint64_t seed, fm_points** out) {
  return guarded([&] {
    require(mesh && out, "fm_mesh_sample: null argument");
    *out = new fm_points{geometry::sample_surface(mesh->mesh, n, seed).points};
  });
}

size_t fm_points_count(const fm_points* pts) { return pts ? static_cast<size_t>(pts->points.rows()) : 0; }

fm_status fm_points_data(const fm_points* pts, double* out) {
  return guarded([&] {
    require(pts && out, "fm_points_data: null argument");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(out, pts->points.rows(), 3) = pts->points;
  });
}

void fm_points_free(fm_points* pts) { delete pts; }

fm_status fm_train(const char* manifest_path, const char* config_path, const char* overrides, const char* out_dir,
                   fm_space** out) {
  return guarded([&] {
    require(manifest_path && out_dir, "fm_train: null argument");
    require_path(manifest_path);
    if (config_path) require_path(config_path);
    training::TrainConfig cfg;
    if (config_path) cfg = training::load_train_config(config_path);
    if (overrides) cfg = training::parse_train_config(overrides, cfg);
    const auto manifest = training::DatasetManifest::load(manifest_path);
    auto ckpt = training::train_manifest(manifest, cfg, out_dir);
    if (out) *out = new fm_space{std::move(ckpt), std::nullopt};
  });
}

fm_status fm_space_load(const char* dir, fm_space** out) {
  return guarded([&] {
    require(dir && out, "fm_space_load: null argument");
    require_path(dir);
    *out = new fm_space{training::load_checkpoint(dir), std::nullopt};
  });
}

fm_status fm_space_save(const fm_space* space, const char* dir) {
  return guarded([&] {
    require(space && dir, "fm_space_save: null argument");
    training::save_checkpoint(dir, space->ckpt);
  });
}

size_t fm_space_shape_count(const fm_space* space) { return space ? static_cast<size_t>(space->ckpt.shape_count()) : 0; }

int fm_space_latent_dim(const fm_space* space) { return space ? space->ckpt.model.config.latent_dim : 0; }

fm_status fm_space_code(const fm_space* space, size_t shape, double* out) {
  return guarded([&] {
    require(space && out, "fm_space_code: null argument");
    require(shape < static_cast<size_t>(space->ckpt.shape_count()), "fm_space_code: shape id out of range");
    const flow::Vec z = space->ckpt.code(static_cast<int>(shape));
    std::copy(z.data(), z.data() + z.size(), out);
  });
}

fm_status fm_space_shape_mesh(fm_space* space, size_t shape, fm_mesh** out) {
  return guarded([&] {
    require(space && out, "fm_space_shape_mesh: null argument");
    require(shape < static_cast<size_t>(space->ckpt.shape_count()), "fm_space_shape_mesh: shape id out of range");
    *out = new fm_mesh{space->training_shapes()[shape]};
  });
}

fm_status fm_space_info(const fm_space* space, char** json) {
  return guarded([&] {
    require(space && json, "fm_space_info: null argument");
    put(json, {{"config", space->ckpt.config},
               {"seed", space->ckpt.seed},
               {"step", space->ckpt.step},
               {"shapes", space->ckpt.shapes},
               {"latent_dim", space->ckpt.model.config.latent_dim}});
  });
}

void fm_space_free(fm_space* space) { delete space; }

void fm_embed_options_default(fm_embed_options* opts) {
  if (!opts) return;
  const embedding::EmbedConfig d;
  opts->init_std = d.init_std;
  opts->learning_rate = d.learning_rate;
  opts->iterations = d.iterations;
  opts->finetune_iterations = d.finetune_iterations;
  opts->finetune_learning_rate = d.finetune_learning_rate;
  opts->k = d.k;
  opts->shapes_per_step = d.shapes_per_step;
  opts->samples = d.samples;
  opts->eval_samples = d.eval_samples;
}

fm_status fm_embed(fm_space* space, const fm_points* obs, const fm_embed_options* opts, uint64_t seed,
                   double* code_out, char** report) {
  return guarded([&] {
    require(space && obs && code_out, "fm_embed: null argument");
    const auto cfg = embed_config(opts);
    const auto r = embedding::embed(space->ckpt, space->training_shapes(), obs->points, cfg, seed);
    std::copy(r.code.data(), r.code.data() + r.code.size(), code_out);
    const auto nearest = embedding::retrieve_topk(space->ckpt.latents, r.code, 1).front();
    put(report, {{"code", code_json(r.code)},
                 {"objective", r.objective},
                 {"best_iteration", r.best_iteration},
                 {"nearest_shape", nearest.id},
                 {"nearest_distance", nearest.distance},
                 {"seed", seed},
                 {"config", embedding::to_json(cfg)}});
  });
}

fm_status fm_reconstruct(fm_space* space, const fm_points* obs, const fm_embed_options* opts, uint64_t seed,
                         fm_mesh** mesh_out, char** report) {
  return guarded([&] {
    require(space && obs && mesh_out, "fm_reconstruct: null argument");
    const auto cfg = embed_config(opts);
    const auto r = embedding::reconstruct(space->ckpt, space->training_shapes(), obs->points, cfg, seed);
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : r.candidates) {
      const std::string path =
          static_cast<std::size_t>(c.shape) < space->ckpt.shapes.size() ? space->ckpt.shapes[c.shape] : "";
      cands.push_back({{"shape", c.shape},
                       {"path", path},
                       {"chamfer", c.chamfer},
                       {"raw_chamfer", c.raw_chamfer},
                       {"latent_distance", c.latent_distance}});
    }
    put(report, {{"code", code_json(r.code)},
                 {"candidates", cands},
                 {"selected", r.best().shape},
                 {"embed_objective", r.embed_objective},
                 {"finetune_objective", r.finetune_objective},
                 {"seed", seed},
                 {"config", embedding::to_json(cfg)}});
    *mesh_out = new fm_mesh{r.best().mesh};
  });
}

fm_status fm_canonicalize(const fm_space* space, const fm_mesh* mesh, const double* code, double rtol, double atol,
                          fm_mesh** out) {
  return guarded([&] {
    require(space && mesh && code && out, "fm_canonicalize: null argument");
    *out = new fm_mesh{canonical::canonicalize(space->ckpt.model, mesh->mesh, code_of(space, code),
                                               ode::OdeConfig::dopri5(rtol, atol))};
  });
}

fm_status fm_correspond(const fm_space* space, const fm_mesh* source, const double* source_code,
                        const fm_mesh* target, const double* target_code, double rtol, double atol,
                        int32_t* target_out, double* distance_out) {
  return guarded([&] {
    require(space && source && source_code && target && target_code && target_out, "fm_correspond: null argument");
    const auto c = canonical::correspond(space->ckpt.model, source->mesh, code_of(space, source_code), target->mesh,
                                         code_of(space, target_code), ode::OdeConfig::dopri5(rtol, atol));
    std::copy(c.target.begin(), c.target.end(), target_out);
    if (distance_out) std::copy(c.distance.begin(), c.distance.end(), distance_out);
  });
}

fm_status fm_naive_correspond(const fm_mesh* source, const fm_mesh* target, int32_t* target_out,
                              double* distance_out) {
  return guarded([&] {
    require(source && target && target_out, "fm_naive_correspond: null argument");
    const auto c = canonical::naive_correspond(source->mesh, target->mesh);
    std::copy(c.target.begin(), c.target.end(), target_out);
    if (distance_out) std::copy(c.distance.begin(), c.distance.end(), distance_out);
  });
}

fm_status fm_correspondence_save_csv(const int32_t* target, const double* distance, size_t n, const char* path) {
  return guarded([&] {
    require((target || n == 0) && path, "fm_correspondence_save_csv: null argument");
    canonical::Correspondence c;
    c.target.assign(target, target + n);
    c.distance.assign(n, 0.0);
    if (distance) c.distance.assign(distance, distance + n);
    canonical::save_correspondence_csv(c, path);
  });
}

fm_status fm_sms(const fm_mesh* a, const fm_mesh* b, const int32_t* fwd, const int32_t* bwd, double* score,
                 double* forward, double* backward) {
  return guarded([&] {
    require(a && b && fwd && bwd && score, "fm_sms: null argument");
    canonical::Correspondence f, g;
    f.target.assign(fwd, fwd + a->mesh.vertex_count());
    f.distance.assign(f.target.size(), 0.0);
    g.target.assign(bwd, bwd + b->mesh.vertex_count());
    g.distance.assign(g.target.size(), 0.0);
    const auto r = canonical::sms(a->mesh, b->mesh, f, g);
    *score = r.score;
    if (forward) *forward = r.forward;
    if (backward) *backward = r.backward;
  });
}

void fm_interp_options_default(fm_interp_options* opts) {
  if (!opts) return;
  const interp::InterpConfig d;
  opts->frames = d.frames;
  opts->supervision_frames = d.supervision_frames;
  opts->divergence_free = d.flow.mode == flow::Mode::divergence_free ? 1 : 0;
  opts->symmetric = d.flow.symmetry == flow::Symmetry::plane_yz ? 1 : 0;
  opts->edge_weight = d.edge_weight;
  opts->steps = d.steps;
  opts->learning_rate = d.learning_rate;
  opts->width = d.flow.width;
  opts->latent_dim = d.flow.latent_dim;
  opts->render_tolerance = d.render_ode.rtol;
}

fm_status fm_interpolate(const fm_mesh* source, const fm_mesh* target, const fm_interp_options* opts, uint64_t seed,
                         const char* out_dir, char** report) {
  return guarded([&] {
    require(source && target, "fm_interpolate: null argument");
    interp::InterpConfig cfg;
    if (opts) {
      cfg.frames = opts->frames;
      cfg.supervision_frames = opts->supervision_frames;
      cfg.flow.mode = opts->divergence_free ? flow::Mode::divergence_free : flow::Mode::direct;
      cfg.flow.symmetry = opts->symmetric ? flow::Symmetry::plane_yz : flow::Symmetry::off;
      cfg.edge_weight = opts->edge_weight;
      cfg.steps = opts->steps;
      cfg.learning_rate = opts->learning_rate;
      cfg.flow.width = opts->width;
      cfg.flow.latent_dim = opts->latent_dim;
      cfg.render_ode = ode::OdeConfig::dopri5(opts->render_tolerance, opts->render_tolerance);
    }
    cfg.validate();
    const auto fit = interp::fit_pair(source->mesh, target->mesh, cfg, seed);
    const auto rep = interp::render_animation(fit, source->mesh, target->mesh, cfg, out_dir ? out_dir : "");
    nlohmann::json j = rep.to_json();
    j["config"] = interp::to_json(cfg);
    j["seed"] = seed;
    j["final_loss"] = fit.loss.empty() ? 0.0 : fit.loss.back();
    put(report, j);
  });
}

fm_status fm_verify(uint64_t seed, int inject_fault, char** report, char** table, int* passed) {
  return guarded([&] {
    diagnostics::VerifyOptions o;
    o.seed = seed;
    o.inject_relu_fault = inject_fault != 0;
    const auto r = diagnostics::run_verify(o);
    put(report, r.to_json());
    if (table) *table = dup_string(r.table());
    if (passed) *passed = r.pass() ? 1 : 0;
  });
}

fm_status fm_metrics(fm_space* space, const char* manifest_path, const char* split, const fm_embed_options* opts,
                     uint64_t seed, const char* csv_path, char** report) {
  return guarded([&] {
    require(space && manifest_path && split, "fm_metrics: null argument");
    diagnostics::MetricsOptions mo;
    mo.seed = seed;
    mo.embed = embed_config(opts);
    const auto manifest = training::DatasetManifest::load(manifest_path);
    const bool normalize = space->ckpt.config.value("normalize", false);
    std::vector<diagnostics::NamedMesh> eval;
    for (const auto& e : manifest.of(training::parse_split(split)))
      eval.push_back({e.mesh.filename().string(), training::load_dataset_mesh(e, normalize)});
    const auto r = diagnostics::run_metrics(space->ckpt, space->training_shapes(), eval, mo);
    if (csv_path) r.save_csv(csv_path);
    nlohmann::json j = r.to_json();
    j["seed"] = seed;
    j["split"] = split;
    j["observation_points"] = mo.observation_points;
    j["noise"] = mo.noise;
    j["config"] = embedding::to_json(mo.embed);
    put(report, j);
  });
}

}  // extern "C"
