/* flowmorph C API.
 *
 * Every fallible call returns an fm_status; on failure fm_last_error() holds a
 * message for the calling thread. Handles are opaque and released with their
 * matching _free function. Strings returned through char** are released with
 * fm_string_free.
 */
#ifndef FLOWMORPH_H
#define FLOWMORPH_H

#include <stddef.h>
#include <stdint.h>

#if defined(FLOWMORPH_BUILDING)
#define FM_API __attribute__((visibility("default")))
#else
#define FM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fm_status {
  FM_OK = 0,
  FM_ERR_INVALID_ARGUMENT = 1,
  FM_ERR_IO = 2,
  FM_ERR_PARSE = 3,
  FM_ERR_NUMERIC = 4, /* integration failure or non-finite training loss */
  FM_ERR_RUNTIME = 5
} fm_status;

typedef struct fm_mesh fm_mesh;
typedef struct fm_points fm_points;
typedef struct fm_space fm_space; /* trained checkpoint plus its training meshes */

FM_API const char* fm_version(void);
FM_API const char* fm_last_error(void);
FM_API const char* fm_status_name(fm_status s);
FM_API void fm_string_free(char* s);

/* 0 restores the hardware default. */
FM_API void fm_set_threads(int threads);

/* Meshes */
FM_API fm_status fm_mesh_load(const char* path, fm_mesh** out);
FM_API fm_status fm_mesh_save(const fm_mesh* mesh, const char* path);
/* vertices: 3*nv doubles, faces: 3*nf ints; labels may be NULL. */
FM_API fm_status fm_mesh_from_arrays(const double* vertices, size_t nv, const int32_t* faces, size_t nf,
                                     const int32_t* labels, fm_mesh** out);
FM_API size_t fm_mesh_vertex_count(const fm_mesh* mesh);
FM_API size_t fm_mesh_face_count(const fm_mesh* mesh);
FM_API int fm_mesh_has_labels(const fm_mesh* mesh);
FM_API fm_status fm_mesh_vertices(const fm_mesh* mesh, double* out);
FM_API fm_status fm_mesh_signed_volume(const fm_mesh* mesh, double* out);
FM_API fm_status fm_mesh_intersections(const fm_mesh* mesh, size_t* out);
FM_API void fm_mesh_free(fm_mesh* mesh);

/* Point clouds */
FM_API fm_status fm_points_load(const char* path, fm_points** out);
FM_API fm_status fm_points_from_array(const double* xyz, size_t n, fm_points** out);
FM_API fm_status fm_mesh_sample(const fm_mesh* mesh, size_t n, uint64_t seed, fm_points** out);
FM_API size_t fm_points_count(const fm_points* pts);
FM_API fm_status fm_points_data(const fm_points* pts, double* out);
FM_API void fm_points_free(fm_points* pts);

/* Training and checkpoints
 *
 * config_path may be NULL. overrides is NULL or newline-separated
 * "key = value" lines applied after the file. When out is non-NULL it
 * receives the trained space. The effective config is echoed into the
 * checkpoint. */
FM_API fm_status fm_train(const char* manifest_path, const char* config_path, const char* overrides,
                          const char* out_dir, fm_space** out);
FM_API fm_status fm_space_load(const char* dir, fm_space** out);
FM_API fm_status fm_space_save(const fm_space* space, const char* dir);
FM_API size_t fm_space_shape_count(const fm_space* space);
FM_API int fm_space_latent_dim(const fm_space* space);
FM_API fm_status fm_space_code(const fm_space* space, size_t shape, double* out);
FM_API fm_status fm_space_shape_mesh(fm_space* space, size_t shape, fm_mesh** out);
/* JSON object with the stored config, seed and step. */
FM_API fm_status fm_space_info(const fm_space* space, char** json);
FM_API void fm_space_free(fm_space* space);

/* Embedding and reconstruction */
typedef struct fm_embed_options {
  double init_std;
  double learning_rate;
  int iterations;
  int finetune_iterations;
  double finetune_learning_rate;
  int k;
  int shapes_per_step;
  int samples;
  int eval_samples;
} fm_embed_options;

FM_API void fm_embed_options_default(fm_embed_options* opts);

/* code_out receives latent_dim doubles; report may be NULL. */
FM_API fm_status fm_embed(fm_space* space, const fm_points* obs, const fm_embed_options* opts, uint64_t seed,
                          double* code_out, char** report);
FM_API fm_status fm_reconstruct(fm_space* space, const fm_points* obs, const fm_embed_options* opts, uint64_t seed,
                                fm_mesh** mesh_out, char** report);

/* Correspondence. code may be NULL with shape >= 0 to use a table entry. */
FM_API fm_status fm_canonicalize(const fm_space* space, const fm_mesh* mesh, const double* code, double rtol,
                                 double atol, fm_mesh** out);
/* target_out has one slot per source vertex; distance_out may be NULL. */
FM_API fm_status fm_correspond(const fm_space* space, const fm_mesh* source, const double* source_code,
                               const fm_mesh* target, const double* target_code, double rtol, double atol,
                               int32_t* target_out, double* distance_out);
FM_API fm_status fm_naive_correspond(const fm_mesh* source, const fm_mesh* target, int32_t* target_out,
                                     double* distance_out);
FM_API fm_status fm_correspondence_save_csv(const int32_t* target, const double* distance, size_t n,
                                            const char* path);
/* fwd has one entry per vertex of a, bwd one per vertex of b. */
FM_API fm_status fm_sms(const fm_mesh* a, const fm_mesh* b, const int32_t* fwd, const int32_t* bwd, double* score,
                        double* forward, double* backward);

/* Keyframe interpolation */
typedef struct fm_interp_options {
  int frames;
  int supervision_frames;
  int divergence_free; /* 0 direct, 1 divergence-free */
  int symmetric;       /* yz-plane symmetry */
  double edge_weight;
  long steps;
  double learning_rate;
  int width;
  int latent_dim;
  double render_tolerance; /* dopri5 rtol = atol */
} fm_interp_options;

FM_API void fm_interp_options_default(fm_interp_options* opts);

/* Fits the pair and renders frames. out_dir may be NULL to skip files. */
FM_API fm_status fm_interpolate(const fm_mesh* source, const fm_mesh* target, const fm_interp_options* opts,
                                uint64_t seed, const char* out_dir, char** report);

/* Diagnostics. passed receives 1 when every property holds. */
FM_API fm_status fm_verify(uint64_t seed, int inject_fault, char** report, char** table, int* passed);
/* split: "train" | "test" | "val". csv_path may be NULL. */
FM_API fm_status fm_metrics(fm_space* space, const char* manifest_path, const char* split,
                            const fm_embed_options* opts, uint64_t seed, const char* csv_path, char** report);

#ifdef __cplusplus
}
#endif

#endif
