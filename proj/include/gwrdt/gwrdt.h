/* C interface to the gwrdt library. All objects are opaque handles; every
 * fallible call returns a gwrdt_status and leaves a thread-local message
 * readable through gwrdt_last_error(). Strings returned through char** out
 * parameters are heap allocated and must be released with
 * gwrdt_string_free(). */
#ifndef GWRDT_GWRDT_H
#define GWRDT_GWRDT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GWRDT_API __declspec(dllexport)
#else
#define GWRDT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gwrdt_status {
  GWRDT_OK = 0,
  GWRDT_INVALID_SYMBOL,
  GWRDT_INVALID_PARAMETER,
  GWRDT_STOCHASTICITY_VIOLATION,
  GWRDT_CRITICALITY_VIOLATION,
  GWRDT_CAP_VIOLATION,
  GWRDT_INVALID_TREE,
  GWRDT_NO_SUCH_SIZE,
  GWRDT_CONDITIONING_FAILED,
  GWRDT_COUNT_EXCEEDED,
  GWRDT_SIZE_MISMATCH,
  GWRDT_ALPHABET_MISMATCH,
  GWRDT_NO_CONVERGENCE,
  GWRDT_DEGENERATE_MATRIX,
  GWRDT_NOT_CRITICAL,
  GWRDT_OPT_FAILED,
  GWRDT_PRECONDITION_VIOLATED,
  GWRDT_PARSE_ERROR,
  GWRDT_IO_ERROR,
  GWRDT_INVALID_ARGUMENT,
  GWRDT_INTERNAL
} gwrdt_status;

typedef enum gwrdt_mode { GWRDT_MODE_EXACT = 0, GWRDT_MODE_MC = 1 } gwrdt_mode;

typedef enum gwrdt_order {
  GWRDT_ORDER_SOURCE_INNER = 0,
  GWRDT_ORDER_CODEBOOK_INNER = 1
} gwrdt_order;

typedef enum gwrdt_orientation { GWRDT_RIGHT = 0, GWRDT_LEFT = 1 } gwrdt_orientation;

typedef struct gwrdt_model gwrdt_model;
typedef struct gwrdt_tree gwrdt_tree;
typedef struct gwrdt_distortion gwrdt_distortion;

/* Shared knobs of the sampling and enumeration experiments. */
typedef struct gwrdt_options {
  gwrdt_mode mode;
  gwrdt_order order;
  uint64_t samples;
  uint64_t seed;
  uint64_t max_rejects;
  size_t budget;
  size_t trees_per_n;
  int z_points;
  unsigned threads; /* 0: GWRDT_THREADS, else hardware concurrency */
} gwrdt_options;

GWRDT_API const char* gwrdt_version(void);
GWRDT_API const char* gwrdt_status_name(gwrdt_status status);
GWRDT_API const char* gwrdt_last_error(void);
GWRDT_API void gwrdt_string_free(char* s);
GWRDT_API gwrdt_options gwrdt_options_default(void);

/* Models */
GWRDT_API gwrdt_status gwrdt_model_builtin(const char* name, double param, gwrdt_model** out);
GWRDT_API gwrdt_status gwrdt_model_from_json(const char* text, gwrdt_model** out);
GWRDT_API gwrdt_status gwrdt_model_load(const char* path, gwrdt_model** out);
GWRDT_API void gwrdt_model_free(gwrdt_model* model);
GWRDT_API gwrdt_status gwrdt_model_to_json(const gwrdt_model* model, char** out);
GWRDT_API size_t gwrdt_model_types(const gwrdt_model* model);
GWRDT_API int gwrdt_model_cap(const gwrdt_model* model);
/* passed: 1 when stochastic, within cap and critical within tol. */
GWRDT_API gwrdt_status gwrdt_model_validate(const gwrdt_model* model, double tol, int* passed, char** report);
/* Row-major types x types mean matrix into out (capacity in doubles). */
GWRDT_API gwrdt_status gwrdt_model_mean_matrix(const gwrdt_model* model, double* out, size_t capacity);

/* Pair matrix in the (b, b') row orientation, its Perron data and
 * marginals as long-format CSV: section,row,col,value. */
GWRDT_API gwrdt_status gwrdt_spectral_csv(const gwrdt_model* mx, const gwrdt_model* my,
                                          gwrdt_orientation orientation, char** csv);

/* Trees */
GWRDT_API gwrdt_status gwrdt_tree_sample(const gwrdt_model* model, uint64_t seed, size_t size_cap,
                                         gwrdt_tree** out, int* overflow);
GWRDT_API gwrdt_status gwrdt_tree_sample_conditioned(const gwrdt_model* model, size_t n, uint64_t seed,
                                                     uint64_t max_rejects, gwrdt_tree** out);
GWRDT_API gwrdt_status gwrdt_tree_parse(const gwrdt_model* model, const char* line, gwrdt_tree** out);
GWRDT_API gwrdt_status gwrdt_tree_format(const gwrdt_model* model, const gwrdt_tree* tree, char** out);
GWRDT_API gwrdt_status gwrdt_tree_prob(const gwrdt_model* model, const gwrdt_tree* tree, double* out);
GWRDT_API size_t gwrdt_tree_size(const gwrdt_tree* tree);
GWRDT_API void gwrdt_tree_free(gwrdt_tree* tree);

/* CSV: index,prob,conditional,tree. total receives P(|T| = n). */
GWRDT_API gwrdt_status gwrdt_enumerate_csv(const gwrdt_model* model, size_t n, size_t budget, char** csv,
                                           double* total);

/* Empirical measures */
GWRDT_API gwrdt_status gwrdt_offspring_measure_csv(const gwrdt_model* model, const gwrdt_tree* tree, char** csv);
/* paired_view != 0 keys atoms by (type pair, offspring pair). */
GWRDT_API gwrdt_status gwrdt_joint_measure_csv(const gwrdt_model* model, const gwrdt_tree* tx,
                                               const gwrdt_tree* ty, int paired_view, char** csv,
                                               double* max_defect);

/* Distortions */
GWRDT_API gwrdt_status gwrdt_distortion_builtin(const char* name, int cap, gwrdt_distortion** out);
GWRDT_API gwrdt_status gwrdt_distortion_load(const char* path, const gwrdt_model* mx, const gwrdt_model* my,
                                             gwrdt_distortion** out);
GWRDT_API double gwrdt_distortion_bound(const gwrdt_distortion* rho);
GWRDT_API void gwrdt_distortion_free(gwrdt_distortion* rho);

/* Rate functions */
GWRDT_API gwrdt_status gwrdt_lambda_inf(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                                        double t, gwrdt_order order, double* out);
GWRDT_API gwrdt_status gwrdt_d_average(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                                       double* out);
/* curve_csv: d,R; lambda_csv: t,lambda; finite_csv: n,d,R_n; summary_json
 * holds d_min, d_av, d_min^(n), the d_min proxy and reference threshold. Any
 * out pointer may be NULL. */
GWRDT_API gwrdt_status gwrdt_rd_curve(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                                      const double* d_grid, size_t d_count, const double* t_grid, size_t t_count,
                                      const size_t* n_list, size_t n_count, gwrdt_order order, char** curve_csv,
                                      char** lambda_csv, char** finite_csv, char** summary_json);
/* CSV: z,i_rho,constraint_residual,max_defect. */
GWRDT_API gwrdt_status gwrdt_irho_csv(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                                      const double* z, size_t z_count, unsigned threads, char** csv);

/* Experiments */
/* One-row CSV: n,d,method,probability,exponent,stderr,censored,lower_bound,x_digest. */
GWRDT_API gwrdt_status gwrdt_ball_exponent_csv(const gwrdt_tree* x, double d, const gwrdt_model* my,
                                               const gwrdt_distortion* rho, const gwrdt_options* opts, char** csv);
GWRDT_API gwrdt_status gwrdt_verify_aep(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                                        double d, const size_t* n_list, size_t n_count, const gwrdt_options* opts,
                                        char** csv, char** json);
GWRDT_API gwrdt_status gwrdt_ldp_decay(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                                       double lo, double hi, const size_t* n_list, size_t n_count,
                                       const gwrdt_options* opts, char** csv, char** json);
GWRDT_API gwrdt_status gwrdt_stationarity(const gwrdt_model* mx, const gwrdt_model* my, const size_t* n_list,
                                          size_t n_count, const gwrdt_options* opts, char** csv, char** json);

#ifdef __cplusplus
}
#endif

#endif /* GWRDT_GWRDT_H */
