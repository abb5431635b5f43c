#ifndef ERGOMIX_H
#define ERGOMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Chain construction method.
 */
typedef enum ErgomixMethod {
  ERGOMIX_METHOD_METROPOLIS_HASTINGS = 0,
  ERGOMIX_METHOD_FMRMC = 1,
  ERGOMIX_METHOD_UPPER_BOUND = 2,
  ERGOMIX_METHOD_MODIFIED_UPPER_BOUND = 3,
} ErgomixMethod;

/**
 * Result of every fallible call.
 */
typedef enum ErgomixStatus {
  ERGOMIX_STATUS_OK = 0,
  ERGOMIX_STATUS_NULL_POINTER = 1,
  ERGOMIX_STATUS_INVALID_ARGUMENT = 2,
  ERGOMIX_STATUS_PARSE_ERROR = 3,
  ERGOMIX_STATUS_VALIDATION_ERROR = 4,
  ERGOMIX_STATUS_SOLVER_ERROR = 5,
  ERGOMIX_STATUS_BUFFER_TOO_SMALL = 6,
  ERGOMIX_STATUS_PANIC = 7,
} ErgomixStatus;

/**
 * Opaque region graph.
 */
typedef struct ErgomixGraph ErgomixGraph;

/**
 * Opaque set of reference points with their beliefs.
 */
typedef struct ErgomixReferenceSet ErgomixReferenceSet;

/**
 * Opaque chain solution.
 */
typedef struct ErgomixSolution ErgomixSolution;

/**
 * Solver settings; obtain defaults from [`ergomix_solver_settings_default`].
 */
typedef struct ErgomixSolverSettings {
  size_t max_iterations;
  double tolerance;
  double barrier_growth;
  size_t restarts;
  uint64_t seed;
} ErgomixSolverSettings;

/**
 * Detector parameters.
 */
typedef struct ErgomixDetectorConfig {
  double epsilon;
  double smoothing_c;
  size_t neighborhood_k;
  size_t dimension;
} ErgomixDetectorConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread; do not free.
 */
const char *ergomix_last_error(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void ergomix_string_free(char *s);

struct ErgomixSolverSettings ergomix_solver_settings_default(void);

struct ErgomixDetectorConfig ergomix_detector_config_default(void);

/**
 * Parses a graph from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ErgomixStatus ergomix_graph_from_json(const char *json, struct ErgomixGraph **out);

/**
 * The bundled 9-node benchmark graph, with or without its two one-way edges.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ErgomixStatus ergomix_graph_benchmark(bool directed, struct ErgomixGraph **out);

/**
 * # Safety
 * `graph` must be NULL or a handle from this library, freed at most once.
 */
void ergomix_graph_free(struct ErgomixGraph *graph);

/**
 * Number of nodes, or 0 for a NULL handle.
 *
 * # Safety
 * `graph` must be NULL or a live handle.
 */
size_t ergomix_graph_node_count(const struct ErgomixGraph *graph);

/**
 * Checks irreducibility and aperiodicity.
 *
 * # Safety
 * `graph` must be a live handle.
 */
enum ErgomixStatus ergomix_graph_validate(const struct ErgomixGraph *graph);

/**
 * Builds a chain on `graph` whose stationary distribution is `weights`
 * (normalized internally). `settings` may be NULL for defaults.
 *
 * # Safety
 * `weights` must point to `len` doubles; `out` must be valid.
 */
enum ErgomixStatus ergomix_solve(const struct ErgomixGraph *graph,
                                 enum ErgomixMethod method,
                                 const double *weights,
                                 size_t len,
                                 const struct ErgomixSolverSettings *settings,
                                 struct ErgomixSolution **out);

/**
 * # Safety
 * `solution` must be NULL or a handle from this library, freed at most once.
 */
void ergomix_solution_free(struct ErgomixSolution *solution);

/**
 * SLEM of the solution, NaN for a NULL handle.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double ergomix_solution_slem(const struct ErgomixSolution *solution);

/**
 * Objective value (spectral norm minimized by the method), NaN for NULL.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double ergomix_solution_objective(const struct ErgomixSolution *solution);

/**
 * Copies the `n × n` transition matrix, row-major, into `buf` of length `cap`.
 *
 * # Safety
 * `buf` must hold `cap` doubles.
 */
enum ErgomixStatus ergomix_solution_transition(const struct ErgomixSolution *solution,
                                               double *buf,
                                               size_t cap);

/**
 * JSON serialization; free the result with [`ergomix_string_free`].
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
char *ergomix_solution_to_json(const struct ErgomixSolution *solution);

/**
 * Plans a `horizon`-long region sequence (best of `rollouts`) starting at
 * `start`. Writes the regions to `regions` (capacity `cap`) and the total
 * variation cost to `tv_cost` (may be NULL).
 *
 * # Safety
 * `regions` must hold `cap` entries.
 */
enum ErgomixStatus ergomix_plan_sequence(const struct ErgomixSolution *solution,
                                         size_t start,
                                         size_t horizon,
                                         size_t rollouts,
                                         uint64_t seed,
                                         size_t *regions,
                                         size_t cap,
                                         double *tv_cost);

/**
 * Upper-tail probability of a chi-squared variable.
 */
double ergomix_chi2_survival(double x, uint32_t dof);

/**
 * Empty reference set of the given dimension (2 or 3).
 *
 * # Safety
 * `out` must be valid.
 */
enum ErgomixStatus ergomix_reference_set_new(size_t dimension, struct ErgomixReferenceSet **out);

/**
 * # Safety
 * `set` must be NULL or a handle from this library, freed at most once.
 */
void ergomix_reference_set_free(struct ErgomixReferenceSet *set);

/**
 * Appends a reference point; `position` and `normal` hold `dimension` values.
 *
 * # Safety
 * Pointers must reference `dimension` doubles each.
 */
enum ErgomixStatus ergomix_reference_set_add(struct ErgomixReferenceSet *set,
                                             const double *position,
                                             const double *normal,
                                             double prior_h1);

/**
 * Number of points, 0 for NULL.
 *
 * # Safety
 * `set` must be NULL or a live handle.
 */
size_t ergomix_reference_set_len(const struct ErgomixReferenceSet *set);

/**
 * P(H1) of point `index`, NaN when out of range.
 *
 * # Safety
 * `set` must be NULL or a live handle.
 */
double ergomix_reference_set_belief_h1(const struct ErgomixReferenceSet *set, size_t index);

/**
 * Largest binary entropy among the points, NaN when empty or NULL.
 *
 * # Safety
 * `set` must be NULL or a live handle.
 */
double ergomix_reference_set_entropy(const struct ErgomixReferenceSet *set);

/**
 * Applies one observation batch. `positions` holds `count × d` values and
 * `covariances` `count × d × d` values (row-major per point). `config` may
 * be NULL for defaults; its dimension must match the set.
 *
 * # Safety
 * Arrays must have the stated lengths.
 */
enum ErgomixStatus ergomix_reference_set_observe(struct ErgomixReferenceSet *set,
                                                 const double *positions,
                                                 const double *covariances,
                                                 size_t count,
                                                 const struct ErgomixDetectorConfig *config);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ERGOMIX_H */
