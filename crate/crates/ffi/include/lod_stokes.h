#ifndef LOD_STOKES_H
#define LOD_STOKES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum LodStatus {
  LOD_STATUS_OK = 0,
  LOD_STATUS_NULL_POINTER = 1,
  LOD_STATUS_INVALID_INPUT = 2,
  LOD_STATUS_MESH_STRUCTURE = 3,
  LOD_STATUS_SOLVER = 4,
  LOD_STATUS_CONSTRUCTION = 5,
  LOD_STATUS_IO = 6,
  LOD_STATUS_PARSE = 7,
  LOD_STATUS_CELL_FAILED = 8,
  LOD_STATUS_BUFFER_TOO_SMALL = 9,
  LOD_STATUS_PANIC = 10,
} LodStatus;

/*
 Which field [`lod_solution_copy`] returns.
 */
typedef enum LodField {
  /*
   Fine velocity degrees of freedom.
   */
  LOD_FIELD_VELOCITY = 0,
  /*
   One value per coarse element.
   */
  LOD_FIELD_COARSE_PRESSURE = 1,
  /*
   Fine discontinuous P1 pressure, three values per fine triangle.
   */
  LOD_FIELD_OSCILLATORY_PRESSURE = 2,
} LodField;

/*
 Problem setup: mesh hierarchy, fine space and viscosity field.
 */
typedef struct LodProblem LodProblem;

/*
 Multiscale solution in fine degrees of freedom.
 */
typedef struct LodSolution LodSolution;

/*
 Source term callback: writes `f(x, y)` to `out[0..2]`. May be called
 concurrently from several threads.
 */
typedef void (*LodSourceFn)(double x, double y, double *out, void *user_data);

/*
 Errors against the fine reference solution.
 */
typedef struct LodErrors {
  double err_u_h1;
  double err_u_l2;
  double err_p_pp_l2;
  double err_pihp_l2;
} LodErrors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *lod_version(void);

/*
 Copies the last error message of this thread into `buf` (NUL
 terminated, truncated to `len`). Returns the full message length.

 # Safety
 `buf` must be null or valid for `len` bytes.
 */
size_t lod_last_error_message(char *buf, size_t len);

/*
 Creates a problem on the unit square with coarse size `2^-coarse_level`
 and fine level `fine_level` (barycentric refinement applied). The
 viscosity starts as the constant 1.

 # Safety
 `out` must be valid for writing one pointer.
 */
enum LodStatus lod_problem_new(uint32_t coarse_level, uint32_t fine_level, struct LodProblem **out);

/*
 # Safety
 `problem` must be null or a handle from [`lod_problem_new`] not yet freed.
 */
void lod_problem_free(struct LodProblem *problem);

/*
 Sets a constant viscosity `nu > 0`.

 # Safety
 `problem` must be a live handle.
 */
enum LodStatus lod_problem_set_constant_viscosity(struct LodProblem *problem, double nu);

/*
 Sets the random viscosity: uniform in `[nu_min, nu_max]` on the mesh of
 size `2^-eps_level`, `inclusion_value` near the default parabola.

 # Safety
 `problem` must be a live handle.
 */
enum LodStatus lod_problem_set_random_viscosity(struct LodProblem *problem,
                                                uint32_t eps_level,
                                                uint64_t seed,
                                                double nu_min,
                                                double nu_max,
                                                double inclusion_value);

/*
 Number of velocity and pressure degrees of freedom of the fine space.

 # Safety
 `problem` must be a live handle; the outputs must be valid or null.
 */
enum LodStatus lod_problem_dofs(const struct LodProblem *problem,
                                size_t *velocity,
                                size_t *pressure);

/*
 Solves with method order `m` and patch order `ell` (`0` selects patches
 covering the domain). A null `source` uses `f = (-y, x^4)`. With
 `compute_errors != 0` the fine reference is solved as well.

 # Safety
 `problem` must be a live handle, `out` valid for one pointer, and
 `source` (if set) callable from any thread with `user_data`.
 */
enum LodStatus lod_solve(const struct LodProblem *problem,
                         uint32_t m,
                         uint32_t ell,
                         LodSourceFn source,
                         void *user_data,
                         int32_t compute_errors,
                         struct LodSolution **out);

/*
 # Safety
 `solution` must be null or a handle from [`lod_solve`] not yet freed.
 */
void lod_solution_free(struct LodSolution *solution);

/*
 Patch order used and number of basis functions.

 # Safety
 `solution` must be a live handle; outputs valid or null.
 */
enum LodStatus lod_solution_info(const struct LodSolution *solution,
                                 uint32_t *ell,
                                 size_t *num_basis);

/*
 Errors against the fine reference; `LOD_STATUS_INVALID_INPUT` if the
 solve ran without `compute_errors`.

 # Safety
 `solution` must be a live handle and `out` valid.
 */
enum LodStatus lod_solution_errors(const struct LodSolution *solution, struct LodErrors *out);

/*
 Copies a field into `buf`. `written` receives the field length; call
 with `buf = NULL, len = 0` to query it.

 # Safety
 `solution` must be a live handle, `buf` valid for `len` values.
 */
enum LodStatus lod_solution_copy(const struct LodSolution *solution,
                                 enum LodField field,
                                 double *buf,
                                 size_t len,
                                 size_t *written);

/*
 Runs a convergence study from `key = value` configuration text and
 writes the CSV to `csv_path`.

 # Safety
 Both arguments must be NUL-terminated strings.
 */
enum LodStatus lod_run_study(const char *config, const char *csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOD_STOKES_H */
