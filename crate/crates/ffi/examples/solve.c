/* Build from the repository root after `cargo build --release`:
   cc crates/ffi/examples/solve.c -Icrates/ffi/include target/release/liblod_stokes_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "lod_stokes.h"

static void source(double x, double y, double *out, void *user_data) {
    (void)user_data;
    out[0] = -y;
    out[1] = x * x * x * x;
}

int main(void) {
    LodProblem *problem = NULL;
    LodSolution *solution = NULL;
    LodErrors errors;
    char msg[256];

    if (lod_problem_new(1, 4, &problem) != LOD_STATUS_OK) goto fail;
    if (lod_problem_set_random_viscosity(problem, 4, 0, 0.1, 1.0, 10.0) != LOD_STATUS_OK) goto fail;
    if (lod_solve(problem, 1, 0, source, NULL, 1, &solution) != LOD_STATUS_OK) goto fail;
    if (lod_solution_errors(solution, &errors) != LOD_STATUS_OK) goto fail;
    printf("H1 %.3e  L2 %.3e  p %.3e\n", errors.err_u_h1, errors.err_u_l2, errors.err_p_pp_l2);
    lod_solution_free(solution);
    lod_problem_free(problem);
    return 0;

fail:
    lod_last_error_message(msg, sizeof msg);
    fprintf(stderr, "lod-stokes: %s\n", msg);
    lod_solution_free(solution);
    lod_problem_free(problem);
    return 1;
}
