#ifndef POLYFRAC_H
#define POLYFRAC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes of every fallible call.
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_INPUT = 2,
  PF_STATUS_IO = 3,
  // Mesh construction or geometry failure.
  PF_STATUS_MESH = 4,
  // Factorisation, linear solve or Newton failure.
  PF_STATUS_SOLVER = 5,
  PF_STATUS_OUT_OF_RANGE = 6,
  PF_STATUS_PANIC = 7,
} PfStatus;

typedef enum PfVerifyKind {
  PF_VERIFY_KIND_INFSUP = 0,
  PF_VERIFY_KIND_KORN = 1,
  PF_VERIFY_KIND_CONSISTENCY = 2,
} PfVerifyKind;

// A polytopal mesh, possibly with a fracture.
typedef struct PfMesh PfMesh;

// Convergence table and diagnostics of a study run.
typedef struct PfReport PfReport;

typedef struct PfMeshCounts {
  size_t dim;
  size_t vertices;
  size_t faces;
  size_t cells;
  size_t fracture_faces;
} PfMeshCounts;

// Stability and consistency values of one mesh, whole boundary clamped.
// Entries that were not requested are NaN.
typedef struct PfVerifyValues {
  double h;
  double infsup;
  double infsup_ablated;
  double korn;
  double consistency;
  double adjoint;
} PfVerifyValues;

// Newton options; `beta <= 0` selects the face-wise default.
typedef struct PfSolverOptions {
  double tol;
  size_t max_iter;
  bool linesearch;
  double beta;
} PfSolverOptions;

// Outcome of a manufactured solve; errors are relative.
typedef struct PfSolveSummary {
  bool converged;
  size_t iterations;
  double kkt;
  double max_normal_jump;
  size_t open;
  size_t stick;
  size_t slip;
  double h;
  double error_u;
  double error_grad;
  double error_jump;
  double error_lambda_n;
} PfSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL terminated,
// truncated to `len` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t pf_last_error_message(char *buf, size_t len);

// Generates the cube mesh of the manufactured study: `n` cells per axis of
// the family `family` (`cartesian`, `tet`, `hexa_cut`, `hexa_bary`) with the
// fracture on `x = 0`.
//
// # Safety
// `family` must be a NUL-terminated string and `out` a valid pointer.
enum PfStatus pf_mesh_generate(const char *family,
                               size_t n,
                               double amplitude,
                               uint64_t seed,
                               struct PfMesh **out);

// Reads a JSON mesh file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum PfStatus pf_mesh_read(const char *path, struct PfMesh **out);

// Writes a JSON mesh file.
//
// # Safety
// `mesh` must come from this library and `path` be NUL terminated.
enum PfStatus pf_mesh_write(const struct PfMesh *mesh, const char *path);

// # Safety
// `mesh` must come from this library and `out` be a valid pointer.
enum PfStatus pf_mesh_counts(const struct PfMesh *mesh, struct PfMeshCounts *out);

// Releases a mesh; null is ignored.
//
// # Safety
// `mesh` must come from this library and not be used afterwards.
void pf_mesh_free(struct PfMesh *mesh);

// # Safety
// `mesh` must come from this library and `out` be a valid pointer.
enum PfStatus pf_verify(const struct PfMesh *mesh,
                        enum PfVerifyKind kind,
                        struct PfVerifyValues *out);

// Default solver options.
struct PfSolverOptions pf_solver_options_default(void);

// Solves the manufactured Tresca problem on `mesh`, which must cover
// `(−1,1)³` with the fracture on `x = 0`.
//
// # Safety
// `mesh` must come from this library and `out` be a valid pointer.
enum PfStatus pf_solve_manufactured(const struct PfMesh *mesh,
                                    struct PfSolverOptions options,
                                    struct PfSolveSummary *out);

// Runs `study` (`compression2d` or `manufactured3d`) on `family` over
// `n_levels` levels. The compression study uses the elliptic slip profile
// and plane-strain compliance when `reference_slip` is true.
//
// # Safety
// Strings must be NUL terminated, `levels` must point to `n_levels` values
// and `out` be a valid pointer.
enum PfStatus pf_study_run(const char *study,
                           const char *family,
                           const size_t *levels,
                           size_t n_levels,
                           struct PfSolverOptions options,
                           bool reference_slip,
                           struct PfReport **out);

// # Safety
// `report` must come from this library; `rows` and `columns` valid pointers.
enum PfStatus pf_report_shape(const struct PfReport *report, size_t *rows, size_t *columns);

// Copies the name of error column `column` like [`pf_last_error_message`]
// and returns its length, or 0 when out of range.
//
// # Safety
// `report` must come from this library; `buf` null or `len` writable bytes.
size_t pf_report_column_name(const struct PfReport *report, size_t column, char *buf, size_t len);

// Mesh size and error of `column` on level `row`.
//
// # Safety
// `report` must come from this library; `h` and `value` valid pointers.
enum PfStatus pf_report_value(const struct PfReport *report,
                              size_t row,
                              size_t column,
                              double *h,
                              double *value);

// Number of failed checks of the study, written to `failed`.
//
// # Safety
// `report` must come from this library and `failed` be a valid pointer.
enum PfStatus pf_report_failed_checks(const struct PfReport *report, size_t *failed);

// # Safety
// `report` must come from this library and `path` be NUL terminated.
enum PfStatus pf_report_write_csv(const struct PfReport *report, const char *path);

// Releases a report; null is ignored.
//
// # Safety
// `report` must come from this library and not be used afterwards.
void pf_report_free(struct PfReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYFRAC_H */
