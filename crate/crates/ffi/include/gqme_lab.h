#ifndef GQME_LAB_H
#define GQME_LAB_H

/* Generated by cbindgen from the gqme-lab-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum GqmeStatus {
  GQME_STATUS_OK = 0,
  GQME_STATUS_NULL_ARGUMENT = 1,
  GQME_STATUS_INVALID_CONFIG = 2,
  GQME_STATUS_INSTABILITY = 3,
  GQME_STATUS_DEGENERATE_STATIONARY = 4,
  GQME_STATUS_RUNTIME_ERROR = 5,
} GqmeStatus;

// Opaque handle to a loaded run configuration.
typedef struct GqmeConfig GqmeConfig;

// Copy the message of the last error on this thread into `buf`
// (NUL-terminated, truncated to `cap` bytes).  Returns the full message
// length in bytes, excluding the terminator.
size_t gqme_last_error(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *gqme_version(void);

// Parse and validate a TOML run configuration.  Returns NULL on failure;
// inspect `gqme_last_error`.  Free with `gqme_config_free`.
struct GqmeConfig *gqme_config_load(const char *path);

// Release a configuration handle.  NULL is ignored.
void gqme_config_free(struct GqmeConfig *cfg);

// Execute the full pipeline for a loaded configuration.  `output_dir` may
// be NULL to use the directory from the configuration file.
enum GqmeStatus gqme_run(const struct GqmeConfig *cfg, const char *output_dir);

// Equilibrium upper-state population from the canonical phase-space average
// of the mapped Hamiltonian.  `spin_mapping` selects the method: 0 for
// mean-field (unit sphere), nonzero for the W-sphere of radius sqrt(3).
enum GqmeStatus gqme_ergodic_population(double delta,
                                        double eps,
                                        double xi,
                                        double omega_c,
                                        double beta,
                                        uint32_t f_modes,
                                        int32_t spin_mapping,
                                        double *out);

// Quantum-classical equilibrium upper-state population from the
// one-dimensional reaction-coordinate integral.
enum GqmeStatus gqme_thermal_population(double delta,
                                        double eps,
                                        double xi,
                                        double omega_c,
                                        double beta,
                                        uint32_t f_modes,
                                        double *out);

#endif  /* GQME_LAB_H */
