#ifndef SNNLAB_H
#define SNNLAB_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum SnnlabStatus {
  SNNLAB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SNNLAB_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument, configuration, or architecture string.
   */
  SNNLAB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * File could not be read or written.
   */
  SNNLAB_STATUS_IO = 3,
  /**
   * Malformed checkpoint or dataset file.
   */
  SNNLAB_STATUS_FORMAT = 4,
  /**
   * Quadrature failure or coherence outside [0, 1].
   */
  SNNLAB_STATUS_NUMERICAL = 5,
  /**
   * Caller buffer too small; the required length was written back.
   */
  SNNLAB_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * Internal panic caught at the boundary.
   */
  SNNLAB_STATUS_PANIC = 7,
} SnnlabStatus;

/**
 * Opaque network handle.
 */
typedef struct SnnlabNetwork SnnlabNetwork;

/**
 * Parameters of the scaled LIF diffusion model.
 */
typedef struct SnnlabCoherenceParams {
  /**
   * Mean drive.
   */
  double mu;
  /**
   * Total noise intensity.
   */
  double d;
  /**
   * Stimulus share of the noise intensity, `0 <= d_st <= d`.
   */
  double d_st;
  /**
   * Absolute refractory period.
   */
  double tau_r;
  double v_th;
  double u_rest;
} SnnlabCoherenceParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *snnlab_version(void);

/**
 * Copy the calling thread's last error message into `buf`.
 *
 * Writes the required size (including the NUL) to `len` when it is non-null.
 * Returns `SNNLAB_STATUS_BUFFER_TOO_SMALL` if `capacity` is insufficient;
 * an empty string is written when no error has occurred.
 *
 * # Safety
 * `buf` must be valid for `capacity` bytes, or null when `capacity` is 0.
 */
enum SnnlabStatus snnlab_last_error(char *buf, size_t capacity, size_t *len);

/**
 * Build a network with freshly initialised weights.
 *
 * `tau_m = INFINITY` selects the non-leaky integrate-and-fire neuron.
 *
 * # Safety
 * `architecture` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SnnlabStatus snnlab_network_create(const char *architecture,
                                        double tau_m,
                                        double v_th,
                                        double u_rest,
                                        double epsilon,
                                        uint64_t seed,
                                        double init_gain,
                                        struct SnnlabNetwork **out);

/**
 * Load a network from a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SnnlabStatus snnlab_network_load(const char *path, struct SnnlabNetwork **out);

/**
 * Write a network to a checkpoint file.
 *
 * # Safety
 * `net` must come from a constructor and `path` be NUL-terminated.
 */
enum SnnlabStatus snnlab_network_save(const struct SnnlabNetwork *net, const char *path);

/**
 * Release a network. Null is ignored.
 *
 * # Safety
 * `net` must come from a constructor and not be used afterwards.
 */
void snnlab_network_free(struct SnnlabNetwork *net);

/**
 * Number of input pixels, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or come from a constructor.
 */
size_t snnlab_network_input_size(const struct SnnlabNetwork *net);

/**
 * Number of output classes, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or come from a constructor.
 */
size_t snnlab_network_output_size(const struct SnnlabNetwork *net);

/**
 * Poisson-encode `pixels` (values in [0, 1]) for `steps` time-steps and run
 * the network, writing the time-averaged output potentials to `prediction`.
 *
 * # Safety
 * `pixels` must hold `pixel_count` values and `prediction` `prediction_len`.
 */
enum SnnlabStatus snnlab_network_predict(const struct SnnlabNetwork *net,
                                         const double *pixels,
                                         size_t pixel_count,
                                         size_t steps,
                                         uint64_t seed,
                                         double *prediction,
                                         size_t prediction_len);

/**
 * Stationary firing rate of the LIF diffusion model.
 *
 * # Safety
 * `params` and `rate` must be valid pointers.
 */
enum SnnlabStatus snnlab_firing_rate(const struct SnnlabCoherenceParams *params, double *rate);

/**
 * Stimulus-response coherence at each of `count` angular frequencies.
 *
 * # Safety
 * `omegas` and `coherence` must each hold `count` values.
 */
enum SnnlabStatus snnlab_coherence(const struct SnnlabCoherenceParams *params,
                                   const double *omegas,
                                   size_t count,
                                   double *coherence);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNNLAB_H */
