#ifndef QLMASS_H
#define QLMASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QlmStatus {
  QLM_STATUS_OK = 0,
  QLM_STATUS_NULL_POINTER = 1,
  QLM_STATUS_INVALID_PARAMETER = 2,
  QLM_STATUS_OUT_OF_RANGE = 3,
  QLM_STATUS_GRID_MISMATCH = 4,
  QLM_STATUS_NUMERICAL_DOMAIN = 5,
  QLM_STATUS_NOT_REVOLUTION_EMBEDDABLE = 6,
  QLM_STATUS_POSITIVE_CURVATURE_VIOLATION = 7,
  QLM_STATUS_NOT_SPACELIKE = 8,
  QLM_STATUS_LINEAR_SOLVE_FAILURE = 9,
  QLM_STATUS_DEGENERATE_MEASUREMENT = 10,
  QLM_STATUS_SOLVER_FAILURE = 11,
  QLM_STATUS_MAXIMUM_PRINCIPLE_VIOLATION = 12,
  QLM_STATUS_INTERNAL_CONSISTENCY = 13,
  QLM_STATUS_UNSUPPORTED_METRIC = 14,
  QLM_STATUS_BUFFER_TOO_SMALL = 15,
  QLM_STATUS_PANIC = 99,
} QlmStatus;

// Metric constructors. `p1` is `m` for the Schwarzschild forms and `eps`
// for the conformal bump, whose width is `p2`; unused parameters are ignored.
typedef enum QlmMetricKind {
  QLM_METRIC_KIND_FLAT = 0,
  QLM_METRIC_KIND_SCHWARZSCHILD_ISOTROPIC = 1,
  QLM_METRIC_KIND_SCHWARZSCHILD_NEGATIVE = 2,
  QLM_METRIC_KIND_SCHWARZSCHILD_AREA_RADIUS = 3,
  QLM_METRIC_KIND_HYPERBOLIC = 4,
  QLM_METRIC_KIND_SPHERICAL = 5,
  QLM_METRIC_KIND_CONFORMAL_BUMP = 6,
} QlmMetricKind;

// Opaque surface-of-revolution embedding with its source metric.
typedef struct QlmEmbedding QlmEmbedding;

// Opaque warped-product metric.
typedef struct QlmMetric QlmMetric;

// Opaque Gauss-Legendre theta grid.
typedef struct QlmThetaGrid QlmThetaGrid;

typedef struct QlmSphereGeometry {
  double r;
  double mean_curvature;
  double a_coeff;
  double area;
  double k_gauss;
  double eta;
} QlmSphereGeometry;

typedef struct QlmAdmDecomposition {
  double m_by_r0;
  double r_integral;
  double phi_integral;
  double sum;
  double reference;
  double defect;
} QlmAdmDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *qlm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qlm_version(void);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum QlmStatus qlm_metric_new(enum QlmMetricKind kind,
                              double p1,
                              double p2,
                              struct QlmMetric **out);

// # Safety
// `metric` must be null or a handle from [`qlm_metric_new`] not yet freed.
void qlm_metric_free(struct QlmMetric *metric);

// # Safety
// `metric` must be a live handle; `out` must be writable.
enum QlmStatus qlm_metric_sphere_geometry(const struct QlmMetric *metric,
                                          double r,
                                          struct QlmSphereGeometry *out);

// # Safety
// `metric` must be a live handle; `out` must be writable.
enum QlmStatus qlm_metric_scalar_curvature(const struct QlmMetric *metric, double r, double *out);

// Brown-York mass of the coordinate sphere `S_r`.
//
// # Safety
// `metric` must be a live handle; `out` must be writable.
enum QlmStatus qlm_metric_brown_york(const struct QlmMetric *metric, double r, double *out);

// Liu-Yau mass of the coordinate sphere `S_r`.
//
// # Safety
// `metric` must be a live handle; `out` must be writable.
enum QlmStatus qlm_metric_liu_yau(const struct QlmMetric *metric, double r, double *out);

// Right side of the mass evolution identity, `dm_BY/dr`.
//
// # Safety
// `metric` must be a live handle; `out` must be writable.
enum QlmStatus qlm_metric_evolution_rhs(const struct QlmMetric *metric, double r, double *out);

// # Safety
// `metric` must be a live handle; `out` must be writable.
enum QlmStatus qlm_metric_adm_decompose(const struct QlmMetric *metric,
                                        double r0,
                                        double r_max,
                                        struct QlmAdmDecomposition *out);

// # Safety
// `out` must be writable.
enum QlmStatus qlm_theta_grid_new(size_t n, struct QlmThetaGrid **out);

// # Safety
// `grid` must be null or a handle from [`qlm_theta_grid_new`] not yet freed.
void qlm_theta_grid_free(struct QlmThetaGrid *grid);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t qlm_theta_grid_len(const struct QlmThetaGrid *grid);

// Copy the polar angles (north pole first) into `theta[0..len]`.
//
// # Safety
// `grid` must be a live handle; `theta` must hold `len` doubles.
enum QlmStatus qlm_theta_grid_nodes(const struct QlmThetaGrid *grid, double *theta, size_t len);

// Copy the quadrature weights in `x = cos theta` into `weights[0..len]`.
//
// # Safety
// `grid` must be a live handle; `weights` must hold `len` doubles.
enum QlmStatus qlm_theta_grid_weights(const struct QlmThetaGrid *grid, double *weights, size_t len);

// Embed `A dtheta^2 + B dphi^2`, sampled on the nodes of `grid`.
//
// # Safety
// `grid` must be a live handle; `a` and `b` must each hold `len` doubles;
// `out` must be writable.
enum QlmStatus qlm_embed_axisym(const struct QlmThetaGrid *grid,
                                const double *a,
                                const double *b,
                                size_t len,
                                struct QlmEmbedding **out);

// # Safety
// `emb` must be null or a handle from [`qlm_embed_axisym`] not yet freed.
void qlm_embedding_free(struct QlmEmbedding *emb);

// Copy the mean curvature `H0` of the embedded surface into `h0[0..len]`.
//
// # Safety
// `emb` must be a live handle; `h0` must hold `len` doubles.
enum QlmStatus qlm_embedding_h0(const struct QlmEmbedding *emb, double *h0, size_t len);

// Copy the profile curve `(rho, z)` into `rho[0..len]` and `z[0..len]`.
//
// # Safety
// `emb` must be a live handle; `rho` and `z` must each hold `len` doubles.
enum QlmStatus qlm_embedding_profile(const struct QlmEmbedding *emb,
                                     double *rho,
                                     double *z,
                                     size_t len);

// `int H0 dsigma` over the embedded surface.
//
// # Safety
// `emb` must be a live handle; `out` must be writable.
enum QlmStatus qlm_embedding_total_mean_curvature(const struct QlmEmbedding *emb, double *out);

// Liu-Yau mass of the light-cone cross-section `t = r = F(theta)`, with
// `F` given by Legendre coefficients `coeffs[0..ncoeffs]` and `n` nodes.
//
// # Safety
// `coeffs` must hold `ncoeffs` doubles; `out` must be writable.
enum QlmStatus qlm_lightcone_liu_yau(const double *coeffs, size_t ncoeffs, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QLMASS_H */
