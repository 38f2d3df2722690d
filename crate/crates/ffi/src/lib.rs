//! C ABI for `qlmass`.
//!
//! Objects cross the boundary as opaque handles created by `qlm_*_new` and
//! released by the matching `qlm_*_free`. Every fallible call returns a
//! [`QlmStatus`]; on failure the message is available from
//! [`qlm_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use qlmass::discretization::ThetaGrid;
use qlmass::lightcone::{liu_yau_profile, LegendreProfile};
use qlmass::mass::{adm_decompose, coordinate_sphere_brown_york, coordinate_sphere_liu_yau, evolution_rhs};
use qlmass::warped_ambient::WarpedMetric3;
use qlmass::weyl_embedding::{embed_axisym, AxisymMetric2, RevolutionEmbedding};
use qlmass::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    OutOfRange = 3,
    GridMismatch = 4,
    NumericalDomain = 5,
    NotRevolutionEmbeddable = 6,
    PositiveCurvatureViolation = 7,
    NotSpacelike = 8,
    LinearSolveFailure = 9,
    DegenerateMeasurement = 10,
    SolverFailure = 11,
    MaximumPrincipleViolation = 12,
    InternalConsistency = 13,
    UnsupportedMetric = 14,
    BufferTooSmall = 15,
    Panic = 99,
}

impl From<&Error> for QlmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => QlmStatus::InvalidParameter,
            Error::GridMismatch { .. } => QlmStatus::GridMismatch,
            Error::OutOfRange { .. } => QlmStatus::OutOfRange,
            Error::NumericalDomain(_) => QlmStatus::NumericalDomain,
            Error::NotRevolutionEmbeddable { .. } => QlmStatus::NotRevolutionEmbeddable,
            Error::PositiveCurvatureViolation { .. } => QlmStatus::PositiveCurvatureViolation,
            Error::NotSpacelike { .. } => QlmStatus::NotSpacelike,
            Error::LinearSolveFailure(_) => QlmStatus::LinearSolveFailure,
            Error::DegenerateMeasurement(_) => QlmStatus::DegenerateMeasurement,
            Error::SolverFailure { .. } => QlmStatus::SolverFailure,
            Error::MaximumPrincipleViolation { .. } => QlmStatus::MaximumPrincipleViolation,
            Error::InternalConsistency(_) => QlmStatus::InternalConsistency,
            Error::UnsupportedMetric(_) => QlmStatus::UnsupportedMetric,
        }
    }
}

/// Metric constructors. `p1` is `m` for the Schwarzschild forms and `eps`
/// for the conformal bump, whose width is `p2`; unused parameters are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlmMetricKind {
    Flat = 0,
    SchwarzschildIsotropic = 1,
    SchwarzschildNegative = 2,
    SchwarzschildAreaRadius = 3,
    Hyperbolic = 4,
    Spherical = 5,
    ConformalBump = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QlmSphereGeometry {
    pub r: f64,
    pub mean_curvature: f64,
    pub a_coeff: f64,
    pub area: f64,
    pub k_gauss: f64,
    pub eta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QlmAdmDecomposition {
    pub m_by_r0: f64,
    pub r_integral: f64,
    pub phi_integral: f64,
    pub sum: f64,
    pub reference: f64,
    pub defect: f64,
}

/// Opaque warped-product metric.
pub struct QlmMetric {
    inner: WarpedMetric3,
}

/// Opaque Gauss-Legendre theta grid.
pub struct QlmThetaGrid {
    inner: Arc<ThetaGrid>,
}

/// Opaque surface-of-revolution embedding with its source metric.
pub struct QlmEmbedding {
    sigma: AxisymMetric2,
    inner: RevolutionEmbedding,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: QlmStatus, msg: impl Into<String>) -> QlmStatus {
    set_last_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), QlmStatus>) -> QlmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QlmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(QlmStatus::Panic, "panic inside qlmass"),
    }
}

fn lib<T>(r: qlmass::Result<T>) -> Result<T, QlmStatus> {
    r.map_err(|e| fail(QlmStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), QlmStatus> {
    if p.is_null() {
        Err(fail(QlmStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qlm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qlm_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_new(kind: QlmMetricKind, p1: f64, p2: f64, out: *mut *mut QlmMetric) -> QlmStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = lib(match kind {
            QlmMetricKind::Flat => Ok(WarpedMetric3::flat()),
            QlmMetricKind::SchwarzschildIsotropic => WarpedMetric3::schwarzschild_isotropic(p1),
            QlmMetricKind::SchwarzschildNegative => WarpedMetric3::schwarzschild_negative(p1),
            QlmMetricKind::SchwarzschildAreaRadius => WarpedMetric3::schwarzschild_area_radius(p1),
            QlmMetricKind::Hyperbolic => Ok(WarpedMetric3::hyperbolic()),
            QlmMetricKind::Spherical => Ok(WarpedMetric3::spherical()),
            QlmMetricKind::ConformalBump => WarpedMetric3::conformal_bump(p1, p2),
        })?;
        *out = Box::into_raw(Box::new(QlmMetric { inner }));
        Ok(())
    })
}

/// # Safety
/// `metric` must be null or a handle from [`qlm_metric_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_free(metric: *mut QlmMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

unsafe fn metric_scalar(
    metric: *const QlmMetric,
    out: *mut f64,
    f: impl FnOnce(&WarpedMetric3) -> qlmass::Result<f64>,
) -> QlmStatus {
    guard(|| {
        non_null(metric, "metric")?;
        non_null(out, "out")?;
        *out = lib(f(&(*metric).inner))?;
        Ok(())
    })
}

/// # Safety
/// `metric` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_sphere_geometry(
    metric: *const QlmMetric,
    r: f64,
    out: *mut QlmSphereGeometry,
) -> QlmStatus {
    guard(|| {
        non_null(metric, "metric")?;
        non_null(out, "out")?;
        let g = lib((*metric).inner.sphere_geometry(r))?;
        *out = QlmSphereGeometry {
            r: g.r,
            mean_curvature: g.mean_curvature,
            a_coeff: g.a_coeff,
            area: g.area,
            k_gauss: g.k_gauss,
            eta: g.eta,
        };
        Ok(())
    })
}

/// # Safety
/// `metric` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_scalar_curvature(metric: *const QlmMetric, r: f64, out: *mut f64) -> QlmStatus {
    metric_scalar(metric, out, |g| g.scalar_curvature(r))
}

/// Brown-York mass of the coordinate sphere `S_r`.
///
/// # Safety
/// `metric` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_brown_york(metric: *const QlmMetric, r: f64, out: *mut f64) -> QlmStatus {
    metric_scalar(metric, out, |g| {
        coordinate_sphere_brown_york(g, r)?
            .m_by
            .ok_or_else(|| Error::InternalConsistency("missing Brown-York mass".into()))
    })
}

/// Liu-Yau mass of the coordinate sphere `S_r`.
///
/// # Safety
/// `metric` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_liu_yau(metric: *const QlmMetric, r: f64, out: *mut f64) -> QlmStatus {
    metric_scalar(metric, out, |g| {
        coordinate_sphere_liu_yau(g, r)?
            .m_ly
            .ok_or_else(|| Error::InternalConsistency("missing Liu-Yau mass".into()))
    })
}

/// Right side of the mass evolution identity, `dm_BY/dr`.
///
/// # Safety
/// `metric` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_evolution_rhs(metric: *const QlmMetric, r: f64, out: *mut f64) -> QlmStatus {
    metric_scalar(metric, out, |g| evolution_rhs(g, r))
}

/// # Safety
/// `metric` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_metric_adm_decompose(
    metric: *const QlmMetric,
    r0: f64,
    r_max: f64,
    out: *mut QlmAdmDecomposition,
) -> QlmStatus {
    guard(|| {
        non_null(metric, "metric")?;
        non_null(out, "out")?;
        let d = lib(adm_decompose(&(*metric).inner, r0, r_max))?;
        *out = QlmAdmDecomposition {
            m_by_r0: d.m_by_r0,
            r_integral: d.r_integral.total(),
            phi_integral: d.phi_integral.total(),
            sum: d.sum,
            reference: d.reference,
            defect: d.defect,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_theta_grid_new(n: usize, out: *mut *mut QlmThetaGrid) -> QlmStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = Arc::new(lib(ThetaGrid::new(n))?);
        *out = Box::into_raw(Box::new(QlmThetaGrid { inner }));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`qlm_theta_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qlm_theta_grid_free(grid: *mut QlmThetaGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlm_theta_grid_len(grid: *const QlmThetaGrid) -> usize {
    if grid.is_null() {
        0
    } else {
        (*grid).inner.len()
    }
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), QlmStatus> {
    non_null(dst, "buffer")?;
    if len < src.len() {
        return Err(fail(QlmStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Copy the polar angles (north pole first) into `theta[0..len]`.
///
/// # Safety
/// `grid` must be a live handle; `theta` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qlm_theta_grid_nodes(grid: *const QlmThetaGrid, theta: *mut f64, len: usize) -> QlmStatus {
    guard(|| {
        non_null(grid, "grid")?;
        copy_out((*grid).inner.theta(), theta, len)
    })
}

/// Copy the quadrature weights in `x = cos theta` into `weights[0..len]`.
///
/// # Safety
/// `grid` must be a live handle; `weights` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qlm_theta_grid_weights(grid: *const QlmThetaGrid, weights: *mut f64, len: usize) -> QlmStatus {
    guard(|| {
        non_null(grid, "grid")?;
        copy_out((*grid).inner.weights(), weights, len)
    })
}

/// Embed `A dtheta^2 + B dphi^2`, sampled on the nodes of `grid`.
///
/// # Safety
/// `grid` must be a live handle; `a` and `b` must each hold `len` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_embed_axisym(
    grid: *const QlmThetaGrid,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut *mut QlmEmbedding,
) -> QlmStatus {
    guard(|| {
        non_null(grid, "grid")?;
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        let a = std::slice::from_raw_parts(a, len).to_vec();
        let b = std::slice::from_raw_parts(b, len).to_vec();
        let sigma = lib(AxisymMetric2::new((*grid).inner.clone(), a, b, "ffi"))?;
        let inner = lib(embed_axisym(&sigma))?;
        *out = Box::into_raw(Box::new(QlmEmbedding { sigma, inner }));
        Ok(())
    })
}

/// # Safety
/// `emb` must be null or a handle from [`qlm_embed_axisym`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qlm_embedding_free(emb: *mut QlmEmbedding) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// Copy the mean curvature `H0` of the embedded surface into `h0[0..len]`.
///
/// # Safety
/// `emb` must be a live handle; `h0` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qlm_embedding_h0(emb: *const QlmEmbedding, h0: *mut f64, len: usize) -> QlmStatus {
    guard(|| {
        non_null(emb, "embedding")?;
        copy_out(&(*emb).inner.h0, h0, len)
    })
}

/// Copy the profile curve `(rho, z)` into `rho[0..len]` and `z[0..len]`.
///
/// # Safety
/// `emb` must be a live handle; `rho` and `z` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qlm_embedding_profile(
    emb: *const QlmEmbedding,
    rho: *mut f64,
    z: *mut f64,
    len: usize,
) -> QlmStatus {
    guard(|| {
        non_null(emb, "embedding")?;
        copy_out(&(*emb).inner.rho, rho, len)?;
        copy_out(&(*emb).inner.z, z, len)
    })
}

/// `int H0 dsigma` over the embedded surface.
///
/// # Safety
/// `emb` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_embedding_total_mean_curvature(emb: *const QlmEmbedding, out: *mut f64) -> QlmStatus {
    guard(|| {
        non_null(emb, "embedding")?;
        non_null(out, "out")?;
        *out = (*emb).inner.total_mean_curvature(&(*emb).sigma);
        Ok(())
    })
}

/// Liu-Yau mass of the light-cone cross-section `t = r = F(theta)`, with
/// `F` given by Legendre coefficients `coeffs[0..ncoeffs]` and `n` nodes.
///
/// # Safety
/// `coeffs` must hold `ncoeffs` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlm_lightcone_liu_yau(
    coeffs: *const f64,
    ncoeffs: usize,
    n: usize,
    out: *mut f64,
) -> QlmStatus {
    guard(|| {
        non_null(coeffs, "coeffs")?;
        non_null(out, "out")?;
        let profile = lib(LegendreProfile::new(std::slice::from_raw_parts(coeffs, ncoeffs).to_vec()))?;
        let surface = lib(liu_yau_profile(&profile, n))?;
        *out = lib(surface.mass.m_ly.ok_or_else(|| Error::InternalConsistency("missing Liu-Yau mass".into())))?;
        Ok(())
    })
}
