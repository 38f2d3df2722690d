//! Isometric embedding of axisymmetric metrics `A dtheta^2 + B dphi^2` on the
//! sphere as surfaces of revolution, the linearized embedding equation on the
//! round sphere, and the first variation of the total mean curvature.
//!
//! Metrics are sampled on a [`ThetaGrid`]. Writing `B = sin^2(theta) b` with
//! `b` even keeps every pole factor explicit, so nothing is divided by a
//! vanishing quantity except through analytically cancelled `(1 - x^2)`
//! factors.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::discretization::{central_richardson, legendre, ThetaGrid};
use crate::error::{check_finite, Error, Result};

/// Tolerance on `B / (A sin^2) -> 1` at the poles, for resolved metrics.
pub const POLE_REGULARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct AxisymMetric2 {
    grid: Arc<ThetaGrid>,
    a: Vec<f64>,
    /// `B / sin^2(theta)`
    b: Vec<f64>,
    /// Set when the metric is `F^2 (round)`.
    conformal_factor: Option<Vec<f64>>,
    tag: String,
}

impl AxisymMetric2 {
    /// Metric from samples of `A` and `B`.
    pub fn new(grid: Arc<ThetaGrid>, a: Vec<f64>, b_full: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        grid.check_len(&a)?;
        grid.check_len(&b_full)?;
        let b = b_full.iter().zip(grid.sin_theta()).map(|(b, s)| b / (s * s)).collect();
        Self::from_reduced(grid, a, b, tag)
    }

    /// Metric from `A` and the reduced coefficient `b = B / sin^2(theta)`.
    pub fn from_reduced(grid: Arc<ThetaGrid>, a: Vec<f64>, b: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        grid.check_len(&a)?;
        grid.check_len(&b)?;
        check_finite(&a, "metric coefficient A")?;
        check_finite(&b, "metric coefficient B")?;
        if let Some(i) = a.iter().position(|v| *v <= 0.0) {
            return Err(Error::invalid(format!("A must be positive, A = {} at theta = {}", a[i], grid.theta()[i])));
        }
        if let Some(i) = b.iter().position(|v| *v <= 0.0) {
            return Err(Error::invalid(format!("B must be positive, B = 0 at theta = {}", grid.theta()[i])));
        }
        let ratio: Vec<f64> = b.iter().zip(&a).map(|(b, a)| b / a).collect();
        let (north, south) = grid.pole_values(&ratio);
        // on coarse grids the pole extrapolation itself is only as good as the
        // unresolved Legendre tail of the ratio
        let c = grid.legendre_coefficients(&ratio, grid.len() - 1);
        let tol = POLE_REGULARITY_TOL + 10.0 * c[c.len() - 2..].iter().map(|c| c.abs()).sum::<f64>();
        if (north - 1.0).abs() > tol || (south - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "metric is singular at a pole: B/(A sin^2) -> {north} (north), {south} (south)"
            )));
        }
        Ok(Self { grid, a, b, conformal_factor: None, tag: tag.into() })
    }

    /// Round sphere of radius `c`.
    pub fn round(grid: Arc<ThetaGrid>, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {c}")));
        }
        let n = grid.len();
        let mut out = Self::from_reduced(grid, vec![c * c; n], vec![c * c; n], format!("round(c={c})"))?;
        out.conformal_factor = Some(vec![c; n]);
        Ok(out)
    }

    /// Induced metric of the spheroid `(a sin cos phi, a sin sin phi, b cos)`.
    pub fn spheroid(grid: Arc<ThetaGrid>, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("spheroid axes must be positive, got a={a}, b={b}")));
        }
        let aa = grid
            .cos_theta()
            .iter()
            .map(|x| a * a * x * x + b * b * (1.0 - x * x))
            .collect();
        let n = grid.len();
        Self::from_reduced(grid, aa, vec![a * a; n], format!("spheroid(a={a},b={b})"))
    }

    /// `F^2 (round)` from samples of `F > 0`.
    pub fn conformal(grid: Arc<ThetaGrid>, factor: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        grid.check_len(&factor)?;
        check_finite(&factor, "conformal factor")?;
        if let Some(i) = factor.iter().position(|v| *v <= 0.0) {
            return Err(Error::invalid(format!(
                "conformal factor must be positive, F = {} at theta = {}",
                factor[i],
                grid.theta()[i]
            )));
        }
        let sq: Vec<f64> = factor.iter().map(|f| f * f).collect();
        let mut out = Self::from_reduced(grid, sq.clone(), sq, tag)?;
        out.conformal_factor = Some(factor);
        Ok(out)
    }

    pub fn grid(&self) -> &Arc<ThetaGrid> {
        &self.grid
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// `B / sin^2(theta)`
    pub fn b_reduced(&self) -> &[f64] {
        &self.b
    }

    pub fn b(&self) -> Vec<f64> {
        self.b.iter().zip(self.grid.sin_theta()).map(|(b, s)| b * s * s).collect()
    }

    pub fn conformal_factor(&self) -> Option<&[f64]> {
        self.conformal_factor.as_deref()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Area density with respect to `sin(theta) dtheta dphi`: `sqrt(A b)`.
    pub fn area_density(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| (a * b).sqrt()).collect()
    }

    pub fn area(&self) -> f64 {
        self.grid.integrate_sphere(&self.area_density())
    }

    /// The same metric under `theta -> pi - theta`.
    pub fn reflected(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            a: ThetaGrid::reflect(&self.a),
            b: ThetaGrid::reflect(&self.b),
            conformal_factor: self.conformal_factor.as_deref().map(ThetaGrid::reflect),
            tag: format!("reflected {}", self.tag),
        }
    }
}

/// Gaussian curvature of `sigma`. Conformally round metrics use
/// `K = (1 - Lap log F)/F^2`; otherwise the orthogonal-coordinates formula in
/// `x = cos(theta)` is applied directly to `A` and `B`.
pub fn intrinsic_gauss_curvature(sigma: &AxisymMetric2) -> Result<Vec<f64>> {
    let g = &sigma.grid;
    let k = match &sigma.conformal_factor {
        Some(f) => {
            let log_f: Vec<f64> = f.iter().map(|f| f.ln()).collect();
            let lap = g.round_laplacian(&log_f);
            lap.iter().zip(f).map(|(l, f)| (1.0 - l) / (f * f)).collect::<Vec<_>>()
        }
        None => {
            // E = A/(1 - x^2), G = B, sqrt(E G) = sqrt(A b)
            let root: Vec<f64> = sigma.area_density();
            let bx = g.d_dx(&sigma.b());
            let q: Vec<f64> = bx.iter().zip(&root).map(|(b, r)| b / r).collect();
            let qx = g.d_dx(&q);
            qx.iter().zip(&root).map(|(q, r)| -q / (2.0 * r)).collect()
        }
    };
    check_finite(&k, "Gaussian curvature")?;
    Ok(k)
}

#[derive(Debug, Clone, Serialize)]
pub struct RevolutionEmbedding {
    #[serde(skip)]
    pub grid: Arc<ThetaGrid>,
    pub theta: Vec<f64>,
    pub rho: Vec<f64>,
    pub z: Vec<f64>,
    /// `d rho / dtheta`
    pub rho_prime: Vec<f64>,
    /// `dz/dtheta = sqrt(A - rho'^2)`
    pub zprime: Vec<f64>,
    #[serde(rename = "H0")]
    pub h0: Vec<f64>,
    /// Meridian curvature.
    pub kappa1: Vec<f64>,
    /// Parallel curvature.
    pub kappa2: Vec<f64>,
    pub k_emb: Vec<f64>,
}

/// Embed `sigma` as a surface of revolution about the z-axis, with `z = 0` at
/// the north pole and `z` increasing towards the south pole.
pub fn embed_axisym(sigma: &AxisymMetric2) -> Result<RevolutionEmbedding> {
    let g = sigma.grid.clone();
    let theta = g.theta();
    let k = intrinsic_gauss_curvature(sigma)?;
    if let Some(i) = k.iter().position(|k| *k <= 0.0) {
        return Err(Error::PositiveCurvatureViolation { theta: theta[i], curvature: k[i] });
    }
    let x = g.cos_theta();
    let s = g.sin_theta();
    let n = g.len();
    let beta: Vec<f64> = sigma.b.iter().map(|b| b.sqrt()).collect();
    let beta_x = g.d_dx(&beta);
    let sqrt_a: Vec<f64> = sigma.a.iter().map(|a| a.sqrt()).collect();
    let rho: Vec<f64> = (0..n).map(|i| s[i] * beta[i]).collect();
    let rho_prime: Vec<f64> = (0..n).map(|i| x[i] * beta[i] - (1.0 - x[i] * x[i]) * beta_x[i]).collect();
    // cos of the profile angle
    let c: Vec<f64> = (0..n).map(|i| rho_prime[i] / sqrt_a[i]).collect();
    if let Some(i) = c.iter().position(|c| !(c.abs() < 1.0)) {
        return Err(Error::NotRevolutionEmbeddable { theta: theta[i] });
    }
    // (1 - c^2) = sin^2(theta) r with r even
    let r: Vec<f64> = (0..n).map(|i| (1.0 - c[i] * c[i]) / (1.0 - x[i] * x[i])).collect();
    let sqrt_r: Vec<f64> = r.iter().map(|r| r.sqrt()).collect();
    let c_x = g.d_dx(&c);
    let kappa1: Vec<f64> = (0..n).map(|i| c_x[i] / (sqrt_a[i] * sqrt_r[i])).collect();
    let kappa2: Vec<f64> = (0..n).map(|i| sqrt_r[i] / beta[i]).collect();
    let zdens: Vec<f64> = (0..n).map(|i| sqrt_a[i] * sqrt_r[i]).collect();
    let z = g.integrate_from_north(&zdens, n - 1);
    let zprime: Vec<f64> = (0..n).map(|i| zdens[i] * s[i]).collect();
    let h0: Vec<f64> = kappa1.iter().zip(&kappa2).map(|(a, b)| a + b).collect();
    let k_emb: Vec<f64> = kappa1.iter().zip(&kappa2).map(|(a, b)| a * b).collect();
    check_finite(&h0, "embedding mean curvature")?;
    Ok(RevolutionEmbedding {
        theta: theta.to_vec(),
        grid: g,
        rho,
        z,
        rho_prime,
        zprime,
        h0,
        kappa1,
        kappa2,
        k_emb,
    })
}

impl RevolutionEmbedding {
    /// `int H0 dsigma` for the metric the embedding came from.
    pub fn total_mean_curvature(&self, sigma: &AxisymMetric2) -> f64 {
        let dens: Vec<f64> = self.h0.iter().zip(sigma.area_density()).map(|(h, d)| h * d).collect();
        self.grid.integrate_sphere(&dens)
    }

    /// Largest nodewise deviation of the metric induced by the sampled
    /// profile curve from `sigma`, relative to `A`.
    pub fn isometry_defect(&self, sigma: &AxisymMetric2) -> f64 {
        let g = &self.grid;
        let drho = g.d_theta_odd(&self.rho);
        let dz = g.d_theta(&self.z);
        let mut worst = 0.0_f64;
        for i in 0..g.len() {
            let a = sigma.a[i];
            let meridian = (drho[i] * drho[i] + dz[i] * dz[i] - a).abs() / a;
            let s = g.sin_theta()[i];
            let parallel = (self.rho[i] * self.rho[i] / (s * s) - sigma.b[i]).abs() / sigma.b[i];
            worst = worst.max(meridian).max(parallel);
        }
        worst
    }

    /// Write `theta, rho, z, H0, kappa1, kappa2` rows as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::invalid(format!("csv output: {e}"));
        w.write_record(["theta", "rho", "z", "H0", "kappa1", "kappa2"]).map_err(io)?;
        for i in 0..self.theta.len() {
            w.write_record(
                [self.theta[i], self.rho[i], self.z[i], self.h0[i], self.kappa1[i], self.kappa2[i]]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// `sup |2K - H0^2 + kappa1^2 + kappa2^2|` with the intrinsic `K` of `sigma`.
pub fn gauss_verify(emb: &RevolutionEmbedding, sigma: &AxisymMetric2) -> Result<f64> {
    sigma.grid.check_len(&emb.h0)?;
    let k = intrinsic_gauss_curvature(sigma)?;
    Ok((0..k.len())
        .map(|i| (2.0 * k[i] - emb.h0[i].powi(2) + emb.kappa1[i].powi(2) + emb.kappa2[i].powi(2)).abs())
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Linearized embedding on the round sphere

/// Axisymmetric symmetric 2-tensor on the unit sphere in coordinates
/// `(theta, phi)`.
#[derive(Debug, Clone)]
pub struct AxisymTensor2 {
    pub grid: Arc<ThetaGrid>,
    pub tt: Vec<f64>,
    pub pp: Vec<f64>,
    pub tp: Vec<f64>,
}

impl AxisymTensor2 {
    pub fn new(grid: Arc<ThetaGrid>, tt: Vec<f64>, pp: Vec<f64>, tp: Vec<f64>) -> Result<Self> {
        for c in [&tt, &pp, &tp] {
            grid.check_len(c)?;
            check_finite(c, "tensor component")?;
        }
        Ok(Self { grid, tt, pp, tp })
    }

    pub fn zero(grid: Arc<ThetaGrid>) -> Self {
        let n = grid.len();
        Self { grid, tt: vec![0.0; n], pp: vec![0.0; n], tp: vec![0.0; n] }
    }

    /// `2 (round metric)`, generated by the dilation `Y = X`.
    pub fn dilation(grid: Arc<ThetaGrid>) -> Self {
        let n = grid.len();
        let pp = grid.sin_theta().iter().map(|s| 2.0 * s * s).collect();
        Self { grid, tt: vec![2.0; n], pp, tp: vec![0.0; n] }
    }

    /// Deformation tensor of the differential rotation `v = sin(theta) omega(x)`
    /// about the axis, given `d omega / dx`.
    pub fn rotation(grid: Arc<ThetaGrid>, omega_x: impl Fn(f64) -> f64) -> Self {
        let n = grid.len();
        let tp = grid
            .cos_theta()
            .iter()
            .zip(grid.sin_theta())
            .map(|(x, s)| -s.powi(3) * omega_x(*x))
            .collect();
        Self { grid, tt: vec![0.0; n], pp: vec![0.0; n], tp }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let sc = |v: &[f64]| v.iter().map(|x| alpha * x).collect();
        Self { grid: self.grid.clone(), tt: sc(&self.tt), pp: sc(&self.pp), tp: sc(&self.tp) }
    }
}

/// Solution `Y = u e_theta + v e_phi + f n` of `2 dX . dY = h`.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizedSolution {
    #[serde(skip)]
    pub grid: Arc<ThetaGrid>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    /// Cartesian components in the half-plane `phi = 0`.
    pub cartesian: [Vec<f64>; 3],
    /// Point where `Y` vanishes, if pinned.
    pub pinned_theta: Option<f64>,
    pub residual: f64,
}

/// Solve the linearized isometric embedding equation about the unit sphere.
///
/// The translation along the axis is fixed by removing the degree-one
/// Legendre mode of the normal component and the rotation about the axis by
/// giving `v / sin(theta)` zero weighted mean. With this normalization
/// `h = 2 (round)` returns `Y = X` exactly. Use
/// [`LinearizedSolution::pinned_at_north_pole`] for the translate vanishing at
/// the north pole.
pub fn linearized_embedding_round(h: &AxisymTensor2) -> Result<LinearizedSolution> {
    let g = h.grid.clone();
    let n = g.len();
    let degree = n / 2;
    let x = g.cos_theta();
    let s = g.sin_theta();
    let one_m = |i: usize| 1.0 - x[i] * x[i];

    let w_x: Vec<f64> = (0..n).map(|i| -(h.tt[i] - h.pp[i] / one_m(i)) / (2.0 * one_m(i))).collect();
    let omega_x: Vec<f64> = (0..n).map(|i| -h.tp[i] / s[i].powi(3)).collect();
    check_finite(&w_x, "linearized source")?;
    check_finite(&omega_x, "linearized source")?;

    let mut w: Vec<f64> = g.integrate_from_north(&w_x, degree).iter().map(|v| -v).collect();
    let mut omega: Vec<f64> = g.integrate_from_north(&omega_x, degree).iter().map(|v| -v).collect();

    // f = h_pp/(2(1-x^2)) - w x; adding C to w shifts f by -C x
    let f0: Vec<f64> = (0..n).map(|i| h.pp[i] / (2.0 * one_m(i)) - w[i] * x[i]).collect();
    let p1 = g.legendre_coefficients(&f0, 1)[1];
    let shift = p1;
    for wi in w.iter_mut() {
        *wi += shift;
    }
    let f: Vec<f64> = (0..n).map(|i| f0[i] - shift * x[i]).collect();

    // zero mean of omega against (1 - x^2)
    let num: f64 = (0..n).map(|i| g.weights()[i] * omega[i] * one_m(i)).sum();
    let den: f64 = (0..n).map(|i| g.weights()[i] * one_m(i)).sum();
    let mean = num / den;
    for o in omega.iter_mut() {
        *o -= mean;
    }

    let u: Vec<f64> = (0..n).map(|i| s[i] * w[i]).collect();
    let v: Vec<f64> = (0..n).map(|i| s[i] * omega[i]).collect();
    if u.iter().chain(&v).chain(&f).any(|v| !v.is_finite()) {
        return Err(Error::LinearSolveFailure("non-finite solution samples".into()));
    }
    let cartesian = to_cartesian(&g, &u, &v, &f);
    let mut sol = LinearizedSolution { grid: g, u, v, f, cartesian, pinned_theta: None, residual: 0.0 };
    sol.residual = linearized_residual(&sol, h)?;
    Ok(sol)
}

fn to_cartesian(g: &ThetaGrid, u: &[f64], v: &[f64], f: &[f64]) -> [Vec<f64>; 3] {
    let (x, s) = (g.cos_theta(), g.sin_theta());
    let n = g.len();
    [
        (0..n).map(|i| u[i] * x[i] + f[i] * s[i]).collect(),
        v.to_vec(),
        (0..n).map(|i| -u[i] * s[i] + f[i] * x[i]).collect(),
    ]
}

/// `(e_theta . dY/dtheta, e_phi . dY/dtheta, e_theta . dY/dphi, e_phi . dY/dphi)`
/// of an axisymmetric vector field given by its Cartesian components at `phi = 0`.
fn frame_derivatives(g: &ThetaGrid, y: &[Vec<f64>; 3]) -> Vec<[f64; 4]> {
    let (x, s) = (g.cos_theta(), g.sin_theta());
    // x- and y-components are odd, the z-component even
    let dy = [g.d_theta_odd(&y[0]), g.d_theta_odd(&y[1]), g.d_theta(&y[2])];
    (0..g.len())
        .map(|i| {
            let e_theta = [x[i], 0.0, -s[i]];
            // d/dphi of a rotation-equivariant field is z-hat cross Y
            let dphi = [-y[1][i], y[0][i], 0.0];
            let dth = [dy[0][i], dy[1][i], dy[2][i]];
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            [dot(e_theta, dth), dth[1], dot(e_theta, dphi), dphi[1]]
        })
        .collect()
}

/// Largest orthonormal-frame component of `2 dX . dY - h`.
pub fn linearized_residual(sol: &LinearizedSolution, h: &AxisymTensor2) -> Result<f64> {
    let g = &sol.grid;
    g.check_len(&h.tt)?;
    let s = g.sin_theta();
    let d = frame_derivatives(g, &sol.cartesian);
    let mut worst = 0.0_f64;
    for i in 0..g.len() {
        let [t_t, p_t, t_p, p_p] = d[i];
        let tt = 2.0 * t_t - h.tt[i];
        let pp = (2.0 * s[i] * p_p - h.pp[i]) / (s[i] * s[i]);
        let tp = (t_p + s[i] * p_t - h.tp[i]) / s[i];
        worst = worst.max(tt.abs()).max(pp.abs()).max(tp.abs());
    }
    Ok(worst)
}

impl LinearizedSolution {
    /// Translate so that `Y` vanishes at the north pole.
    pub fn pinned_at_north_pole(&self) -> Self {
        let g = &self.grid;
        // at the pole only the z-component survives
        let z_n = g.interpolate(&self.cartesian[2], 1.0);
        let mut out = self.clone();
        out.cartesian[2].iter_mut().for_each(|v| *v -= z_n);
        // Y - z_n e_z in frame components: e_z = -sin e_theta + cos n
        for i in 0..g.len() {
            out.u[i] += z_n * g.sin_theta()[i];
            out.f[i] -= z_n * g.cos_theta()[i];
        }
        out.pinned_theta = Some(0.0);
        out
    }
}

/// Metric defect `sup |g(X + tY) - (round + t h)|` in the orthonormal frame.
pub fn metric_defect(sol: &LinearizedSolution, h: &AxisymTensor2, t: f64) -> f64 {
    let g = &sol.grid;
    let (x, s) = (g.cos_theta(), g.sin_theta());
    let n = g.len();
    let gx: [Vec<f64>; 3] = [
        (0..n).map(|i| s[i] + t * sol.cartesian[0][i]).collect(),
        (0..n).map(|i| t * sol.cartesian[1][i]).collect(),
        (0..n).map(|i| x[i] + t * sol.cartesian[2][i]).collect(),
    ];
    let dth = [g.d_theta_odd(&gx[0]), g.d_theta_odd(&gx[1]), g.d_theta(&gx[2])];
    let mut worst = 0.0_f64;
    for i in 0..n {
        let a = [dth[0][i], dth[1][i], dth[2][i]];
        let b = [-gx[1][i], gx[0][i], 0.0];
        let g_tt = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        let g_pp = b[0] * b[0] + b[1] * b[1];
        let g_tp = a[0] * b[0] + a[1] * b[1];
        let si2 = s[i] * s[i];
        let dtt = g_tt - 1.0 - t * h.tt[i];
        let dpp = (g_pp - si2 - t * h.pp[i]) / si2;
        let dtp = (g_tp - t * h.tp[i]) / s[i];
        worst = worst.max(dtt.abs()).max(dpp.abs()).max(dtp.abs());
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadraticCloseness {
    pub t_values: Vec<f64>,
    pub defects: Vec<f64>,
    pub slope: f64,
}

/// Log-log slope of the metric defect of `X + tY` against `t`.
pub fn quadratic_closeness_check(h: &AxisymTensor2, t_values: &[f64]) -> Result<QuadraticCloseness> {
    if t_values.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 t values, got {}", t_values.len())));
    }
    if t_values.iter().any(|t| !(*t > 0.0 && t.is_finite())) || t_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("t values must be positive and strictly decreasing"));
    }
    let sol = linearized_embedding_round(h)?;
    let defects: Vec<f64> = t_values.iter().map(|&t| metric_defect(&sol, h, t)).collect();
    if defects.iter().all(|d| *d < 1e-13) {
        return Err(Error::DegenerateMeasurement(format!(
            "metric defect below round-off for every t (max {:.3e})",
            defects.iter().fold(0.0_f64, |m, d| m.max(*d))
        )));
    }
    if defects.iter().any(|d| *d <= 0.0) {
        return Err(Error::DegenerateMeasurement("zero defect at some t".into()));
    }
    let pts: Vec<(f64, f64)> = t_values.iter().zip(&defects).map(|(t, d)| (t.ln(), d.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(QuadraticCloseness { t_values: t_values.to_vec(), defects, slope: sxy / sxx })
}

// ---------------------------------------------------------------------------
// First variation of the total mean curvature

/// One-parameter family of axisymmetric metrics with its `t`-derivative.
pub trait MetricFamily: Sync {
    fn metric(&self, grid: &Arc<ThetaGrid>, t: f64) -> Result<AxisymMetric2>;
    /// `(dA/dt, dB/dt)`
    fn velocity(&self, grid: &Arc<ThetaGrid>, t: f64) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Named families.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedFamily {
    /// Round spheres of radius `1 + t`.
    RoundDilation,
    /// Spheroids with `a = 1`, `b = 1 + t`.
    Spheroid,
    /// `(1 + t P2)^2 (round)`.
    ConformalP2,
}

impl MetricFamily for NamedFamily {
    fn metric(&self, grid: &Arc<ThetaGrid>, t: f64) -> Result<AxisymMetric2> {
        match self {
            NamedFamily::RoundDilation => AxisymMetric2::round(grid.clone(), 1.0 + t),
            NamedFamily::Spheroid => AxisymMetric2::spheroid(grid.clone(), 1.0, 1.0 + t),
            NamedFamily::ConformalP2 => {
                let f = grid.cos_theta().iter().map(|&x| 1.0 + t * legendre(2, x).0).collect();
                AxisymMetric2::conformal(grid.clone(), f, format!("conformal P2 t={t}"))
            }
        }
    }

    fn velocity(&self, grid: &Arc<ThetaGrid>, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = grid.cos_theta();
        let s2: Vec<f64> = grid.sin_theta().iter().map(|s| s * s).collect();
        let n = grid.len();
        Ok(match self {
            NamedFamily::RoundDilation => {
                let d = 2.0 * (1.0 + t);
                (vec![d; n], s2.iter().map(|s| d * s).collect())
            }
            NamedFamily::Spheroid => (s2.iter().map(|s| 2.0 * (1.0 + t) * s).collect(), vec![0.0; n]),
            NamedFamily::ConformalP2 => {
                let da: Vec<f64> = x
                    .iter()
                    .map(|&x| {
                        let p = legendre(2, x).0;
                        2.0 * (1.0 + t * p) * p
                    })
                    .collect();
                let db = da.iter().zip(&s2).map(|(a, s)| a * s).collect();
                (da, db)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WangYauCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_difference: f64,
}

/// Compare the finite-difference derivative of `int H0 dsigma_t` with
/// `1/2 int (H0 tr h - <A0, h>) dsigma` at `t0`, where `h = d sigma / dt`.
pub fn wangyau_derivative_check(
    family: &dyn MetricFamily,
    grid: &Arc<ThetaGrid>,
    t0: f64,
    step: f64,
) -> Result<WangYauCheck> {
    if !(step > 0.0 && step.is_finite() && t0.is_finite()) {
        return Err(Error::invalid(format!("need finite t0 and step > 0, got t0={t0}, step={step}")));
    }
    let total = |t: f64| -> Result<f64> {
        let sigma = family.metric(grid, t)?;
        Ok(embed_axisym(&sigma)?.total_mean_curvature(&sigma))
    };
    let lhs = central_richardson(total, t0, step)?;
    let sigma = family.metric(grid, t0)?;
    let emb = embed_axisym(&sigma)?;
    let (da, db) = family.velocity(grid, t0)?;
    let big_b = sigma.b();
    let dens = sigma.area_density();
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| (emb.kappa2[i] * da[i] / sigma.a[i] + emb.kappa1[i] * db[i] / big_b[i]) * dens[i])
        .collect();
    let rhs = 0.5 * 2.0 * PI * grid.integrate(&integrand);
    let relative_difference = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
    Ok(WangYauCheck { lhs, rhs, relative_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<ThetaGrid> {
        Arc::new(ThetaGrid::new(n).unwrap())
    }

    fn spheroid_h0(g: &ThetaGrid, a: f64, b: f64) -> Vec<f64> {
        g.cos_theta()
            .iter()
            .map(|x| {
                let aa = a * a * x * x + b * b * (1.0 - x * x);
                a * b / aa.powf(1.5) + b / (a * aa.sqrt())
            })
            .collect()
    }

    fn conformal_p2(g: &Arc<ThetaGrid>, eps: f64) -> AxisymMetric2 {
        let f = g.cos_theta().iter().map(|&x| 1.0 + eps * legendre(2, x).0).collect();
        AxisymMetric2::conformal(g.clone(), f, "p2").unwrap()
    }

    #[test]
    fn round_sphere_embedding() {
        let g = grid(32);
        let sigma = AxisymMetric2::round(g.clone(), 3.0).unwrap();
        let e = embed_axisym(&sigma).unwrap();
        for i in 0..32 {
            assert!((e.h0[i] - 2.0 / 3.0).abs() < 1e-12);
            assert!((e.kappa1[i] - 1.0 / 3.0).abs() < 1e-12);
            assert!((e.kappa2[i] - 1.0 / 3.0).abs() < 1e-12);
            // z = c (1 - cos theta)
            assert!((e.z[i] - 3.0 * (1.0 - g.cos_theta()[i])).abs() < 1e-12);
        }
        assert!(e.isometry_defect(&sigma) < 1e-12);
        assert!(gauss_verify(&e, &AxisymMetric2::round(g, 1.0).unwrap()).unwrap() > 1.0);
    }

    #[test]
    fn unit_round_gauss_defect() {
        let g = grid(32);
        let sigma = AxisymMetric2::round(g, 1.0).unwrap();
        let e = embed_axisym(&sigma).unwrap();
        assert!(gauss_verify(&e, &sigma).unwrap() <= 1e-12);
    }

    #[test]
    fn spheroid_matches_closed_form() {
        let g = grid(256);
        let sigma = AxisymMetric2::spheroid(g.clone(), 1.0, 1.2).unwrap();
        let e = embed_axisym(&sigma).unwrap();
        let oracle = spheroid_h0(&g, 1.0, 1.2);
        let err = e.h0.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(gauss_verify(&e, &sigma).unwrap() < 1e-6);
        assert!(e.isometry_defect(&sigma) < 1e-9);
        // rho = a sin, z = b (1 - cos)
        for i in 0..256 {
            assert!((e.z[i] - 1.2 * (1.0 - g.cos_theta()[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn spheroid_error_falls_fast_at_coarse_resolution() {
        let err = |n: usize| {
            let g = grid(n);
            let sigma = AxisymMetric2::spheroid(g.clone(), 1.0, 1.2).unwrap();
            let e = embed_axisym(&sigma).unwrap();
            let oracle = spheroid_h0(&g, 1.0, 1.2);
            e.h0.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        assert!(err(8) / err(16) >= 8.0, "{} {}", err(8), err(16));
    }

    #[test]
    fn intrinsic_curvature_examples() {
        let g = grid(64);
        let k = intrinsic_gauss_curvature(&AxisymMetric2::round(g.clone(), 2.0).unwrap()).unwrap();
        assert!(k.iter().all(|k| (k - 0.25).abs() < 1e-12));
        let c = AxisymMetric2::conformal(g.clone(), vec![1.7; 64], "const").unwrap();
        let k = intrinsic_gauss_curvature(&c).unwrap();
        assert!(k.iter().all(|k| (k - 1.0 / 2.89).abs() < 1e-12));
        let g128 = grid(128);
        let k = intrinsic_gauss_curvature(&conformal_p2(&g128, 0.2)).unwrap();
        assert!(k.iter().all(|k| *k > 0.0));
    }

    #[test]
    fn conformal_and_orthogonal_curvature_routes_agree() {
        let g = grid(96);
        let sigma = conformal_p2(&g, 0.1);
        let plain = AxisymMetric2::new(g.clone(), sigma.a().to_vec(), sigma.b(), "plain").unwrap();
        let k1 = intrinsic_gauss_curvature(&sigma).unwrap();
        let k2 = intrinsic_gauss_curvature(&plain).unwrap();
        let d = k1.iter().zip(&k2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn conformal_gauss_defect() {
        let g = grid(256);
        let sigma = conformal_p2(&g, 0.1);
        let e = embed_axisym(&sigma).unwrap();
        assert!(gauss_verify(&e, &sigma).unwrap() <= 1e-5);
    }

    #[test]
    fn negative_curvature_is_rejected() {
        let g = grid(64);
        let sigma = conformal_p2(&g, 0.9);
        assert!(intrinsic_gauss_curvature(&sigma).unwrap().iter().any(|k| *k < 0.0));
        assert!(matches!(embed_axisym(&sigma), Err(Error::PositiveCurvatureViolation { .. })));
    }

    #[test]
    fn pole_singular_metric_is_rejected() {
        let g = grid(32);
        let n = g.len();
        let r = AxisymMetric2::from_reduced(g.clone(), vec![1.0; n], vec![2.0; n], "cone");
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
        assert!(AxisymMetric2::new(g, vec![1.0; 31], vec![1.0; 32], "x").is_err());
    }

    #[test]
    fn reflection_symmetry_of_h0() {
        let g = grid(64);
        let f: Vec<f64> = g.cos_theta().iter().map(|&x| 1.0 + 0.1 * x + 0.05 * x * x).collect();
        let sigma = AxisymMetric2::conformal(g.clone(), f, "tilted").unwrap();
        let e = embed_axisym(&sigma).unwrap();
        let er = embed_axisym(&sigma.reflected()).unwrap();
        let back = ThetaGrid::reflect(&er.h0);
        let d = e.h0.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let g = grid(16);
        let e = embed_axisym(&AxisymMetric2::round(g, 1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta,rho,z,H0,kappa1,kappa2"));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn dilation_solution_is_the_position_vector() {
        let g = grid(64);
        let h = AxisymTensor2::dilation(g.clone());
        let sol = linearized_embedding_round(&h).unwrap();
        for i in 0..64 {
            assert!(sol.u[i].abs() < 1e-12 && sol.v[i].abs() < 1e-12);
            assert!((sol.f[i] - 1.0).abs() < 1e-12);
        }
        assert!(sol.residual < 1e-8);
        let pinned = sol.pinned_at_north_pole();
        // Y - Y(N) = X - e_z
        assert!(pinned.cartesian[2].iter().zip(g.cos_theta()).all(|(z, x)| (z - (x - 1.0)).abs() < 1e-12));
        assert!(linearized_residual(&pinned, &h).unwrap() < 1e-8);
    }

    #[test]
    fn zero_tensor_gives_zero_field() {
        let g = grid(32);
        let sol = linearized_embedding_round(&AxisymTensor2::zero(g)).unwrap();
        assert!(sol.u.iter().chain(&sol.v).chain(&sol.f).all(|v| *v == 0.0));
    }

    #[test]
    fn differential_rotation_is_recovered() {
        let g = grid(64);
        // omega = x^2 gives h_tp = -2 x sin^3
        let h = AxisymTensor2::rotation(g.clone(), |x| 2.0 * x);
        let sol = linearized_embedding_round(&h).unwrap();
        assert!(sol.residual <= 1e-8, "{}", sol.residual);
        for i in 0..64 {
            let (x, s) = (g.cos_theta()[i], g.sin_theta()[i]);
            assert!((sol.v[i] - s * (x * x - 0.2)).abs() < 1e-12);
            assert!(sol.u[i].abs() < 1e-12 && sol.f[i].abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_linear_in_h() {
        let g = grid(48);
        let h: AxisymTensor2 = {
            let x = g.cos_theta();
            let s = g.sin_theta();
            // deformation of a genuine field: w = x^3, omega = x, f = x^2
            let (n, mut tt, mut pp, mut tp) = (48, vec![0.0; 48], vec![0.0; 48], vec![0.0; 48]);
            for i in 0..n {
                let (x, s) = (x[i], s[i]);
                let w = x.powi(3);
                let w_x = 3.0 * x * x;
                let f = x * x;
                let u_t = x * w - s * s * w_x;
                tt[i] = 2.0 * (u_t + f);
                pp[i] = 2.0 * s * s * (w * x + f);
                tp[i] = -s.powi(3);
            }
            AxisymTensor2::new(g.clone(), tt, pp, tp).unwrap()
        };
        let r1 = linearized_embedding_round(&h).unwrap();
        let r2 = linearized_embedding_round(&h.scaled(2.0)).unwrap();
        for i in 0..48 {
            assert!((r2.f[i] - 2.0 * r1.f[i]).abs() < 1e-12);
        }
        assert!(r1.residual < 1e-8 && r2.residual < 2e-8);
    }

    #[test]
    fn quadratic_closeness_slopes() {
        let g = grid(64);
        let ts = [0.1, 0.05, 0.025, 0.0125];
        let q = quadratic_closeness_check(&AxisymTensor2::dilation(g.clone()), &ts).unwrap();
        assert!((q.slope - 2.0).abs() < 0.05, "{}", q.slope);
        // defect = t^2 (round) exactly
        for (t, d) in ts.iter().zip(&q.defects) {
            assert!((d - t * t).abs() < 1e-10);
        }
        let q = quadratic_closeness_check(&AxisymTensor2::rotation(g.clone(), |x| 2.0 * x), &ts).unwrap();
        assert!((q.slope - 2.0).abs() < 0.1, "{}", q.slope);
        assert!(matches!(
            quadratic_closeness_check(&AxisymTensor2::zero(g.clone()), &ts),
            Err(Error::DegenerateMeasurement(_))
        ));
        assert!(quadratic_closeness_check(&AxisymTensor2::dilation(g), &[0.1, 0.2, 0.05, 0.01]).is_err());
    }

    #[test]
    fn wangyau_round_dilation() {
        let g = grid(32);
        let c = wangyau_derivative_check(&NamedFamily::RoundDilation, &g, 0.0, 1e-3).unwrap();
        assert!((c.lhs - 8.0 * PI).abs() < 1e-9);
        assert!((c.rhs - 8.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn wangyau_spheroid_and_conformal() {
        let g = grid(256);
        let c = wangyau_derivative_check(&NamedFamily::Spheroid, &g, 0.0, 1e-3).unwrap();
        assert!(c.relative_difference <= 1e-4, "{c:?}");
        let c = wangyau_derivative_check(&NamedFamily::ConformalP2, &g, 0.05, 1e-3).unwrap();
        assert!(c.relative_difference <= 1e-4, "{c:?}");
    }

    #[test]
    fn family_velocities_match_finite_differences() {
        let g = grid(32);
        for fam in [NamedFamily::RoundDilation, NamedFamily::Spheroid, NamedFamily::ConformalP2] {
            let (da, db) = fam.velocity(&g, 0.1).unwrap();
            let (p, m) = (fam.metric(&g, 0.1 + 1e-6).unwrap(), fam.metric(&g, 0.1 - 1e-6).unwrap());
            let (bp, bm) = (p.b(), m.b());
            for i in 0..32 {
                assert!(((p.a()[i] - m.a()[i]) / 2e-6 - da[i]).abs() < 1e-7);
                assert!(((bp[i] - bm[i]) / 2e-6 - db[i]).abs() < 1e-7);
            }
        }
    }

    proptest! {
        #[test]
        fn spheroid_embedding_is_isometric(a in 0.7f64..1.5, b in 0.7f64..1.5) {
            let g = grid(64);
            let sigma = AxisymMetric2::spheroid(g.clone(), a, b).unwrap();
            let e = embed_axisym(&sigma).unwrap();
            prop_assert!(e.isometry_defect(&sigma) < 1e-9);
            prop_assert!(e.rho.iter().all(|r| *r > 0.0));
            for i in 0..64 {
                prop_assert!((e.h0[i] - e.kappa1[i] - e.kappa2[i]).abs() < 1e-14);
            }
        }
    }
}
