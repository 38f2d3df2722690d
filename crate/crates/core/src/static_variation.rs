//! The weighted boundary functional `F_phi(g) = int_{dOmega} H phi dsigma`,
//! the radial conformal-factor problem that projects a perturbed metric back
//! to constant scalar curvature, and the finite-difference criticality test.
//!
//! For `ghat = u^4 g(t)` in three dimensions, `R(ghat) = K` becomes
//! `8 Lap u - R(g(t)) u = -K u^5` with `u = 1` on the boundary, and the mean
//! curvature of the boundary is `H + 4 du/dnu`.
//!
//! The radial equation `8 (p u')' = q (R_t u - K u^5)`, `p = h^2/f`,
//! `q = f h^2`, is discretized by finite volumes on a uniform grid and solved
//! by damped Newton iteration with a tridiagonal Jacobian.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{central_richardson, central_richardson_second, gauss_legendre};
use crate::error::{Error, Result};
use crate::warped_ambient::{RadialBump, StaticPotential, WarpedMetric3};

pub type RadialPerturbation = RadialBump;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialDomain {
    /// `r <= r_b` about a smooth center.
    Ball { r_b: f64 },
    /// `r_in <= r <= r_b`, with Dirichlet data on both spheres.
    Shell { r_in: f64, r_b: f64 },
}

impl RadialDomain {
    pub fn inner(&self) -> f64 {
        match *self {
            RadialDomain::Ball { .. } => 0.0,
            RadialDomain::Shell { r_in, .. } => r_in,
        }
    }

    pub fn outer(&self) -> f64 {
        match *self {
            RadialDomain::Ball { r_b } | RadialDomain::Shell { r_b, .. } => r_b,
        }
    }

    fn validate(&self, g: &WarpedMetric3) -> Result<()> {
        let (a, b) = (self.inner(), self.outer());
        if !(b > a && a >= 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("bad radial domain [{a}, {b}]")));
        }
        match self {
            RadialDomain::Ball { .. } if !g.has_smooth_center() => Err(Error::UnsupportedMetric(format!(
                "{} has no smooth center; use a shell domain",
                g.label()
            ))),
            RadialDomain::Ball { .. } => g.check_radius(b),
            RadialDomain::Shell { .. } => {
                g.check_radius(a)?;
                g.check_radius(b)
            }
        }
    }
}

/// Boundary weight `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    Constant(f64),
    Potential(StaticPotential),
}

impl Weight {
    pub fn at(&self, r: f64) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Potential(p) => p.value(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub cells: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { cells: 4000, tolerance: 1e-10, max_iterations: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalSolve {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// `du/dnu` on the outer sphere.
    pub boundary_flux: f64,
    /// `du/dnu` on the inner sphere (outward normal `-d/dr`), for shells.
    pub inner_flux: Option<f64>,
    pub newton_iterations: usize,
    /// Largest Newton residual relative to the Jacobian diagonal.
    pub residual_norm: f64,
    /// `min R(g(t))` over the nodes.
    pub min_scalar_curvature: f64,
}

/// `4 pi h(r_b)^2 H(r_b) phi`.
pub fn functional_f_phi(g: &WarpedMetric3, r_b: f64, phi: f64) -> Result<f64> {
    let geo = g.sphere_geometry(r_b)?;
    Ok(geo.area * geo.mean_curvature * phi)
}

fn cell_integral(g: &WarpedMetric3, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> Result<f64> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let r = mid + half * x;
        let arc = g.arc(r)?;
        s += w * arc.f() * arc.h * arc.h;
    }
    Ok(s * half)
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::LinearSolveFailure("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::LinearSolveFailure(format!("bad pivot at row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

struct Discretization {
    dr: f64,
    r: Vec<f64>,
    /// `p` at cell faces `r_{i+1/2}`, `i = 0..N-1`.
    p_face: Vec<f64>,
    /// Control volumes (boundary entries are half cells).
    vol: Vec<f64>,
    q: Vec<f64>,
    h_sq: Vec<f64>,
    scalar: Vec<f64>,
    free_lo: usize,
    free_hi: usize,
}

impl Discretization {
    fn new(g: &WarpedMetric3, domain: RadialDomain, cells: usize) -> Result<Self> {
        let (a, b) = (domain.inner(), domain.outer());
        let n = cells;
        let dr = (b - a) / n as f64;
        let r: Vec<f64> = (0..=n).map(|i| a + dr * i as f64).collect();
        let (lo_admissible, _) = g.admissible();
        let (gx, gw) = gauss_legendre(4);
        let p_face = (0..n)
            .map(|i| {
                let arc = g.arc(a + dr * (i as f64 + 0.5))?;
                Ok(arc.h * arc.h / arc.f())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut q = vec![0.0; n + 1];
        let mut h_sq = vec![0.0; n + 1];
        let mut scalar = vec![0.0; n + 1];
        for i in 0..=n {
            let ri = if i == 0 && a == 0.0 { lo_admissible.max(0.25 * dr) } else { r[i] };
            let arc = g.arc(ri)?;
            if !(i == 0 && a == 0.0) {
                q[i] = arc.f() * arc.h * arc.h;
                h_sq[i] = arc.h * arc.h;
            }
            scalar[i] = g.scalar_curvature(ri)?;
        }
        let mut vol: Vec<f64> = q.iter().map(|q| q * dr).collect();
        vol[n] = 0.5 * dr * q[n];
        let free_lo = match domain {
            RadialDomain::Ball { .. } => {
                vol[0] = cell_integral(g, lo_admissible.min(0.5 * dr), 0.5 * dr, &gx, &gw)?;
                0
            }
            RadialDomain::Shell { .. } => {
                vol[0] = 0.5 * dr * q[0];
                1
            }
        };
        Ok(Self { dr, r, p_face, vol, q, h_sq, scalar, free_lo, free_hi: n - 1 })
    }

    fn source(&self, i: usize, u: f64, k: f64) -> (f64, f64) {
        (self.scalar[i] * u - k * u.powi(5), self.scalar[i] - 5.0 * k * u.powi(4))
    }

    /// Residuals and Jacobian rows for the free nodes.
    fn system(&self, u: &[f64], k: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.free_hi - self.free_lo + 1;
        let (mut res, mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for (row, i) in (self.free_lo..=self.free_hi).enumerate() {
            let right = 8.0 * self.p_face[i] / self.dr;
            let left = if i == 0 { 0.0 } else { 8.0 * self.p_face[i - 1] / self.dr };
            let (s, ds) = self.source(i, u[i], k);
            let flux_r = right * (u[i + 1] - u[i]);
            let flux_l = if i == 0 { 0.0 } else { left * (u[i] - u[i - 1]) };
            res[row] = flux_r - flux_l - self.vol[i] * s;
            diag[row] = -right - left - self.vol[i] * ds;
            lower[row] = left;
            upper[row] = right;
        }
        (res, lower, diag, upper)
    }

    fn scaled_norm(res: &[f64], diag: &[f64]) -> f64 {
        res.iter().zip(diag).map(|(r, d)| (r / d).abs()).fold(0.0, f64::max)
    }
}

/// Solve for the conformal factor taking `g_t` to constant scalar curvature
/// `k` with `u = 1` on the boundary.
pub fn conformal_bvp_solve(
    g_t: &WarpedMetric3,
    domain: RadialDomain,
    k: f64,
    opts: &SolverOptions,
) -> Result<ConformalSolve> {
    domain.validate(g_t)?;
    if opts.cells < 8 {
        return Err(Error::invalid(format!("need at least 8 cells, got {}", opts.cells)));
    }
    let disc = Discretization::new(g_t, domain, opts.cells)?;
    let n = opts.cells;
    let mut u = vec![1.0; n + 1];
    let (mut res, mut lower, mut diag, mut upper) = disc.system(&u, k);
    let mut norm = Discretization::scaled_norm(&res, &diag);
    let floor = 1e-3 * opts.tolerance;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = thomas(&lower, &diag, &upper, &rhs)?;
        let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut lambda = 1.0;
        let (trial, sys, trial_norm) = loop {
            let mut trial = u.clone();
            for (row, i) in (disc.free_lo..=disc.free_hi).enumerate() {
                trial[i] += lambda * delta[row];
            }
            let sys = disc.system(&trial, k);
            let trial_norm = Discretization::scaled_norm(&sys.0, &sys.2);
            if trial_norm <= norm.max(floor) {
                break (trial, sys, trial_norm);
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(Error::SolverFailure { iterations, residual: norm });
            }
        };
        if let Some(i) = trial.iter().position(|v| *v <= 0.0) {
            return Err(Error::MaximumPrincipleViolation { r: disc.r[i], u: trial[i] });
        }
        u = trial;
        (res, lower, diag, upper) = sys;
        norm = trial_norm;
        // quadratic convergence: once the full step is at roundoff, u is final
        if lambda == 1.0 && step <= 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailure { iterations, residual: norm });
    }
    if !(norm <= opts.tolerance) {
        return Err(Error::SolverFailure { iterations, residual: norm });
    }
    let (s_n, _) = disc.source(n, u[n], k);
    let pu_outer = disc.p_face[n - 1] * (u[n] - u[n - 1]) / disc.dr + 0.5 * disc.dr * disc.q[n] * s_n / 8.0;
    let boundary_flux = pu_outer / disc.h_sq[n];
    let inner_flux = match domain {
        RadialDomain::Ball { .. } => None,
        RadialDomain::Shell { .. } => {
            let (s_0, _) = disc.source(0, u[0], k);
            let pu_inner = disc.p_face[0] * (u[1] - u[0]) / disc.dr - 0.5 * disc.dr * disc.q[0] * s_0 / 8.0;
            Some(-pu_inner / disc.h_sq[0])
        }
    };
    let min_scalar_curvature = disc.scalar.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConformalSolve {
        r: disc.r,
        u,
        boundary_flux,
        inner_flux,
        newton_iterations: iterations,
        residual_norm: norm,
        min_scalar_curvature,
    })
}

/// Static background with its perturbation and weight.
#[derive(Debug, Clone)]
pub struct CriticalitySetup {
    pub metric: WarpedMetric3,
    pub domain: RadialDomain,
    pub weight: Weight,
    pub k_target: f64,
    pub perturbation: RadialPerturbation,
    pub options: SolverOptions,
}

impl CriticalitySetup {
    /// Setup with the static potential of `metric` as weight and its scalar
    /// curvature as target.
    pub fn for_static(
        metric: WarpedMetric3,
        domain: RadialDomain,
        perturbation: RadialPerturbation,
        options: SolverOptions,
    ) -> Result<Self> {
        let (pot, k) = metric
            .static_potential()
            .ok_or_else(|| Error::UnsupportedMetric(format!("{} has no static potential", metric.label())))?;
        Ok(Self { metric, domain, weight: Weight::Potential(pot), k_target: k, perturbation, options })
    }

    /// Volume of the domain, checked against the eigenvalue condition for
    /// positive `K` (volume below `2 pi` on the round sphere).
    pub fn check_eigenvalue_condition(&self) -> Result<()> {
        if self.k_target > 0.0 {
            let (a, b) = (self.domain.inner(), self.domain.outer());
            let (gx, gw) = gauss_legendre(32);
            let vol = 4.0 * PI * cell_integral(&self.metric, a.max(self.metric.admissible().0), b, &gx, &gw)?;
            if vol >= 2.0 * PI {
                return Err(Error::invalid(format!(
                    "domain volume {vol:.6} >= 2 pi; the first Dirichlet eigenvalue condition fails"
                )));
            }
        }
        Ok(())
    }

    /// `F_phi(ghat(t))` after projecting `g(t)` to constant scalar curvature.
    pub fn functional_at(&self, t: f64) -> Result<(f64, ConformalSolve)> {
        let g_t = self.metric.stretched(t, self.perturbation)?;
        let sol = conformal_bvp_solve(&g_t, self.domain, self.k_target, &self.options)?;
        let r_b = self.domain.outer();
        let geo = g_t.sphere_geometry(r_b)?;
        let mut f = geo.area * (geo.mean_curvature + 4.0 * sol.boundary_flux) * self.weight.at(r_b);
        if let (RadialDomain::Shell { r_in, .. }, Some(flux)) = (self.domain, sol.inner_flux) {
            let inner = g_t.sphere_geometry(r_in)?;
            f += inner.area * (-inner.mean_curvature + 4.0 * flux) * self.weight.at(r_in);
        }
        Ok((f, sol))
    }

    fn validate_perturbation(&self) -> Result<()> {
        let (a, b) = self.perturbation.support();
        if !(a > self.domain.inner() && b < self.domain.outer()) {
            return Err(Error::invalid(format!(
                "perturbation support [{a}, {b}] must lie inside ({}, {})",
                self.domain.inner(),
                self.domain.outer()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityRow {
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub boundary_flux: f64,
    pub min_scalar_curvature: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepEstimate {
    pub step: f64,
    pub d_f: f64,
    pub d2_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityReport {
    pub rows: Vec<CriticalityRow>,
    pub estimates: Vec<StepEstimate>,
    /// Estimate from the smallest step.
    pub d_f0: f64,
    pub d2_f0: f64,
    /// `1 / max |w|`, the `t` over which the perturbation is of order one.
    pub t_scale: f64,
    /// Whether the `F''` estimates of the two smallest steps agree to 1%.
    pub second_variation_resolved: bool,
    /// `|F'(0)| / (|F''(0)| t_scale)`; zero when `F'(0)` vanishes exactly and
    /// `None` when `F''(0)` is unresolved.
    pub normalized: Option<f64>,
}

/// Richardson-extrapolated derivatives of `t -> F_phi(ghat(t))` at `t = 0`
/// for each step in `steps`.
pub fn criticality_test(setup: &CriticalitySetup, steps: &[f64]) -> Result<CriticalityReport> {
    setup.validate_perturbation()?;
    setup.check_eigenvalue_condition()?;
    if steps.is_empty() || steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("steps must be a nonempty list of positive numbers"));
    }
    let mut ts = vec![0.0];
    for &h in steps {
        ts.extend([h, -h, 0.5 * h, -0.5 * h]);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let rows = ts
        .par_iter()
        .map(|&t| {
            let (f, sol) = setup.functional_at(t)?;
            Ok(CriticalityRow {
                t,
                f,
                boundary_flux: sol.boundary_flux,
                min_scalar_curvature: sol.min_scalar_curvature,
                newton_iterations: sol.newton_iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lookup = |t: f64| -> Result<f64> {
        rows.iter()
            .find(|row| row.t == t)
            .map(|row| row.f)
            .ok_or_else(|| Error::InternalConsistency(format!("missing sample t = {t}")))
    };
    let estimates = steps
        .iter()
        .map(|&h| {
            Ok(StepEstimate {
                step: h,
                d_f: central_richardson(lookup, 0.0, h)?,
                d2_f: central_richardson_second(lookup, 0.0, h)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = estimates
        .iter()
        .min_by(|a, b| a.step.total_cmp(&b.step))
        .ok_or_else(|| Error::InternalConsistency("no estimates".into()))?;
    let t_scale = 1.0 / setup.perturbation.amplitude.abs().max(f64::MIN_POSITIVE);
    let mut by_step: Vec<&StepEstimate> = estimates.iter().collect();
    by_step.sort_by(|a, b| a.step.total_cmp(&b.step));
    let second_variation_resolved = match by_step.as_slice() {
        [fine, coarse, ..] => fine.d2_f != 0.0 && (fine.d2_f - coarse.d2_f).abs() <= 1e-2 * fine.d2_f.abs(),
        _ => false,
    };
    let normalized = if best.d_f == 0.0 {
        Some(0.0)
    } else if second_variation_resolved {
        Some(best.d_f.abs() / (best.d2_f.abs() * t_scale))
    } else {
        None
    };
    Ok(CriticalityReport {
        d_f0: best.d_f,
        d2_f0: best.d2_f,
        t_scale,
        second_variation_resolved,
        normalized,
        rows,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> RadialBump {
        RadialBump::on_interval(0.25, 0.75, 1.0).unwrap()
    }

    fn opts(cells: usize) -> SolverOptions {
        SolverOptions { cells, ..SolverOptions::default() }
    }

    #[test]
    fn functional_examples() {
        assert!((functional_f_phi(&WarpedMetric3::flat(), 1.0, 1.0).unwrap() - 8.0 * PI).abs() < 1e-12);
        let v = functional_f_phi(&WarpedMetric3::hyperbolic(), 1.0, 1f64.cosh()).unwrap();
        assert!((v - 8.0 * PI * 1f64.sinh() * 1f64.cosh().powi(2)).abs() < 1e-12);
        let v = functional_f_phi(&WarpedMetric3::spherical(), PI / 2.0, (PI / 2.0).cos()).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn unperturbed_solve_is_trivial() {
        let sol = conformal_bvp_solve(&WarpedMetric3::flat(), RadialDomain::Ball { r_b: 1.0 }, 0.0, &opts(200)).unwrap();
        assert!(sol.u.iter().all(|u| (u - 1.0).abs() < 1e-12));
        assert!(sol.boundary_flux.abs() < 1e-12);
        let schw = WarpedMetric3::schwarzschild_isotropic(1.0).unwrap();
        let sol = conformal_bvp_solve(&schw, RadialDomain::Shell { r_in: 1.0, r_b: 3.0 }, 0.0, &opts(400)).unwrap();
        assert!(sol.u.iter().all(|u| (u - 1.0).abs() < 1e-12));
        for (g, k) in [(WarpedMetric3::hyperbolic(), -6.0), (WarpedMetric3::spherical(), 6.0)] {
            let sol = conformal_bvp_solve(&g, RadialDomain::Ball { r_b: 1.0 }, k, &opts(400)).unwrap();
            assert!(sol.u.iter().all(|u| (u - 1.0).abs() < 1e-10), "{}", g.label());
        }
    }

    #[test]
    fn linear_solve_converges_in_one_step() {
        let g = WarpedMetric3::flat().stretched(0.05, bump()).unwrap();
        let sol = conformal_bvp_solve(&g, RadialDomain::Ball { r_b: 1.0 }, 0.0, &opts(500)).unwrap();
        assert!(sol.newton_iterations <= 2);
        assert!(sol.residual_norm <= 1e-10);
    }

    #[test]
    fn flux_vanishes_on_the_flat_ball() {
        // R(t) changes sign over the bump; the projected ball is flat with the
        // same boundary sphere, so H(t) + 4 du/dnu = H forces a zero flux
        let g = WarpedMetric3::flat().stretched(0.01, bump()).unwrap();
        let sol = conformal_bvp_solve(&g, RadialDomain::Ball { r_b: 1.0 }, 0.0, &opts(2000)).unwrap();
        assert!(sol.min_scalar_curvature < 0.0);
        assert!(sol.boundary_flux.abs() < 1e-10, "{}", sol.boundary_flux);
    }

    #[test]
    fn flux_converges_under_refinement() {
        let g = WarpedMetric3::flat().stretched(0.01, bump()).unwrap();
        let d = RadialDomain::Ball { r_b: 1.0 };
        let a = conformal_bvp_solve(&g, d, 0.0, &opts(4000)).unwrap().boundary_flux;
        let b = conformal_bvp_solve(&g, d, 0.0, &opts(8000)).unwrap().boundary_flux;
        assert!((a - b).abs() <= 1e-8, "{a} {b}");
    }

    #[test]
    fn doubling_w_doubles_the_response() {
        let d = RadialDomain::Ball { r_b: 1.0 };
        let dev = |amp: f64| {
            let g = WarpedMetric3::flat().stretched(1e-3, bump().scaled(amp)).unwrap();
            let sol = conformal_bvp_solve(&g, d, 0.0, &opts(1000)).unwrap();
            sol.u.iter().map(|u| (u - 1.0).abs()).fold(0.0, f64::max)
        };
        let slope = (dev(2.0) / dev(1.0)).log2();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn positive_source_keeps_u_below_one() {
        // R = 6 >= K = 0 everywhere
        let g = WarpedMetric3::spherical();
        let sol = conformal_bvp_solve(&g, RadialDomain::Ball { r_b: 1.0 }, 0.0, &opts(400)).unwrap();
        assert!(sol.u.iter().all(|u| *u <= 1.0 + 1e-14));
        assert!(sol.boundary_flux > 0.0);
    }

    fn shell_bump() -> RadialBump {
        RadialBump::on_interval(0.6, 0.9, 1.0).unwrap()
    }

    fn shell() -> RadialDomain {
        RadialDomain::Shell { r_in: 0.5, r_b: 1.0 }
    }

    #[test]
    fn static_shells_are_critical() {
        let cases = [
            (WarpedMetric3::flat(), shell(), shell_bump()),
            (WarpedMetric3::hyperbolic(), shell(), shell_bump()),
            (WarpedMetric3::spherical(), shell(), shell_bump()),
            (
                WarpedMetric3::schwarzschild_isotropic(1.0).unwrap(),
                RadialDomain::Shell { r_in: 1.0, r_b: 3.0 },
                RadialBump::on_interval(1.5, 2.5, 1.0).unwrap(),
            ),
        ];
        for (g, domain, bump) in cases {
            let label = g.label();
            let setup = CriticalitySetup::for_static(g, domain, bump, opts(4000)).unwrap();
            let rep = criticality_test(&setup, &[0.04, 0.02]).unwrap();
            assert!(rep.second_variation_resolved, "{label}: {rep:?}");
            assert!(rep.normalized.unwrap() <= 1e-6, "{label}: {rep:?}");
        }
    }

    #[test]
    fn non_static_shell_is_not_critical() {
        let setup = CriticalitySetup {
            metric: WarpedMetric3::conformal_bump(0.1, 1.0).unwrap(),
            domain: shell(),
            weight: Weight::Constant(1.0),
            k_target: 0.0,
            perturbation: shell_bump(),
            options: opts(4000),
        };
        let rep = criticality_test(&setup, &[0.04, 0.02]).unwrap();
        assert!(rep.second_variation_resolved);
        assert!(rep.normalized.unwrap() >= 1e-1, "{rep:?}");
    }

    #[test]
    fn projected_functional_is_constant_on_symmetric_balls() {
        // a rotationally symmetric ball projects back to the space form ball
        // with the same boundary area, so F does not move with t
        let ambients = [
            (WarpedMetric3::flat(), Weight::Constant(1.0), 0.0),
            (WarpedMetric3::hyperbolic(), Weight::Potential(StaticPotential::Cosh), -6.0),
            (WarpedMetric3::conformal_bump(0.1, 1.0).unwrap(), Weight::Constant(1.0), 0.0),
        ];
        for (metric, weight, k_target) in ambients {
            let label = metric.label();
            let setup = CriticalitySetup {
                metric,
                domain: RadialDomain::Ball { r_b: 1.0 },
                weight,
                k_target,
                perturbation: bump(),
                options: opts(4000),
            };
            let (f0, _) = setup.functional_at(0.0).unwrap();
            let (f1, _) = setup.functional_at(0.1).unwrap();
            assert!((f1 - f0).abs() <= 1e-8 * f0.abs(), "{label}: {f0} {f1}");
            let rep = criticality_test(&setup, &[0.04, 0.02]).unwrap();
            assert!(!rep.second_variation_resolved || rep.d_f0 == 0.0, "{label}: {rep:?}");
        }
    }

    #[test]
    fn zero_perturbation_has_zero_derivative() {
        let setup = CriticalitySetup::for_static(
            WarpedMetric3::flat(),
            RadialDomain::Ball { r_b: 1.0 },
            bump().scaled(0.0),
            opts(400),
        )
        .unwrap();
        let rep = criticality_test(&setup, &[0.02]).unwrap();
        assert_eq!(rep.d_f0, 0.0);
        assert_eq!(rep.normalized, Some(0.0));
    }

    #[test]
    fn eigenvalue_condition_on_the_sphere() {
        let big = CriticalitySetup::for_static(
            WarpedMetric3::spherical(),
            RadialDomain::Ball { r_b: 1.5 },
            RadialBump::on_interval(0.3, 0.9, 1.0).unwrap(),
            opts(400),
        )
        .unwrap();
        assert!(big.check_eigenvalue_condition().is_err());
        let small = CriticalitySetup { domain: RadialDomain::Ball { r_b: 1.0 }, ..big };
        assert!(small.check_eigenvalue_condition().is_ok());
    }

    #[test]
    fn bad_inputs() {
        let g = WarpedMetric3::schwarzschild_isotropic(1.0).unwrap();
        assert!(matches!(
            conformal_bvp_solve(&g, RadialDomain::Ball { r_b: 2.0 }, 0.0, &opts(100)),
            Err(Error::UnsupportedMetric(_))
        ));
        let setup = CriticalitySetup::for_static(
            WarpedMetric3::flat(),
            RadialDomain::Ball { r_b: 0.5 },
            bump(),
            opts(100),
        )
        .unwrap();
        assert!(criticality_test(&setup, &[0.01]).is_err());
    }
}
