//! Grids, quadrature and differentiation on the polar interval and on radial
//! intervals.
//!
//! Axisymmetric fields on the sphere are sampled at Gauss-Legendre nodes in
//! `x = cos(theta)`. Nodes never touch the poles, and a field that is smooth on
//! the sphere falls into one of two parity classes:
//!
//! * *even* fields are smooth functions of `x` (metric coefficients `A`,
//!   curvatures, `cos(theta)`);
//! * *odd* fields have the form `sin(theta) * g(x)` with `g` smooth (the
//!   profile radius `rho`, the `x`-component of a rotation-equivariant map).
//!
//! Differentiating an odd field through the even-field operator loses spectral
//! accuracy, so both variants are provided.

use crate::error::{check_finite, Error, Result};

/// Smallest admissible polar grid.
pub const MIN_THETA_NODES: usize = 8;
/// Largest polar grid; dense operators are `n x n`.
pub const MAX_THETA_NODES: usize = 2048;

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(+-1) = (+-1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes on [-1, 1] in descending order, with weights.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1e-3) {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Polar grid: Gauss-Legendre nodes in `x = cos(theta)`, ordered by increasing
/// `theta`, with quadrature weights for `int_0^pi f sin(theta) dtheta`.
#[derive(Debug, Clone)]
pub struct ThetaGrid {
    x: Vec<f64>,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    /// Row-major `n x n` differentiation matrix in `x`.
    dx: Vec<f64>,
}

impl ThetaGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_THETA_NODES {
            return Err(Error::invalid(format!(
                "theta grid needs at least {MIN_THETA_NODES} nodes, got {n}"
            )));
        }
        if n > MAX_THETA_NODES {
            return Err(Error::invalid(format!(
                "theta grid limited to {MAX_THETA_NODES} nodes, got {n}"
            )));
        }
        let (x, weights) = gauss_legendre(n);
        let theta: Vec<f64> = x.iter().map(|x| x.acos()).collect();
        let sin_theta: Vec<f64> = x.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * ((1.0 - x[j] * x[j]) * weights[j]).sqrt()
            })
            .collect();
        let mut dx = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = bary[j] / bary[i] / (x[i] - x[j]);
                    dx[i * n + j] = d;
                    diag -= d;
                }
            }
            dx[i * n + i] = diag;
        }
        Ok(Self { x, theta, sin_theta, weights, bary, dx })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.x
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), found: field.len() });
        }
        Ok(())
    }

    /// `int_0^pi f(theta) sin(theta) dtheta`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        debug_assert_eq!(field.len(), self.len());
        field.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Integral over the unit sphere of an axisymmetric density, `2 pi int f sin dtheta`.
    pub fn integrate_sphere(&self, field: &[f64]) -> f64 {
        2.0 * std::f64::consts::PI * self.integrate(field)
    }

    /// Derivative with respect to `x = cos(theta)`.
    pub fn d_dx(&self, field: &[f64]) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(field.len(), n);
        (0..n)
            .map(|i| {
                let row = &self.dx[i * n..(i + 1) * n];
                row.iter().zip(field).map(|(d, f)| d * f).sum()
            })
            .collect()
    }

    /// `d/dtheta` of an even field; the result is odd.
    pub fn d_theta(&self, field: &[f64]) -> Vec<f64> {
        let fx = self.d_dx(field);
        fx.iter().zip(&self.sin_theta).map(|(fx, s)| -s * fx).collect()
    }

    /// `d^2/dtheta^2` of an even field.
    pub fn d2_theta(&self, field: &[f64]) -> Vec<f64> {
        let fx = self.d_dx(field);
        let fxx = self.d_dx(&fx);
        (0..self.len())
            .map(|i| {
                let x = self.x[i];
                -x * fx[i] + (1.0 - x * x) * fxx[i]
            })
            .collect()
    }

    /// `d/dtheta` of an odd field `sin(theta) * g(x)`; the result is even.
    pub fn d_theta_odd(&self, field: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = field.iter().zip(&self.sin_theta).map(|(f, s)| f / s).collect();
        let gx = self.d_dx(&g);
        (0..self.len())
            .map(|i| {
                let x = self.x[i];
                x * g[i] - (1.0 - x * x) * gx[i]
            })
            .collect()
    }

    /// Axisymmetric round-sphere Laplacian `d/dx((1 - x^2) df/dx)`.
    pub fn round_laplacian(&self, field: &[f64]) -> Vec<f64> {
        let fx = self.d_dx(field);
        let fxx = self.d_dx(&fx);
        (0..self.len())
            .map(|i| {
                let x = self.x[i];
                (1.0 - x * x) * fxx[i] - 2.0 * x * fx[i]
            })
            .collect()
    }

    /// Barycentric evaluation of the interpolant of an even field at `x`.
    pub fn interpolate(&self, field: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((xj, fj), lj) in self.x.iter().zip(field).zip(&self.bary) {
            let d = x - xj;
            if d == 0.0 {
                return *fj;
            }
            let c = lj / d;
            num += c * fj;
            den += c;
        }
        num / den
    }

    /// Values of an even field extrapolated to the north (`x = 1`) and south
    /// (`x = -1`) poles.
    pub fn pole_values(&self, field: &[f64]) -> (f64, f64) {
        (self.interpolate(field, 1.0), self.interpolate(field, -1.0))
    }

    /// Legendre coefficients `c_k`, `k <= max_degree`, of an even field.
    pub fn legendre_coefficients(&self, field: &[f64], max_degree: usize) -> Vec<f64> {
        let deg = max_degree.min(self.len() - 1);
        let mut coeffs = vec![0.0; deg + 1];
        for ((x, f), w) in self.x.iter().zip(field).zip(&self.weights) {
            let (mut p0, mut p1) = (1.0, *x);
            coeffs[0] += w * f;
            if deg >= 1 {
                coeffs[1] += w * f * p1;
            }
            for k in 2..=deg {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                coeffs[k] += w * f * p2;
                p0 = p1;
                p1 = p2;
            }
        }
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= (2.0 * k as f64 + 1.0) / 2.0;
        }
        coeffs
    }

    /// Evaluate a Legendre series at the grid nodes.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.x.iter().map(|&x| legendre_series(coeffs, x)).collect()
    }

    /// `int_x^1 f(x') dx'` at every node, from the Legendre series of `f`
    /// truncated at `max_degree`. Equals `int_0^theta f sin dtheta`.
    pub fn integrate_from_north(&self, field: &[f64], max_degree: usize) -> Vec<f64> {
        let c = self.legendre_coefficients(field, max_degree);
        // antiderivative G with G(-1) = 0
        let mut g = vec![0.0; c.len() + 1];
        g[0] += c[0];
        g[1] += c[0];
        for (k, ck) in c.iter().enumerate().skip(1) {
            let s = ck / (2.0 * k as f64 + 1.0);
            g[k + 1] += s;
            g[k - 1] -= s;
        }
        let top = legendre_series(&g, 1.0);
        self.x.iter().map(|&x| top - legendre_series(&g, x)).collect()
    }

    /// Reverse a field under `theta -> pi - theta`.
    pub fn reflect(field: &[f64]) -> Vec<f64> {
        field.iter().rev().copied().collect()
    }
}

/// Sum of `c_k P_k(x)` by Clenshaw recurrence.
pub fn legendre_series(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for k in (0..coeffs.len()).rev() {
        let kf = k as f64;
        let alpha = (2.0 * kf + 1.0) / (kf + 1.0) * x;
        let beta = (kf + 1.0) / (kf + 2.0);
        let b0 = coeffs[k] + alpha * b1 - beta * b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// Derivative of an even field sampled on `grid`.
pub fn differentiate(field: &[f64], grid: &ThetaGrid, order: u8) -> Result<Vec<f64>> {
    grid.check_len(field)?;
    match order {
        1 => Ok(grid.d_theta(field)),
        2 => Ok(grid.d2_theta(field)),
        _ => Err(Error::invalid(format!("derivative order must be 1 or 2, got {order}"))),
    }
}

// ---------------------------------------------------------------------------
// Radial quadrature

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelSpacing {
    Linear,
    Logarithmic,
}

/// Model for extrapolating a radial integral beyond `r_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// Integrand behaves like `c r^p` with a prescribed exponent.
    PowerLaw { exponent: f64 },
    /// Exponent and amplitude fitted to the last decade of samples.
    Fitted,
}

/// Largest admissible tail exponent.
pub const MAX_TAIL_EXPONENT: f64 = -2.0;
const FIT_EXPONENT_SLACK: f64 = 1e-6;

/// Composite Gauss-Legendre rule on `[r_min, r_max]`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
    tail: Option<TailModel>,
}

impl RadialGrid {
    pub fn new(
        r_min: f64,
        r_max: f64,
        panels: usize,
        order: usize,
        spacing: PanelSpacing,
    ) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite()) || r_min < 0.0 || r_max <= r_min {
            return Err(Error::invalid(format!("bad radial interval [{r_min}, {r_max}]")));
        }
        if panels == 0 || order < 2 {
            return Err(Error::invalid("radial grid needs >= 1 panel of order >= 2"));
        }
        if spacing == PanelSpacing::Logarithmic && r_min <= 0.0 {
            return Err(Error::invalid("logarithmic panels need r_min > 0"));
        }
        let edges: Vec<f64> = (0..=panels)
            .map(|k| {
                let s = k as f64 / panels as f64;
                match spacing {
                    PanelSpacing::Linear => r_min + s * (r_max - r_min),
                    PanelSpacing::Logarithmic => r_min * (r_max / r_min).powf(s),
                }
            })
            .collect();
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            // gx descends; push ascending
            for (x, w) in gx.iter().rev().zip(gw.iter().rev()) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Ok(Self { r_min, r_max, nodes, weights, order, tail: None })
    }

    pub fn with_tail(mut self, tail: TailModel) -> Result<Self> {
        if let TailModel::PowerLaw { exponent } = tail {
            if !(exponent <= MAX_TAIL_EXPONENT) {
                return Err(Error::invalid(format!(
                    "tail exponent {exponent} must be <= {MAX_TAIL_EXPONENT}"
                )));
            }
        }
        self.tail = Some(tail);
        Ok(self)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail(&self) -> Option<TailModel> {
        self.tail
    }

    /// Sample `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RadialIntegral {
    pub finite: f64,
    pub tail: f64,
    pub error_estimate: f64,
    pub tail_exponent: Option<f64>,
}

impl RadialIntegral {
    pub fn total(&self) -> f64 {
        self.finite + self.tail
    }
}

/// Quadrature of radial samples, plus the tail contribution when the grid
/// carries a tail model.
pub fn integrate_radial(integrand: &[f64], grid: &RadialGrid) -> Result<RadialIntegral> {
    if integrand.len() != grid.nodes.len() {
        return Err(Error::GridMismatch { expected: grid.nodes.len(), found: integrand.len() });
    }
    check_finite(integrand, "radial integrand")?;
    let finite: f64 = integrand.iter().zip(&grid.weights).map(|(f, w)| f * w).sum();

    // per-panel truncation estimate from the two highest Legendre modes
    let q = grid.order;
    let (gx, gw) = gauss_legendre(q);
    let mut quad_err = 0.0;
    for (panel, w) in integrand.chunks(q).zip(grid.weights.chunks(q)) {
        let len: f64 = w.iter().sum();
        let mut top = 0.0;
        for k in [q - 2, q - 1] {
            let c: f64 = panel
                .iter()
                .zip(gx.iter().rev().zip(gw.iter().rev()))
                .map(|(f, (x, w))| f * w * legendre(k, *x).0)
                .sum::<f64>()
                * (2.0 * k as f64 + 1.0)
                / 2.0;
            top += c.abs();
        }
        quad_err += len * top;
    }
    let quad_err = quad_err + 1e-15 * integrand.iter().zip(&grid.weights).map(|(f, w)| (f * w).abs()).sum::<f64>();

    let (tail, tail_err, exponent) = match grid.tail {
        None => (0.0, 0.0, None),
        Some(model) => tail_estimate(integrand, grid, model)?,
    };
    Ok(RadialIntegral { finite, tail, error_estimate: quad_err + tail_err, tail_exponent: exponent })
}

fn tail_estimate(
    integrand: &[f64],
    grid: &RadialGrid,
    model: TailModel,
) -> Result<(f64, f64, Option<f64>)> {
    let r_max = grid.r_max;
    let n = grid.nodes.len();
    let (r_last, f_last) = (grid.nodes[n - 1], integrand[n - 1]);
    let power_tail = |c: f64, p: f64| -c * r_max.powf(p + 1.0) / (p + 1.0);
    match model {
        TailModel::PowerLaw { exponent } => {
            let c = f_last / r_last.powf(exponent);
            let tail = power_tail(c, exponent);
            // compare with the amplitude implied by the second-to-last node
            let c2 = integrand[n - 2] / grid.nodes[n - 2].powf(exponent);
            Ok((tail, (power_tail(c2, exponent) - tail).abs(), Some(exponent)))
        }
        TailModel::Fitted => {
            let lo = (r_max / 10.0).max(grid.r_min);
            let mut start = grid.nodes.iter().position(|&r| r >= lo).unwrap_or(0);
            if n - start < 4 {
                start = n.saturating_sub(4);
            }
            let window = &integrand[start..];
            let scale = integrand.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
            let window_max = window.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
            let sign = window[0].signum();
            let coherent = window.iter().all(|f| *f != 0.0 && f.signum() == sign);
            if !coherent || window_max <= 1e-13 * scale {
                // nothing left to extrapolate
                return Ok((0.0, window_max * r_max, None));
            }
            let pts: Vec<(f64, f64)> = grid.nodes[start..]
                .iter()
                .zip(window)
                .map(|(r, f)| (r.ln(), f.abs().ln()))
                .collect();
            let m = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let p = sxy / sxx;
            let log_c = my - p * mx;
            let rms = (pts.iter().map(|q| (q.1 - log_c - p * q.0).powi(2)).sum::<f64>() / m).sqrt();
            if rms > 0.05 {
                return Ok((0.0, window_max * r_max, None));
            }
            if p > MAX_TAIL_EXPONENT + FIT_EXPONENT_SLACK {
                return Err(Error::domain(format!(
                    "fitted tail exponent {p:.6} exceeds {MAX_TAIL_EXPONENT}; integrand decays too slowly"
                )));
            }
            let c = sign * log_c.exp();
            let tail = power_tail(c, p);
            let c_last = f_last / r_last.powf(p);
            let err = (power_tail(c_last, p) - tail).abs() + tail.abs() * rms;
            Ok((tail, err, Some(p)))
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences

/// Centered difference with one Richardson level:
/// `(4 D(step/2) - D(step)) / 3`, accurate to `O(step^4)`.
pub fn central_richardson<E>(
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
    x: f64,
    step: f64,
) -> std::result::Result<f64, E> {
    let d_full = (f(x + step)? - f(x - step)?) / (2.0 * step);
    let d_half = (f(x + 0.5 * step)? - f(x - 0.5 * step)?) / step;
    Ok((4.0 * d_half - d_full) / 3.0)
}

/// Second centered difference with one Richardson level.
pub fn central_richardson_second<E>(
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
    x: f64,
    step: f64,
) -> std::result::Result<f64, E> {
    let f0 = f(x)?;
    let d_full = (f(x + step)? - 2.0 * f0 + f(x - step)?) / (step * step);
    let h = 0.5 * step;
    let d_half = (f(x + h)? - 2.0 * f0 + f(x - h)?) / (h * h);
    Ok((4.0 * d_half - d_full) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p2(x: f64) -> f64 {
        0.5 * (3.0 * x * x - 1.0)
    }

    #[test]
    fn grid_integrates_solid_angle_factor() {
        for n in [8, 32, 129, 512] {
            let g = ThetaGrid::new(n).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn grid_integrates_cos_squared() {
        let g = ThetaGrid::new(32).unwrap();
        let f: Vec<f64> = g.cos_theta().iter().map(|x| x * x).collect();
        assert!((g.integrate(&f) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn grid_size_bounds() {
        assert!(ThetaGrid::new(8).is_ok());
        assert!(matches!(ThetaGrid::new(4), Err(Error::InvalidParameter(_))));
        assert!(matches!(ThetaGrid::new(4096), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn nodes_stay_off_the_poles() {
        let g = ThetaGrid::new(64).unwrap();
        assert!(g.theta().windows(2).all(|w| w[0] < w[1]));
        assert!(g.theta()[0] > 0.0 && g.theta()[63] < std::f64::consts::PI);
    }

    #[test]
    fn derivative_of_cos_is_minus_sin() {
        let g = ThetaGrid::new(32).unwrap();
        let f = g.cos_theta().to_vec();
        let d = differentiate(&f, &g, 1).unwrap();
        for (d, s) in d.iter().zip(g.sin_theta()) {
            assert!((d + s).abs() < 1e-10);
        }
    }

    #[test]
    fn derivatives_of_constant_vanish() {
        let g = ThetaGrid::new(32).unwrap();
        let f = vec![3.7; 32];
        for order in [1, 2] {
            let d = differentiate(&f, &g, order).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-12), "order {order}");
        }
    }

    #[test]
    fn derivative_of_p2() {
        let g = ThetaGrid::new(32).unwrap();
        let f: Vec<f64> = g.cos_theta().iter().map(|&x| p2(x)).collect();
        let d = differentiate(&f, &g, 1).unwrap();
        for i in 0..32 {
            let (x, s) = (g.cos_theta()[i], g.sin_theta()[i]);
            assert!((d[i] + 3.0 * s * x).abs() < 1e-9);
        }
    }

    #[test]
    fn second_derivative_of_cos() {
        let g = ThetaGrid::new(40).unwrap();
        let f = g.cos_theta().to_vec();
        let d = differentiate(&f, &g, 2).unwrap();
        for (d, x) in d.iter().zip(g.cos_theta()) {
            assert!((d + x).abs() < 1e-10);
        }
    }

    #[test]
    fn differentiate_rejects_wrong_length_and_order() {
        let g = ThetaGrid::new(16).unwrap();
        assert!(matches!(
            differentiate(&[1.0; 15], &g, 1),
            Err(Error::GridMismatch { expected: 16, found: 15 })
        ));
        assert!(differentiate(&[1.0; 16], &g, 3).is_err());
    }

    #[test]
    fn odd_derivative_of_sin_times_polynomial() {
        let g = ThetaGrid::new(48).unwrap();
        // f = sin(theta) cos^2(theta), f' = cos^3 - 2 sin^2 cos
        let f: Vec<f64> = (0..48).map(|i| g.sin_theta()[i] * g.cos_theta()[i].powi(2)).collect();
        let d = g.d_theta_odd(&f);
        for i in 0..48 {
            let (x, s) = (g.cos_theta()[i], g.sin_theta()[i]);
            assert!((d[i] - (x.powi(3) - 2.0 * s * s * x)).abs() < 1e-11);
        }
    }

    #[test]
    fn pole_extrapolation_and_interpolation() {
        let g = ThetaGrid::new(24).unwrap();
        let f: Vec<f64> = g.cos_theta().iter().map(|&x| 1.0 + x + p2(x)).collect();
        let (north, south) = g.pole_values(&f);
        assert!((north - 3.0).abs() < 1e-12);
        assert!((south - 1.0).abs() < 1e-12);
        assert!((g.interpolate(&f, 0.3) - (1.3 + p2(0.3))).abs() < 1e-12);
    }

    #[test]
    fn legendre_roundtrip_and_antiderivative() {
        let g = ThetaGrid::new(32).unwrap();
        let f: Vec<f64> = g.cos_theta().iter().map(|&x| 2.0 - x + 0.5 * p2(x)).collect();
        let c = g.legendre_coefficients(&f, 31);
        assert!((c[0] - 2.0).abs() < 1e-13 && (c[1] + 1.0).abs() < 1e-13 && (c[2] - 0.5).abs() < 1e-13);
        assert!(c[3..].iter().all(|c| c.abs() < 1e-13));
        let back = g.synthesize(&c);
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-13));
        // int_x^1 (3 x^2) dx = 1 - x^3
        let f: Vec<f64> = g.cos_theta().iter().map(|&x| 3.0 * x * x).collect();
        let anti = g.integrate_from_north(&f, 16);
        for (a, x) in anti.iter().zip(g.cos_theta()) {
            assert!((a - (1.0 - x.powi(3))).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_error_falls_under_doubling() {
        // smooth but not polynomial: exp(x)
        let exact = 1f64.exp() - (-1f64).exp();
        let err = |n: usize| {
            let g = ThetaGrid::new(n).unwrap();
            let f: Vec<f64> = g.cos_theta().iter().map(|x| x.exp()).collect();
            (g.integrate(&f) - exact).abs()
        };
        // spectral: by n = 8 the error is already near round-off, so compare
        // a radial rule where the error is algebraic in the panel count
        assert!(err(8) < 1e-12);
        let radial_err = |panels: usize| {
            let g = RadialGrid::new(1.0, 2.0, panels, 2, PanelSpacing::Linear).unwrap();
            let f = g.sample(|r| r.ln());
            let exact = 2.0 * 2f64.ln() - 1.0;
            (integrate_radial(&f, &g).unwrap().total() - exact).abs()
        };
        for p in [2, 4, 8] {
            assert!(radial_err(p) / radial_err(2 * p) >= 4.0);
        }
    }

    #[test]
    fn radial_power_law_with_tail() {
        let g = RadialGrid::new(1.0, 100.0, 24, 12, PanelSpacing::Logarithmic)
            .unwrap()
            .with_tail(TailModel::PowerLaw { exponent: -4.0 })
            .unwrap();
        let f = g.sample(|r| r.powi(-4));
        let res = integrate_radial(&f, &g).unwrap();
        assert!((res.total() - 1.0 / 3.0).abs() < 1e-6);
        assert!(res.tail > 0.0);
    }

    #[test]
    fn radial_fitted_tail_recovers_exponent() {
        let g = RadialGrid::new(5.0, 1e4, 40, 12, PanelSpacing::Logarithmic)
            .unwrap()
            .with_tail(TailModel::Fitted)
            .unwrap();
        let f = g.sample(|r| -3.0 * r.powi(-2));
        let res = integrate_radial(&f, &g).unwrap();
        assert!((res.tail_exponent.unwrap() + 2.0).abs() < 1e-9);
        assert!((res.total() + 3.0 / 5.0).abs() < 1e-10);
    }

    #[test]
    fn fitted_tail_rejects_slow_decay() {
        let g = RadialGrid::new(1.0, 1e3, 20, 8, PanelSpacing::Logarithmic)
            .unwrap()
            .with_tail(TailModel::Fitted)
            .unwrap();
        let f = g.sample(|r| r.powf(-1.5));
        assert!(matches!(integrate_radial(&f, &g), Err(Error::NumericalDomain(_))));
    }

    #[test]
    fn radial_zero_and_finite_interval() {
        let g = RadialGrid::new(1.0, 10.0, 8, 10, PanelSpacing::Linear).unwrap();
        let zero = vec![0.0; g.nodes().len()];
        let res = integrate_radial(&zero, &g).unwrap();
        assert_eq!(res.total(), 0.0);
        let f = g.sample(|r| r.powi(-2));
        assert!((integrate_radial(&f, &g).unwrap().total() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn radial_rejects_non_finite() {
        let g = RadialGrid::new(1.0, 2.0, 1, 4, PanelSpacing::Linear).unwrap();
        assert!(matches!(
            integrate_radial(&[1.0, f64::NAN, 1.0, 1.0], &g),
            Err(Error::NumericalDomain(_))
        ));
        assert!(RadialGrid::new(1.0, 2.0, 1, 4, PanelSpacing::Linear)
            .unwrap()
            .with_tail(TailModel::PowerLaw { exponent: -1.5 })
            .is_err());
    }

    #[test]
    fn richardson_is_fourth_order() {
        let d = central_richardson(|x: f64| Ok::<_, ()>(x.sin()), 0.7, 1e-2).unwrap();
        assert!((d - 0.7f64.cos()).abs() < 1e-10);
        let d2 = central_richardson_second(|x: f64| Ok::<_, ()>(x.exp()), 0.3, 1e-2).unwrap();
        assert!((d2 - 0.3f64.exp()).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn differentiation_and_quadrature_are_linear(
            a in prop::collection::vec(-1.0f64..1.0, 24),
            b in prop::collection::vec(-1.0f64..1.0, 24),
            alpha in -3.0f64..3.0,
        ) {
            let g = ThetaGrid::new(24).unwrap();
            let combo: Vec<f64> = a.iter().zip(&b).map(|(a, b)| alpha * a + b).collect();
            let (da, db, dc) = (g.d_theta(&a), g.d_theta(&b), g.d_theta(&combo));
            for i in 0..24 {
                prop_assert!((dc[i] - (alpha * da[i] + db[i])).abs() < 1e-10);
            }
            let lhs = g.integrate(&combo);
            let rhs = alpha * g.integrate(&a) + g.integrate(&b);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
