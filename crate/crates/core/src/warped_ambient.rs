//! Warped-product ambient metrics `g = f(r)^2 dr^2 + h(r)^2 (round)`.
//!
//! Profiles are closed-form and evaluated on second-order dual numbers, so
//! every curvature quantity uses exact first and second derivatives.

use std::f64::consts::PI;

use num_dual::{Dual2_64, DualNum};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

pub type D2 = Dual2_64;

/// Seed a dual number for differentiation in `r`.
pub fn variable(r: f64) -> D2 {
    D2::new(r, 1.0, 0.0)
}

fn constant(c: f64) -> D2 {
    D2::from(c)
}

/// Closed-form metric families, selectable by name from JSON configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Flat,
    SchwarzschildIsotropic { m: f64 },
    SchwarzschildNegative { m: f64 },
    SchwarzschildAreaRadius { m: f64 },
    Hyperbolic,
    Spherical,
    ConformalBump { eps: f64, s: f64 },
}

impl MetricSpec {
    pub fn build(self) -> Result<WarpedMetric3> {
        WarpedMetric3::from_spec(self)
    }
}

/// Smooth compactly supported radial profile
/// `w(r) = amplitude * exp(1 - 1/(1 - xi^2))`, `xi = (r - center)/half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialBump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl RadialBump {
    pub fn new(center: f64, half_width: f64, amplitude: f64) -> Result<Self> {
        if !(center.is_finite() && half_width.is_finite() && amplitude.is_finite()) || half_width <= 0.0 {
            return Err(Error::invalid(format!(
                "bad bump (center {center}, half_width {half_width}, amplitude {amplitude})"
            )));
        }
        Ok(Self { center, half_width, amplitude })
    }

    /// Bump supported in `(lo, hi)`.
    pub fn on_interval(lo: f64, hi: f64, amplitude: f64) -> Result<Self> {
        Self::new(0.5 * (lo + hi), 0.5 * (hi - lo), amplitude)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn eval(&self, r: D2) -> D2 {
        let xi = (r - self.center) / self.half_width;
        if xi.re.abs() >= 1.0 {
            return D2::from(0.0);
        }
        let q = -(xi * xi) + 1.0;
        (-(q.recip()) + 1.0).exp() * self.amplitude
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(constant(r)).re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { amplitude: self.amplitude * factor, ..*self }
    }
}

/// Radial stretch `f -> f * sqrt(1 + t w(r))`, i.e. `dr^2` picks up `t w dr^2`
/// in units of `f^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stretch {
    pub t: f64,
    pub bump: RadialBump,
}

/// Values needed by every curvature formula, expressed along the unit-speed
/// radial direction `s` (`ds = f dr`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcData {
    pub r: f64,
    /// `1/f`
    pub psi: f64,
    /// `psi * dpsi/dr`
    pub psi_dpsi: f64,
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
}

impl ArcData {
    pub fn f(&self) -> f64 {
        1.0 / self.psi
    }

    /// `dh/ds`
    pub fn h_s(&self) -> f64 {
        self.dh * self.psi
    }

    /// `d^2h/ds^2`
    pub fn h_ss(&self) -> f64 {
        self.psi * self.psi * self.d2h + self.dh * self.psi_dpsi
    }

    /// First and second arc-length derivatives of a radial function.
    pub fn arc_derivatives(&self, n: D2) -> (f64, f64) {
        (n.v1 * self.psi, self.psi * self.psi * n.v2 + n.v1 * self.psi_dpsi)
    }
}

/// Mean curvature, umbilic coefficient and area of a coordinate sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereGeometry {
    pub r: f64,
    #[serde(rename = "H")]
    pub mean_curvature: f64,
    /// `A = a * (induced metric)`
    pub a_coeff: f64,
    pub area: f64,
    pub k_gauss: f64,
    /// Normal speed of the foliation, `f(r)`.
    pub eta: f64,
}

/// Components of `-(Lap N) g + Hess N - N Ric` in the orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSample {
    pub r: f64,
    pub radial: f64,
    pub tangential: f64,
    pub trace: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticResidual {
    pub sup_norm: f64,
    pub component_profile: Vec<ResidualSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpedMetric3 {
    spec: MetricSpec,
    lo: f64,
    hi: f64,
    lo_closed: bool,
    margin: f64,
    stretch: Option<Stretch>,
}

impl WarpedMetric3 {
    pub fn flat() -> Self {
        Self::raw(MetricSpec::Flat, 0.0, f64::INFINITY, false)
    }

    pub fn schwarzschild_isotropic(m: f64) -> Result<Self> {
        positive_mass(m)?;
        Ok(Self::raw(MetricSpec::SchwarzschildIsotropic { m }, 0.0, f64::INFINITY, false))
    }

    /// Interior region `0 < r < m/2` of the negative-mass Schwarzschild metric.
    pub fn schwarzschild_negative(m: f64) -> Result<Self> {
        positive_mass(m)?;
        Ok(Self::raw(MetricSpec::SchwarzschildNegative { m }, 0.0, 0.5 * m, false))
    }

    /// Exterior in area-radius coordinates; the horizon `r = 2m` belongs to the domain.
    pub fn schwarzschild_area_radius(m: f64) -> Result<Self> {
        positive_mass(m)?;
        Ok(Self::raw(MetricSpec::SchwarzschildAreaRadius { m }, 2.0 * m, f64::INFINITY, true))
    }

    pub fn hyperbolic() -> Self {
        Self::raw(MetricSpec::Hyperbolic, 0.0, f64::INFINITY, false)
    }

    pub fn spherical() -> Self {
        Self::raw(MetricSpec::Spherical, 0.0, PI, false)
    }

    /// `u^4 (flat)` with `u = 1 + eps exp(-r^2/s^2)`.
    pub fn conformal_bump(eps: f64, s: f64) -> Result<Self> {
        if !(eps.is_finite() && s.is_finite()) || s <= 0.0 || eps <= -1.0 {
            return Err(Error::invalid(format!("conformal bump needs s > 0, eps > -1 (eps={eps}, s={s})")));
        }
        Ok(Self::raw(MetricSpec::ConformalBump { eps, s }, 0.0, f64::INFINITY, false))
    }

    pub fn from_spec(spec: MetricSpec) -> Result<Self> {
        match spec {
            MetricSpec::Flat => Ok(Self::flat()),
            MetricSpec::SchwarzschildIsotropic { m } => Self::schwarzschild_isotropic(m),
            MetricSpec::SchwarzschildNegative { m } => Self::schwarzschild_negative(m),
            MetricSpec::SchwarzschildAreaRadius { m } => Self::schwarzschild_area_radius(m),
            MetricSpec::Hyperbolic => Ok(Self::hyperbolic()),
            MetricSpec::Spherical => Ok(Self::spherical()),
            MetricSpec::ConformalBump { eps, s } => Self::conformal_bump(eps, s),
        }
    }

    fn raw(spec: MetricSpec, lo: f64, hi: f64, lo_closed: bool) -> Self {
        let margin = if hi.is_finite() { 1e-6 * (hi - lo) } else { 1e-6 * lo.max(1.0) };
        Self { spec, lo, hi, lo_closed, margin, stretch: None }
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::invalid(format!("margin must be finite and >= 0, got {margin}")));
        }
        self.margin = margin;
        Ok(self)
    }

    /// The metric with `f` replaced by `f * sqrt(1 + t w)`.
    pub fn stretched(&self, t: f64, bump: RadialBump) -> Result<Self> {
        let (a, b) = bump.support();
        if a < self.lo || b > self.hi {
            return Err(Error::invalid(format!(
                "perturbation support [{a}, {b}] leaves the domain [{}, {}]",
                self.lo, self.hi
            )));
        }
        if 1.0 + t * bump.amplitude.min(0.0) <= 0.0 || 1.0 + t * bump.amplitude.max(0.0) <= 0.0 {
            return Err(Error::invalid(format!("1 + t w must stay positive (t={t})")));
        }
        let mut out = self.clone();
        out.stretch = Some(Stretch { t, bump });
        Ok(out)
    }

    pub fn spec(&self) -> MetricSpec {
        self.spec
    }

    pub fn stretch(&self) -> Option<Stretch> {
        self.stretch
    }

    pub fn label(&self) -> &'static str {
        match self.spec {
            MetricSpec::Flat => "flat",
            MetricSpec::SchwarzschildIsotropic { .. } => "schwarzschild_isotropic",
            MetricSpec::SchwarzschildNegative { .. } => "schwarzschild_negative",
            MetricSpec::SchwarzschildAreaRadius { .. } => "schwarzschild_area_radius",
            MetricSpec::Hyperbolic => "hyperbolic",
            MetricSpec::Spherical => "spherical",
            MetricSpec::ConformalBump { .. } => "conformal_bump",
        }
    }

    /// Raw domain endpoints.
    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Admissible radii after the endpoint margin.
    pub fn admissible(&self) -> (f64, f64) {
        let lo = if self.lo_closed { self.lo } else { self.lo + self.margin };
        (lo, self.hi - self.margin)
    }

    pub fn known_adm_mass(&self) -> Option<f64> {
        match self.spec {
            MetricSpec::Flat => Some(0.0),
            MetricSpec::SchwarzschildIsotropic { m } | MetricSpec::SchwarzschildAreaRadius { m } => Some(m),
            _ => None,
        }
    }

    pub fn is_asymptotically_flat(&self) -> bool {
        matches!(
            self.spec,
            MetricSpec::Flat
                | MetricSpec::SchwarzschildIsotropic { .. }
                | MetricSpec::SchwarzschildAreaRadius { .. }
                | MetricSpec::ConformalBump { .. }
        )
    }

    /// Whether `r = 0` is a smooth center point.
    pub fn has_smooth_center(&self) -> bool {
        matches!(
            self.spec,
            MetricSpec::Flat | MetricSpec::Hyperbolic | MetricSpec::Spherical | MetricSpec::ConformalBump { .. }
        )
    }

    /// Static potential for the metrics that admit one, with its constant
    /// scalar curvature.
    pub fn static_potential(&self) -> Option<(StaticPotential, f64)> {
        match self.spec {
            MetricSpec::Flat => Some((StaticPotential::Unit, 0.0)),
            MetricSpec::Hyperbolic => Some((StaticPotential::Cosh, -6.0)),
            MetricSpec::Spherical => Some((StaticPotential::Cos, 6.0)),
            MetricSpec::SchwarzschildIsotropic { m } => Some((StaticPotential::Schwarzschild { m }, 0.0)),
            _ => None,
        }
    }

    pub fn check_radius(&self, r: f64) -> Result<()> {
        let (lo, hi) = self.admissible();
        if !(r >= lo && r <= hi) {
            return Err(Error::OutOfRange { r, lo, hi });
        }
        Ok(())
    }

    /// `f` and `h` as dual numbers (unstretched). Not used for the horizon
    /// of the area-radius chart, where `f` diverges.
    pub fn profiles_dual(&self, r: D2) -> (D2, D2) {
        match self.spec {
            MetricSpec::Flat => (constant(1.0), r),
            MetricSpec::SchwarzschildIsotropic { m } => {
                let u = r.recip() * (0.5 * m) + 1.0;
                (u * u, r * u * u)
            }
            MetricSpec::SchwarzschildNegative { m } => {
                let u = -(r.recip() * (0.5 * m)) + 1.0;
                (u * u, r * u * u)
            }
            MetricSpec::SchwarzschildAreaRadius { m } => {
                ((-(r.recip() * (2.0 * m)) + 1.0).sqrt().recip(), r)
            }
            MetricSpec::Hyperbolic => (constant(1.0), r.sinh()),
            MetricSpec::Spherical => (constant(1.0), r.sin()),
            MetricSpec::ConformalBump { eps, s } => {
                let u = (-(r * r) / (s * s)).exp() * eps + 1.0;
                (u * u, r * u * u)
            }
        }
    }

    /// `f(r)` including any stretch.
    pub fn f(&self, r: f64) -> Result<f64> {
        Ok(self.arc(r)?.f())
    }

    pub fn h(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.profiles_dual(constant(r)).1.re)
    }

    pub fn arc(&self, r: f64) -> Result<ArcData> {
        self.check_radius(r)?;
        let x = variable(r);
        let (psi, psi_dpsi, h) = match self.spec {
            MetricSpec::SchwarzschildAreaRadius { m } => {
                // psi = sqrt(1 - 2m/r), psi psi' = m/r^2, finite at the horizon
                let psi = (1.0 - 2.0 * m / r).max(0.0).sqrt();
                (psi, m / (r * r), x)
            }
            _ => {
                let (f, h) = self.profiles_dual(x);
                (1.0 / f.re, -f.v1 / f.re.powi(3), h)
            }
        };
        let (psi, psi_dpsi) = match self.stretch {
            None => (psi, psi_dpsi),
            Some(Stretch { t, bump }) => {
                let w = bump.eval(x);
                let one_tw = 1.0 + t * w.re;
                // sigma = (1 + t w)^{-1/2}, sigma sigma' = -t w' / (2 (1 + t w)^2)
                let sigma_sq = 1.0 / one_tw;
                let sigma_dsigma = -0.5 * t * w.v1 / (one_tw * one_tw);
                (psi * sigma_sq.sqrt(), psi_dpsi * sigma_sq + psi * psi * sigma_dsigma)
            }
        };
        let out = ArcData { r, psi, psi_dpsi, h: h.re, dh: h.v1, d2h: h.v2 };
        check_finite(&[out.psi, out.psi_dpsi, out.h, out.dh, out.d2h], "warped profile")?;
        Ok(out)
    }

    /// `H = 2 h'/(f h)` with respect to the outward normal.
    pub fn sphere_mean_curvature(&self, r: f64) -> Result<f64> {
        let a = self.arc(r)?;
        Ok(2.0 * a.h_s() / a.h)
    }

    pub fn sphere_geometry(&self, r: f64) -> Result<SphereGeometry> {
        let a = self.arc(r)?;
        let a_coeff = a.h_s() / a.h;
        Ok(SphereGeometry {
            r,
            mean_curvature: 2.0 * a_coeff,
            a_coeff,
            area: 4.0 * PI * a.h * a.h,
            k_gauss: 1.0 / (a.h * a.h),
            eta: a.f(),
        })
    }

    pub fn scalar_curvature(&self, r: f64) -> Result<f64> {
        let a = self.arc(r)?;
        let (h, hs) = (a.h, a.h_s());
        Ok(-4.0 * a.h_ss() / h + 2.0 * (1.0 - hs * hs) / (h * h))
    }

    /// Ricci curvature in the normal direction and in any tangential direction.
    pub fn ricci(&self, r: f64) -> Result<(f64, f64)> {
        let a = self.arc(r)?;
        let (h, hs, hss) = (a.h, a.h_s(), a.h_ss());
        Ok((-2.0 * hss / h, -hss / h + (1.0 - hs * hs) / (h * h)))
    }

    /// Defect of the Gauss equation `2/h^2 = R - 2 Ric(nu,nu) + H^2 - |A|^2`
    /// for the coordinate sphere.
    pub fn gauss_equation_defect(&self, r: f64) -> Result<f64> {
        let geo = self.sphere_geometry(r)?;
        let (ric_nn, _) = self.ricci(r)?;
        let rs = self.scalar_curvature(r)?;
        let lhs = 2.0 * geo.k_gauss;
        let rhs = rs - 2.0 * ric_nn + geo.mean_curvature.powi(2) - 2.0 * geo.a_coeff.powi(2);
        Ok((lhs - rhs).abs())
    }

    pub fn static_residual_at(&self, potential: &dyn Fn(D2) -> D2, r: f64) -> Result<ResidualSample> {
        let a = self.arc(r)?;
        let n = potential(variable(r));
        check_finite(&[n.re, n.v1, n.v2], "static potential")?;
        let (n_s, n_ss) = a.arc_derivatives(n);
        let (h, hs, hss) = (a.h, a.h_s(), a.h_ss());
        let radial = -2.0 * hs / h * n_s + 2.0 * n.re * hss / h;
        let tangential = -n_ss - hs / h * n_s + n.re * hss / h - n.re * (1.0 - hs * hs) / (h * h);
        Ok(ResidualSample {
            r,
            radial,
            tangential,
            trace: radial + 2.0 * tangential,
            norm: (radial * radial + 2.0 * tangential * tangential).sqrt(),
        })
    }

    /// Static equation residual on the given radii.
    pub fn static_residual(&self, potential: &dyn Fn(D2) -> D2, radii: &[f64]) -> Result<StaticResidual> {
        let component_profile = radii
            .iter()
            .map(|&r| self.static_residual_at(potential, r))
            .collect::<Result<Vec<_>>>()?;
        let sup_norm = component_profile.iter().fold(0.0_f64, |m, s| m.max(s.norm));
        Ok(StaticResidual { sup_norm, component_profile })
    }

    /// Whether the Ricci tensor (hence, in three dimensions, the full
    /// curvature tensor) vanishes within `1e-9` on the given radii.
    pub fn static_flatness_check(&self, radii: &[f64]) -> Result<bool> {
        for &r in radii {
            let (nn, tan) = self.ricci(r)?;
            if nn.abs() > 1e-9 || tan.abs() > 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `n` evenly spaced admissible radii in `[lo, hi]`.
    pub fn radial_samples(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
        if n < 2 || !(hi > lo) {
            return Err(Error::invalid(format!("need n >= 2 samples on a nonempty interval, got {n} on [{lo}, {hi}]")));
        }
        let out: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        self.check_radius(out[0])?;
        self.check_radius(out[n - 1])?;
        Ok(out)
    }
}

fn positive_mass(m: f64) -> Result<()> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::invalid(format!("mass parameter must be finite and > 0, got {m}")));
    }
    Ok(())
}

/// Static potentials of the model metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticPotential {
    Unit,
    Cosh,
    Cos,
    Schwarzschild { m: f64 },
}

impl StaticPotential {
    pub fn eval(&self, r: D2) -> D2 {
        match *self {
            StaticPotential::Unit => constant(1.0),
            StaticPotential::Cosh => r.cosh(),
            StaticPotential::Cos => r.cos(),
            StaticPotential::Schwarzschild { m } => {
                let q = r.recip() * (0.5 * m);
                (-q + 1.0) / (q + 1.0)
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(constant(r)).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_metrics() -> Vec<(WarpedMetric3, Vec<f64>)> {
        vec![
            (WarpedMetric3::flat(), vec![0.3, 1.0, 7.0]),
            (WarpedMetric3::schwarzschild_isotropic(2.0).unwrap(), vec![0.4, 1.0, 5.0, 40.0]),
            (WarpedMetric3::schwarzschild_negative(2.0).unwrap(), vec![0.1, 0.5, 0.9]),
            (WarpedMetric3::schwarzschild_area_radius(1.0).unwrap(), vec![2.0, 2.5, 10.0]),
            (WarpedMetric3::hyperbolic(), vec![0.2, 1.0, 4.0]),
            (WarpedMetric3::spherical(), vec![0.2, 1.5, 3.0]),
            (WarpedMetric3::conformal_bump(0.05, 1.0).unwrap(), vec![0.1, 1.0, 3.0]),
        ]
    }

    #[test]
    fn mean_curvature_examples() {
        assert!((WarpedMetric3::flat().sphere_mean_curvature(2.0).unwrap() - 1.0).abs() < 1e-15);
        // negative mass, m=2, r=1/2: u = 1 - m/2r = -1
        let neg = WarpedMetric3::schwarzschild_negative(2.0).unwrap();
        let (m, r) = (2.0_f64, 0.5_f64);
        let u = 1.0 - m / (2.0 * r);
        let oracle = u.powi(-2) * (2.0 / r + 4.0 / u * (m / (2.0 * r * r)));
        assert!((neg.sphere_mean_curvature(r).unwrap() - oracle).abs() < 1e-12);
        assert!(matches!(neg.sphere_mean_curvature(1.0), Err(Error::OutOfRange { .. })));
        assert!((oracle + 12.0).abs() < 1e-12);
        let iso = WarpedMetric3::schwarzschild_isotropic(2.0).unwrap();
        assert!((iso.sphere_mean_curvature(10.0).unwrap() - 1.98 / 14.641).abs() < 1e-14);
    }

    #[test]
    fn scalar_curvature_examples() {
        assert_eq!(WarpedMetric3::flat().scalar_curvature(3.3).unwrap(), 0.0);
        let iso = WarpedMetric3::schwarzschild_isotropic(2.0).unwrap();
        assert!(iso.scalar_curvature(5.0).unwrap().abs() < 1e-10);
        assert!((WarpedMetric3::hyperbolic().scalar_curvature(1.0).unwrap() + 6.0).abs() < 1e-10);
        assert!((WarpedMetric3::spherical().scalar_curvature(0.7).unwrap() - 6.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_geometry_examples() {
        let g = WarpedMetric3::flat().sphere_geometry(3.0).unwrap();
        assert!((g.mean_curvature - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.a_coeff - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.area - 36.0 * PI).abs() < 1e-12);
        assert_eq!(g.eta, 1.0);
        let eq = WarpedMetric3::spherical().sphere_geometry(PI / 2.0).unwrap();
        assert!(eq.mean_curvature.abs() < 1e-15 && (eq.area - 4.0 * PI).abs() < 1e-12);
        let hz = WarpedMetric3::schwarzschild_area_radius(1.0).unwrap().sphere_geometry(2.0).unwrap();
        assert_eq!(hz.mean_curvature, 0.0);
        assert!(hz.eta.is_infinite());
    }

    #[test]
    fn out_of_range_radii() {
        let neg = WarpedMetric3::schwarzschild_negative(2.0).unwrap();
        assert!(matches!(neg.scalar_curvature(1.5), Err(Error::OutOfRange { .. })));
        assert!(WarpedMetric3::flat().sphere_geometry(0.0).is_err());
        assert!(WarpedMetric3::schwarzschild_area_radius(1.0).unwrap().h(1.9).is_err());
        assert!(WarpedMetric3::schwarzschild_isotropic(-1.0).is_err());
    }

    #[test]
    fn scalar_flat_families() {
        for g in [
            WarpedMetric3::flat(),
            WarpedMetric3::schwarzschild_isotropic(2.0).unwrap(),
            WarpedMetric3::schwarzschild_area_radius(1.0).unwrap(),
        ] {
            let (lo, _) = g.admissible();
            for k in 0..40 {
                let r = lo.max(0.05) * 1.17_f64.powi(k);
                assert!(g.scalar_curvature(r).unwrap().abs() < 1e-9, "{} r={r}", g.label());
            }
        }
    }

    #[test]
    fn umbilic_and_gauss_identities() {
        for (g, radii) in all_metrics() {
            for r in radii {
                let s = g.sphere_geometry(r).unwrap();
                assert_eq!(2.0 * s.a_coeff, s.mean_curvature);
                assert!(s.k_gauss > 0.0);
                let scale = s.k_gauss.max(1.0);
                assert!(g.gauss_equation_defect(r).unwrap() < 1e-9 * scale, "{} r={r}", g.label());
            }
        }
    }

    #[test]
    fn ricci_against_finite_differences_of_hand_formula() {
        // isotropic Schwarzschild: conformally flat u^4 delta with harmonic u,
        // Ric = -2 u^{-1} Hess u + 6 u^{-2} du du - 2 u^{-2} |du|^2 delta (flat derivatives)
        let m = 2.0;
        let g = WarpedMetric3::schwarzschild_isotropic(m).unwrap();
        for r in [0.7, 2.0, 9.0] {
            let u = 1.0 + m / (2.0 * r);
            let du = -m / (2.0 * r * r);
            let ddu = m / (r * r * r);
            let ric_rr = -2.0 / u * ddu + 6.0 / (u * u) * du * du - 2.0 / (u * u) * du * du;
            let ric_tt = -2.0 / u * du / r - 2.0 / (u * u) * du * du;
            // orthonormal frame: divide by u^4
            let (nn, tan) = g.ricci(r).unwrap();
            assert!((nn - ric_rr / u.powi(4)).abs() < 1e-12);
            assert!((tan - ric_tt / u.powi(4)).abs() < 1e-12);
        }
    }

    #[test]
    fn static_examples() {
        let cases: Vec<(WarpedMetric3, f64, f64, f64)> = vec![
            (WarpedMetric3::flat(), 0.1, 10.0, 1e-12),
            (WarpedMetric3::hyperbolic(), 0.1, 5.0, 1e-9),
            (WarpedMetric3::spherical(), 0.1, 3.0, 1e-9),
            (WarpedMetric3::schwarzschild_isotropic(1.0).unwrap(), 0.25, 10.0, 1e-9),
        ];
        for (g, lo, hi, tol) in cases {
            let (pot, _) = g.static_potential().unwrap();
            let radii = g.radial_samples(lo, hi, 256).unwrap();
            let res = g.static_residual(&|r| pot.eval(r), &radii).unwrap();
            assert!(res.sup_norm <= tol, "{}: {}", g.label(), res.sup_norm);
            assert_eq!(res.component_profile.len(), 256);
        }
    }

    #[test]
    fn wrong_potential_is_not_static() {
        let g = WarpedMetric3::hyperbolic();
        let radii = g.radial_samples(0.5, 2.0, 16).unwrap();
        let res = g.static_residual(&|r| r.cos(), &radii).unwrap();
        assert!(res.sup_norm > 1e-2);
        let bad = g.static_residual(&|r| r.ln() * f64::NAN, &radii);
        assert!(matches!(bad, Err(Error::NumericalDomain(_))));
    }

    #[test]
    fn flatness_check() {
        let radii: Vec<f64> = (1..50).map(|k| 0.2 * k as f64).collect();
        assert!(WarpedMetric3::flat().static_flatness_check(&radii).unwrap());
        assert!(!WarpedMetric3::schwarzschild_isotropic(1.0).unwrap().static_flatness_check(&radii).unwrap());
        assert!(WarpedMetric3::conformal_bump(0.0, 1.0).unwrap().static_flatness_check(&radii).unwrap());
    }

    #[test]
    fn metric_spec_roundtrip_from_json() {
        let spec: MetricSpec = serde_json::from_str(r#"{"metric":"schwarzschild_isotropic","m":2.0}"#).unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.label(), "schwarzschild_isotropic");
        assert_eq!(g.known_adm_mass(), Some(2.0));
        assert!(serde_json::from_str::<MetricSpec>(r#"{"metric":"kerr"}"#).is_err());
    }

    #[test]
    fn stretched_metric_matches_finite_differences() {
        let bump = RadialBump::on_interval(0.25, 0.75, 1.0).unwrap();
        let g = WarpedMetric3::flat().stretched(0.3, bump).unwrap();
        let r = 0.41;
        let f = |r: f64| (1.0 + 0.3 * bump.value(r)).sqrt();
        assert!((g.f(r).unwrap() - f(r)).abs() < 1e-14);
        // H = 2/(f r) for h = r
        assert!((g.sphere_mean_curvature(r).unwrap() - 2.0 / (f(r) * r)).abs() < 1e-13);
        // R = -4 h_ss/h + 2(1 - h_s^2)/h^2 with h_s = 1/f, h_ss = (1/f) d/dr(1/f)
        let e = 1e-4;
        let dinv = (1.0 / f(r + e) - 1.0 / f(r - e)) / (2.0 * e);
        let oracle = -4.0 * dinv / (f(r) * r) + 2.0 * (1.0 - 1.0 / f(r).powi(2)) / (r * r);
        assert!((g.scalar_curvature(r).unwrap() - oracle).abs() < 1e-6);
        assert!(WarpedMetric3::flat().stretched(0.1, RadialBump::on_interval(-1.0, 0.5, 1.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn umbilic_identity_holds_for_random_radii(m in 0.1f64..5.0, k in 0.01f64..0.99) {
            let g = WarpedMetric3::schwarzschild_isotropic(m).unwrap();
            let r = m * (0.05 + 20.0 * k);
            let s = g.sphere_geometry(r).unwrap();
            prop_assert_eq!(2.0 * s.a_coeff, s.mean_curvature);
            prop_assert!(g.scalar_curvature(r).unwrap().abs() < 1e-9 * (1.0 + s.k_gauss));
        }

        #[test]
        fn schwarzschild_potential_is_static(m in 0.2f64..3.0, k in 0.0f64..1.0) {
            let g = WarpedMetric3::schwarzschild_isotropic(m).unwrap();
            let r = m * (0.3 + 10.0 * k);
            let pot = StaticPotential::Schwarzschild { m };
            let s = g.static_residual_at(&|x| pot.eval(x), r).unwrap();
            prop_assert!(s.norm < 1e-9 * (1.0 + 1.0 / (r * r)));
        }
    }
}
