//! Spacelike 2-surfaces `{t = r = F}` on the future light cone of Minkowski
//! space, signature `(-,+,+,+)`.
//!
//! The induced metric is `F^2 (round)`, so the Laplace-Beltrami operator is
//! `F^-2` times the round Laplacian and the mean curvature vector is
//! `F^-2 Lap X` applied to the four coordinate functions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{legendre_series, ThetaGrid};
use crate::error::{Error, Result};
use crate::mass::{liu_yau, MassReport};
use crate::weyl_embedding::{embed_axisym, intrinsic_gauss_curvature, AxisymMetric2};

/// Agreement required between the conformal-round and the directly computed
/// first fundamental form.
pub const INDUCED_METRIC_TOL: f64 = 1e-10;

/// Axisymmetric profile `F = sum c_l P_l(cos theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct LegendreProfile {
    coeffs: Vec<f64>,
}

impl LegendreProfile {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("profile needs at least one finite coefficient"));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c0 + eps P2`
    pub fn p2(c0: f64, eps: f64) -> Self {
        Self { coeffs: vec![c0, 0.0, eps] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, cos_theta: f64) -> f64 {
        legendre_series(&self.coeffs, cos_theta)
    }

    pub fn sample(&self, grid: &ThetaGrid) -> Vec<f64> {
        grid.cos_theta().iter().map(|&x| self.eval(x)).collect()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * lambda).collect() }
    }
}

impl TryFrom<BTreeMap<String, f64>> for LegendreProfile {
    type Error = String;

    fn try_from(map: BTreeMap<String, f64>) -> std::result::Result<Self, String> {
        let mut coeffs = Vec::new();
        for (key, value) in map {
            let degree: usize = key
                .strip_prefix('l')
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| format!("profile keys look like \"l0\", \"l2\"; got {key:?}"))?;
            if degree > 256 {
                return Err(format!("profile degree {degree} too large"));
            }
            if coeffs.len() <= degree {
                coeffs.resize(degree + 1, 0.0);
            }
            coeffs[degree] = value;
        }
        LegendreProfile::new(coeffs).map_err(|e| e.to_string())
    }
}

impl From<LegendreProfile> for BTreeMap<String, f64> {
    fn from(p: LegendreProfile) -> Self {
        p.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(l, c)| (format!("l{l}"), *c))
            .collect()
    }
}

/// Induced metric `F^2 (round)`, cross-checked against the first fundamental
/// form of `X = (F, F n)` computed from its coordinate derivatives.
pub fn induced_metric(grid: &Arc<ThetaGrid>, f: &[f64]) -> Result<AxisymMetric2> {
    grid.check_len(f)?;
    let sigma = AxisymMetric2::conformal(grid.clone(), f.to_vec(), "light cone")?;
    let df = grid.d_theta(f);
    let (x, s) = (grid.cos_theta(), grid.sin_theta());
    for i in 0..grid.len() {
        // X_theta at phi = 0 in (t, x, y, z); X_phi = (0, 0, F sin, 0)
        let xt = [df[i], df[i] * s[i] + f[i] * x[i], 0.0, df[i] * x[i] - f[i] * s[i]];
        let g_tt = -xt[0] * xt[0] + xt[1] * xt[1] + xt[2] * xt[2] + xt[3] * xt[3];
        let g_pp = (f[i] * s[i]).powi(2);
        let g_tp = xt[2] * f[i] * s[i];
        let f2 = f[i] * f[i];
        let err = ((g_tt - f2).abs() + (g_pp / (s[i] * s[i]) - f2).abs() + (g_tp / s[i]).abs()) / f2;
        if err > INDUCED_METRIC_TOL {
            return Err(Error::InternalConsistency(format!(
                "induced metric disagrees with F^2 (round) by {err:.3e} at theta = {}",
                grid.theta()[i]
            )));
        }
    }
    Ok(sigma)
}

/// `<H, H>` at every node, with `H = F^-2 Lap X`.
pub fn mean_curvature_vector_norm_sq(grid: &ThetaGrid, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(f)?;
    let x = grid.cos_theta();
    let s = grid.sin_theta();
    let n = grid.len();
    let ht = grid.round_laplacian(f);
    let xf: Vec<f64> = (0..n).map(|i| x[i] * f[i]).collect();
    let hz = grid.round_laplacian(&xf);
    // Lap (sin q cos phi) = sin ((1 - x^2) q'' - 4 x q' - 2 q) cos phi
    let q_x = grid.d_dx(f);
    let q_xx = grid.d_dx(&q_x);
    Ok((0..n)
        .map(|i| {
            let hx = s[i] * ((1.0 - x[i] * x[i]) * q_xx[i] - 4.0 * x[i] * q_x[i] - 2.0 * f[i]);
            (-ht[i] * ht[i] + hx * hx + hz[i] * hz[i]) / f[i].powi(4)
        })
        .collect())
}

/// `|H|`; fails with `NotSpacelike` where `<H, H> <= 0`.
pub fn mean_curvature_vector_norm(grid: &ThetaGrid, f: &[f64]) -> Result<Vec<f64>> {
    let sq = mean_curvature_vector_norm_sq(grid, f)?;
    if let Some(i) = sq.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NotSpacelike { theta: grid.theta()[i], norm_sq: sq[i] });
    }
    Ok(sq.iter().map(|v| v.sqrt()).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct LightConeSurface {
    #[serde(skip)]
    pub grid: Arc<ThetaGrid>,
    pub theta: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    pub k_gauss: Vec<f64>,
    pub hvec_norm: Vec<f64>,
    #[serde(rename = "H0")]
    pub h0: Vec<f64>,
    pub mass: MassReport,
}

impl LightConeSurface {
    /// Write `theta, H0, |H|, K` rows as CSV.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::invalid(format!("csv output: {e}"));
        w.write_record(["theta", "H0", "Hvec_norm", "K"]).map_err(io)?;
        for i in 0..self.theta.len() {
            w.write_record(
                [self.theta[i], self.h0[i], self.hvec_norm[i], self.k_gauss[i]]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// Liu-Yau mass of the light-cone surface with profile samples `f`.
pub fn liu_yau_lightcone(grid: &Arc<ThetaGrid>, f: &[f64]) -> Result<LightConeSurface> {
    let sigma = induced_metric(grid, f)?;
    let k_gauss = intrinsic_gauss_curvature(&sigma)?;
    if let Some(i) = k_gauss.iter().position(|k| *k <= 0.0) {
        return Err(Error::PositiveCurvatureViolation { theta: grid.theta()[i], curvature: k_gauss[i] });
    }
    let hvec_norm = mean_curvature_vector_norm(grid, f)?;
    let emb = embed_axisym(&sigma)?;
    let mass = liu_yau(grid, &emb.h0, &hvec_norm, &sigma.area_density())?;
    Ok(LightConeSurface {
        theta: grid.theta().to_vec(),
        grid: grid.clone(),
        f: f.to_vec(),
        k_gauss,
        hvec_norm,
        h0: emb.h0,
        mass,
    })
}

/// Convenience wrapper for a Legendre profile on an `n`-node grid.
pub fn liu_yau_profile(profile: &LegendreProfile, n: usize) -> Result<LightConeSurface> {
    let grid = Arc::new(ThetaGrid::new(n)?);
    let f = profile.sample(&grid);
    liu_yau_lightcone(&grid, &f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausalWitness {
    pub pair_index: usize,
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub dt_sq: f64,
    pub dx_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcausalityReport {
    pub pass: bool,
    pub pairs: usize,
    pub skipped: usize,
    pub witness: Option<CausalWitness>,
}

/// Sample `n_pairs` point pairs `(theta, phi)` on the surface `t = r = F` and
/// check that every pair of distinct points is spacelike separated. Points
/// are uniform on the parameter sphere; the first violating pair (by sample
/// index) is returned as a witness.
pub fn acausality_check(
    profile: &(dyn Fn(f64, f64) -> f64 + Sync),
    n_pairs: usize,
    seed: u64,
) -> Result<AcausalityReport> {
    if n_pairs == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = || {
        let cos_t: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let phi: f64 = 2.0 * PI * rng.random::<f64>();
        [cos_t.clamp(-1.0, 1.0).acos(), phi]
    };
    let pairs: Vec<([f64; 2], [f64; 2])> = (0..n_pairs).map(|_| (point(), point())).collect();
    let event = |p: [f64; 2]| {
        let f = profile(p[0], p[1]);
        let (st, ct) = p[0].sin_cos();
        let (sp, cp) = p[1].sin_cos();
        [f, f * st * cp, f * st * sp, f * ct]
    };
    let outcomes: Vec<Option<(f64, f64)>> = pairs
        .par_iter()
        .map(|&(p, q)| {
            if p == q {
                return None;
            }
            let (a, b) = (event(p), event(q));
            let dt_sq = (a[0] - b[0]).powi(2);
            let dx_sq = (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2) + (a[3] - b[3]).powi(2);
            if dt_sq == 0.0 && dx_sq == 0.0 {
                return None;
            }
            Some((dt_sq, dx_sq))
        })
        .collect();
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let witness = outcomes.iter().enumerate().find_map(|(i, o)| match o {
        Some((dt_sq, dx_sq)) if !(dt_sq < dx_sq) => {
            Some(CausalWitness { pair_index: i, p: pairs[i].0, q: pairs[i].1, dt_sq: *dt_sq, dx_sq: *dx_sq })
        }
        _ => None,
    });
    Ok(AcausalityReport { pass: witness.is_none(), pairs: n_pairs, skipped, witness })
}

/// [`acausality_check`] for an axisymmetric Legendre profile.
pub fn acausality_check_profile(profile: &LegendreProfile, n_pairs: usize, seed: u64) -> Result<AcausalityReport> {
    acausality_check(&|theta: f64, _phi: f64| profile.eval(theta.cos()), n_pairs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<ThetaGrid> {
        Arc::new(ThetaGrid::new(n).unwrap())
    }

    #[test]
    fn profile_from_json() {
        let p: LegendreProfile = serde_json::from_str(r#"{"l0": 1.0, "l2": 0.1}"#).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 0.0, 0.1]);
        assert!((p.eval(1.0) - 1.1).abs() < 1e-15);
        assert!(serde_json::from_str::<LegendreProfile>(r#"{"x2": 0.1}"#).is_err());
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(back, r#"{"l0":1.0,"l2":0.1}"#);
    }

    #[test]
    fn constant_profile_metric() {
        let g = grid(16);
        let s = induced_metric(&g, &[2.0; 16]).unwrap();
        assert!(s.a().iter().all(|a| *a == 4.0));
        let b = s.b();
        for (b, si) in b.iter().zip(g.sin_theta()) {
            assert!((b - 4.0 * si * si).abs() < 1e-14);
        }
    }

    #[test]
    fn p2_profile_metric_and_zero_profile() {
        let g = grid(64);
        let f = LegendreProfile::p2(1.0, 0.1).sample(&g);
        let s = induced_metric(&g, &f).unwrap();
        assert!(s.a().iter().zip(&f).all(|(a, f)| (a - f * f).abs() < 1e-15));
        let mut bad = f.clone();
        bad[10] = 0.0;
        assert!(induced_metric(&g, &bad).is_err());
    }

    #[test]
    fn round_profile_mean_curvature_vector() {
        let g = grid(32);
        let n = mean_curvature_vector_norm(&g, &[2.0; 32]).unwrap();
        assert!(n.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let sq = mean_curvature_vector_norm_sq(&g, &[2.0; 32]).unwrap();
        assert!(sq.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn hvec_norm_squared_is_four_k() {
        // oracle: on the light cone <H, H> = 4K
        let g = grid(128);
        for eps in [0.1, 0.2, -0.1] {
            let f = LegendreProfile::p2(1.0, eps).sample(&g);
            let sq = mean_curvature_vector_norm_sq(&g, &f).unwrap();
            let k = intrinsic_gauss_curvature(&induced_metric(&g, &f).unwrap()).unwrap();
            let d = sq.iter().zip(&k).map(|(a, b)| (a - 4.0 * b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-8, "eps={eps}: {d}");
            assert!(sq.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn round_profile_has_zero_mass() {
        let s = liu_yau_profile(&LegendreProfile::constant(1.0), 64).unwrap();
        assert!(s.mass.m_ly.unwrap().abs() <= 1e-8);
        for i in 0..64 {
            assert!((s.h0[i] - s.hvec_norm[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn p2_profile_has_positive_mass_and_scales() {
        let p = LegendreProfile::p2(1.0, 0.1);
        let m1 = liu_yau_profile(&p, 128).unwrap().mass.m_ly.unwrap();
        assert!(m1 > 0.0);
        let m2 = liu_yau_profile(&p.scaled(2.0), 128).unwrap().mass.m_ly.unwrap();
        assert!((m2 - 2.0 * m1).abs() <= 1e-8 * m1.abs() * 2.0, "{m1} {m2}");
    }

    #[test]
    fn large_amplitude_loses_positive_curvature() {
        // 1 + eps P2 keeps K > 0 exactly for -1/7 < eps < 2/7
        for eps in [0.3, -0.15, 0.9] {
            let r = liu_yau_profile(&LegendreProfile::p2(1.0, eps), 128);
            assert!(matches!(r, Err(Error::PositiveCurvatureViolation { .. })), "{r:?}");
        }
        for eps in [0.28, -0.14] {
            assert!(liu_yau_profile(&LegendreProfile::p2(1.0, eps), 128).unwrap().mass.m_ly.unwrap() > 0.0);
        }
    }

    #[test]
    fn acausality_examples() {
        let r = acausality_check_profile(&LegendreProfile::constant(3.0), 10_000, 7).unwrap();
        assert!(r.pass);
        let r = acausality_check_profile(&LegendreProfile::p2(1.0, 0.1), 10_000, 42).unwrap();
        assert!(r.pass && r.witness.is_none());
        // the same point twice is skipped, not a violation
        let r = acausality_check(&|_, _| 1.0, 1, 0).unwrap();
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn degenerate_pairs_are_skipped() {
        // every point maps to the origin of the cone when F = 0
        let r = acausality_check(&|_, _| 0.0, 100, 1).unwrap();
        assert!(r.pass);
        assert_eq!(r.skipped, 100);
    }

    #[test]
    fn causal_profile_is_caught() {
        // any F > 0 is acausal on the cone (|dx|^2 - dt^2 = 2 F F' (1 - cos angle));
        // a sign change puts points on the past cone, timelike to the future ones
        let r = acausality_check(&|theta: f64, _| theta.cos(), 2000, 3).unwrap();
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert!(w.dt_sq >= w.dx_sq);
    }

    #[test]
    fn acausality_is_deterministic_across_thread_counts() {
        let p = LegendreProfile::p2(1.0, 0.1);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = pool.install(|| acausality_check_profile(&p, 5000, 9).unwrap());
        let b = acausality_check_profile(&p, 5000, 9).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn induced_metric_identity_for_random_profiles(c1 in -0.2f64..0.2, c2 in -0.2f64..0.2, c3 in -0.1f64..0.1) {
            let g = grid(48);
            let f = LegendreProfile::new(vec![1.0, c1, c2, c3]).unwrap().sample(&g);
            prop_assert!(induced_metric(&g, &f).is_ok());
        }
    }
}
