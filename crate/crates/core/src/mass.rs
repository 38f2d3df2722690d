//! Brown-York and Liu-Yau masses, the evolution of the Brown-York mass along
//! the coordinate-sphere foliation of a warped product, and the ADM
//! decomposition.
//!
//! For a coordinate sphere `S_r` the induced metric is round of radius `h(r)`,
//! so `H0 = 2/h` and `m_BY(S_r) = h (1 - h_s)` with `h_s = h'/f`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{
    central_richardson, integrate_radial, PanelSpacing, RadialGrid, RadialIntegral, TailModel, ThetaGrid,
};
use crate::error::{Error, Result};
use crate::warped_ambient::WarpedMetric3;
use crate::weyl_embedding::{embed_axisym, AxisymMetric2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMethod {
    ClosedForm,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub m_by: Option<f64>,
    pub m_ly: Option<f64>,
    #[serde(rename = "H0_integral")]
    pub h0_integral: f64,
    /// `int H dsigma` for Brown-York, `int |H vec| dsigma` for Liu-Yau.
    #[serde(rename = "H_integral")]
    pub h_integral: f64,
    pub area: f64,
    pub method: MassMethod,
    pub error_estimate: f64,
}

fn check_fields(grid: &ThetaGrid, fields: &[&[f64]]) -> Result<()> {
    for f in fields {
        grid.check_len(f)?;
    }
    Ok(())
}

fn boundary_integrals(grid: &ThetaGrid, h0: &[f64], h: &[f64], area_element: &[f64]) -> Result<(f64, f64, f64)> {
    if let Some(i) = area_element.iter().position(|a| !(*a > 0.0)) {
        return Err(Error::invalid(format!("area element must be positive at theta = {}", grid.theta()[i])));
    }
    let i0: Vec<f64> = h0.iter().zip(area_element).map(|(a, b)| a * b).collect();
    let i1: Vec<f64> = h.iter().zip(area_element).map(|(a, b)| a * b).collect();
    Ok((grid.integrate_sphere(&i0), grid.integrate_sphere(&i1), grid.integrate_sphere(area_element)))
}

/// `(1/8 pi) int (H0 - H) dsigma`. `area_element` is the density of `dsigma`
/// with respect to `sin(theta) dtheta dphi`.
pub fn brown_york(grid: &ThetaGrid, h0: &[f64], h: &[f64], area_element: &[f64]) -> Result<MassReport> {
    check_fields(grid, &[h0, h, area_element])?;
    let (i0, i1, area) = boundary_integrals(grid, h0, h, area_element)?;
    Ok(MassReport {
        m_by: Some((i0 - i1) / (8.0 * PI)),
        m_ly: None,
        h0_integral: i0,
        h_integral: i1,
        area,
        method: MassMethod::Embedding,
        error_estimate: 1e-14 * (i0.abs() + i1.abs()),
    })
}

/// `(1/8 pi) int (H0 - |H vec|) dsigma`.
pub fn liu_yau(grid: &ThetaGrid, h0: &[f64], hvec_norm: &[f64], area_element: &[f64]) -> Result<MassReport> {
    check_fields(grid, &[h0, hvec_norm, area_element])?;
    if let Some(i) = hvec_norm.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NotSpacelike { theta: grid.theta()[i], norm_sq: hvec_norm[i].powi(2) * hvec_norm[i].signum() });
    }
    let (i0, i1, area) = boundary_integrals(grid, h0, hvec_norm, area_element)?;
    Ok(MassReport {
        m_by: None,
        m_ly: Some((i0 - i1) / (8.0 * PI)),
        h0_integral: i0,
        h_integral: i1,
        area,
        method: MassMethod::Embedding,
        error_estimate: 1e-14 * (i0.abs() + i1.abs()),
    })
}

/// Brown-York mass of the coordinate sphere `S_r` in closed form.
pub fn coordinate_sphere_brown_york(g: &WarpedMetric3, r: f64) -> Result<MassReport> {
    let a = g.arc(r)?;
    let area = 4.0 * PI * a.h * a.h;
    let h0_integral = 8.0 * PI * a.h;
    let h_integral = 8.0 * PI * a.h * a.h_s();
    Ok(MassReport {
        m_by: Some(a.h * (1.0 - a.h_s())),
        m_ly: None,
        h0_integral,
        h_integral,
        area,
        method: MassMethod::ClosedForm,
        error_estimate: 0.0,
    })
}

/// Liu-Yau mass of `S_r` in the time-symmetric slice, where `|H vec| = |H|`.
pub fn coordinate_sphere_liu_yau(g: &WarpedMetric3, r: f64) -> Result<MassReport> {
    let a = g.arc(r)?;
    let h = 2.0 * a.h_s() / a.h;
    if h == 0.0 {
        return Err(Error::NotSpacelike { theta: 0.0, norm_sq: 0.0 });
    }
    let area = 4.0 * PI * a.h * a.h;
    let h0_integral = 8.0 * PI * a.h;
    let h_integral = h.abs() * area;
    Ok(MassReport {
        m_by: None,
        m_ly: Some(a.h * (1.0 - a.h_s().abs())),
        h0_integral,
        h_integral,
        area,
        method: MassMethod::ClosedForm,
        error_estimate: 0.0,
    })
}

/// Liu-Yau mass of `S_r` with `H0` taken from the numerical embedding of its
/// induced metric on an `n`-node grid.
pub fn coordinate_sphere_liu_yau_embedded(g: &WarpedMetric3, r: f64, n: usize) -> Result<MassReport> {
    let a = g.arc(r)?;
    let grid = Arc::new(ThetaGrid::new(n)?);
    let sigma = AxisymMetric2::round(grid.clone(), a.h)?;
    let emb = embed_axisym(&sigma)?;
    let hvec = vec![(2.0 * a.h_s() / a.h).abs(); n];
    liu_yau(&grid, &emb.h0, &hvec, &sigma.area_density())
}

/// `m_BY(S_r)`.
pub fn m_by(g: &WarpedMetric3, r: f64) -> Result<f64> {
    let a = g.arc(r)?;
    Ok(a.h * (1.0 - a.h_s()))
}

/// `1/h - h'/(f h)`, the umbilic coefficient gap between `A0` and `A`.
fn umbilic_gap(g: &WarpedMetric3, r: f64) -> Result<f64> {
    let a = g.arc(r)?;
    Ok((1.0 - a.h_s()) / a.h)
}

/// `|A0 - A|^2 - (H0 - H)^2` on `S_r`.
pub fn phi(g: &WarpedMetric3, r: f64) -> Result<f64> {
    Ok(-2.0 * umbilic_gap(g, r)?.powi(2))
}

/// `4 pi h^2 f`, so that `dV = volume_density dr`.
pub fn volume_density(g: &WarpedMetric3, r: f64) -> Result<f64> {
    let a = g.arc(r)?;
    Ok(4.0 * PI * a.h * a.h * a.f())
}

/// `(1/16 pi) int_{S_r} (|A0 - A|^2 - (H0 - H)^2 + R) eta dsigma`.
pub fn evolution_rhs(g: &WarpedMetric3, r: f64) -> Result<f64> {
    let a = g.arc(r)?;
    let rhs = a.h * a.h * a.f() / 4.0 * (g.scalar_curvature(r)? + phi(g, r)?);
    if !rhs.is_finite() {
        return Err(Error::domain(format!("evolution integrand not finite at r = {r}")));
    }
    Ok(rhs)
}

/// Richardson centered difference of `m_BY(S_r)` with step `1e-4 r`.
pub fn dm_dr_fd(g: &WarpedMetric3, r: f64) -> Result<f64> {
    central_richardson(|x| m_by(g, x), r, 1e-4 * r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoliationScan {
    pub r: Vec<f64>,
    pub m_by: Vec<f64>,
    #[serde(rename = "Phi")]
    pub phi: Vec<f64>,
    pub dm_dr_formula: Vec<f64>,
    pub dm_dr_fd: Vec<f64>,
    /// `(1/16 pi) int_{r_lo}^{r} R dV` at each sample.
    #[serde(rename = "R_volume_integral")]
    pub r_volume_integral: Vec<f64>,
    /// `(1/16 pi) int_{r_lo}^{r} Phi dV` at each sample.
    #[serde(rename = "Phi_volume_integral")]
    pub phi_volume_integral: Vec<f64>,
    pub monotone_nonincreasing: bool,
}

impl FoliationScan {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::invalid(format!("csv output: {e}"));
        w.write_record(["r", "m_by", "Phi", "dm_dr_formula", "dm_dr_fd"]).map_err(io)?;
        for i in 0..self.r.len() {
            w.write_record(
                [self.r[i], self.m_by[i], self.phi[i], self.dm_dr_formula[i], self.dm_dr_fd[i]]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// `(1/16 pi) (int R dV, int Phi dV)` over `[r1, r2]`, by Gauss-Legendre panels.
pub fn shell_integrals(g: &WarpedMetric3, r1: f64, r2: f64, panels: usize) -> Result<(RadialIntegral, RadialIntegral)> {
    let grid = RadialGrid::new(r1, r2, panels, 16, PanelSpacing::Linear)?;
    volume_integrals(g, &grid)
}

fn volume_integrals(g: &WarpedMetric3, grid: &RadialGrid) -> Result<(RadialIntegral, RadialIntegral)> {
    let samples = grid
        .nodes()
        .par_iter()
        .map(|&r| {
            let dv = volume_density(g, r)?;
            Ok((g.scalar_curvature(r)? * dv / (16.0 * PI), phi(g, r)? * dv / (16.0 * PI)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (rs, ps): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    Ok((integrate_radial(&rs, grid)?, integrate_radial(&ps, grid)?))
}

/// Mass, `Phi` and both sides of the evolution identity at `n_samples`
/// evenly spaced radii in `[r_lo, r_hi]`.
pub fn foliation_scan(g: &WarpedMetric3, r_lo: f64, r_hi: f64, n_samples: usize) -> Result<FoliationScan> {
    let r = g.radial_samples(r_lo, r_hi, n_samples)?;
    let point = r
        .par_iter()
        .map(|&x| Ok((m_by(g, x)?, phi(g, x)?, evolution_rhs(g, x)?, dm_dr_fd(g, x)?)))
        .collect::<Result<Vec<_>>>()?;
    let shells = r
        .par_windows(2)
        .map(|w| shell_integrals(g, w[0], w[1], 1))
        .collect::<Result<Vec<_>>>()?;
    let mut r_acc = vec![0.0; n_samples];
    let mut p_acc = vec![0.0; n_samples];
    for (i, (ri, pi)) in shells.iter().enumerate() {
        r_acc[i + 1] = r_acc[i] + ri.total();
        p_acc[i + 1] = p_acc[i] + pi.total();
    }
    let dm_dr_formula: Vec<f64> = point.iter().map(|p| p.2).collect();
    Ok(FoliationScan {
        monotone_nonincreasing: dm_dr_formula.iter().all(|d| *d <= 0.0),
        r,
        m_by: point.iter().map(|p| p.0).collect(),
        phi: point.iter().map(|p| p.1).collect(),
        dm_dr_formula,
        dm_dr_fd: point.iter().map(|p| p.3).collect(),
        r_volume_integral: r_acc,
        phi_volume_integral: p_acc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmReference {
    Known,
    LargeSphereLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmDecomposition {
    pub r0: f64,
    pub r_max: f64,
    pub m_by_r0: f64,
    pub r_integral: RadialIntegral,
    pub phi_integral: RadialIntegral,
    pub sum: f64,
    pub reference: f64,
    pub reference_kind: AdmReference,
    pub defect: f64,
}

/// `m_ADM = m_BY(S_r0) + (1/16 pi) int R dV + (1/16 pi) int Phi dV` over
/// `r >= r0`, integrated to `r_max` with a fitted power-law tail beyond.
pub fn adm_decompose(g: &WarpedMetric3, r0: f64, r_max: f64) -> Result<AdmDecomposition> {
    if !g.is_asymptotically_flat() {
        return Err(Error::UnsupportedMetric(format!("{} is not asymptotically flat", g.label())));
    }
    if !(r_max > r0) {
        return Err(Error::invalid(format!("need r_max > r0, got r0={r0}, r_max={r_max}")));
    }
    g.check_radius(r0)?;
    let decades = (r_max / r0).log10().max(1.0);
    let panels = (12.0 * decades).ceil() as usize;
    let grid = RadialGrid::new(r0, r_max, panels, 16, PanelSpacing::Logarithmic)?.with_tail(TailModel::Fitted)?;
    let (ri, pi) = volume_integrals(g, &grid)?;
    let m0 = m_by(g, r0)?;
    let sum = m0 + ri.total() + pi.total();
    let (reference, reference_kind) = match g.known_adm_mass() {
        Some(m) => (m, AdmReference::Known),
        None => (m_by(g, r_max)?, AdmReference::LargeSphereLimit),
    };
    Ok(AdmDecomposition {
        r0,
        r_max,
        m_by_r0: m0,
        r_integral: ri,
        phi_integral: pi,
        sum,
        reference,
        reference_kind,
        defect: (sum - reference).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallBallScan {
    pub r: Vec<f64>,
    pub m_by: Vec<f64>,
    /// `|m_BY|` strictly decreases along the (decreasing) radii.
    pub decreasing: bool,
}

/// Brown-York mass of small coordinate spheres about a smooth center.
pub fn small_ball_scan(g: &WarpedMetric3, r_values: &[f64]) -> Result<SmallBallScan> {
    if !g.has_smooth_center() {
        return Err(Error::UnsupportedMetric(format!("{} has no smooth center at r = 0", g.label())));
    }
    if r_values.is_empty() || r_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii must be nonempty and strictly decreasing"));
    }
    let m = r_values.iter().map(|&r| m_by(g, r)).collect::<Result<Vec<_>>>()?;
    let decreasing = m.windows(2).all(|w| w[1].abs() < w[0].abs() || (w[0] == 0.0 && w[1] == 0.0));
    Ok(SmallBallScan { r: r_values.to_vec(), m_by: m, decreasing })
}
