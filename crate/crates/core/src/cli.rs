//! Command-line front end.
//!
//! Every subcommand builds a [`ScenarioConfig`], the same record that `run
//! --config` reads from JSON, and [`run`] turns it into a [`RunReport`].
//! Exit status is 0 when every embedded check passes, 1 on a numerical
//! failure or a failed check, and 2 on a usage error.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::discretization::ThetaGrid;
use crate::error::Error;
use crate::lightcone::{acausality_check_profile, liu_yau_profile, AcausalityReport, LegendreProfile};
use crate::mass::{
    adm_decompose, coordinate_sphere_brown_york, coordinate_sphere_liu_yau, coordinate_sphere_liu_yau_embedded,
    foliation_scan,
};
use crate::static_variation::{criticality_test, CriticalitySetup, RadialDomain, SolverOptions, Weight};
use crate::warped_ambient::{MetricSpec, RadialBump, StaticPotential, WarpedMetric3};
use crate::weyl_embedding::{embed_axisym, gauss_verify, wangyau_derivative_check, AxisymMetric2, NamedFamily};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const METRIC_KEYS: [&str; 4] = ["metric", "m", "eps", "s"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::OutOfRange { .. }
            | Error::GridMismatch { .. }
            | Error::UnsupportedMetric(_) => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn default_pairs() -> usize {
    10_000
}
fn default_lightcone_n() -> usize {
    128
}
fn default_theta_n() -> usize {
    256
}
fn default_scan_n() -> usize {
    64
}
fn default_r_max() -> f64 {
    1e4
}
fn default_r_b() -> f64 {
    1.0
}
fn default_ladder() -> Vec<f64> {
    vec![0.04, 0.02]
}
fn default_cells() -> usize {
    SolverOptions::default().cells
}
fn default_samples() -> usize {
    256
}
fn default_step() -> f64 {
    1e-3
}

/// Two-metric input for `embed`: closed-form families or samples of
/// `A dtheta^2 + B dphi^2` on the Gauss-Legendre nodes (north pole first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    Round {
        c: f64,
    },
    Spheroid {
        a: f64,
        b: f64,
    },
    Conformal {
        #[serde(rename = "F")]
        f: LegendreProfile,
    },
    Samples {
        #[serde(rename = "A")]
        a: Vec<f64>,
        #[serde(rename = "B")]
        b: Vec<f64>,
    },
}

impl SigmaSpec {
    pub fn build(&self, n: usize) -> crate::Result<AxisymMetric2> {
        match self {
            SigmaSpec::Round { c } => AxisymMetric2::round(Arc::new(ThetaGrid::new(n)?), *c),
            SigmaSpec::Spheroid { a, b } => AxisymMetric2::spheroid(Arc::new(ThetaGrid::new(n)?), *a, *b),
            SigmaSpec::Conformal { f } => {
                let grid = Arc::new(ThetaGrid::new(n)?);
                let samples = f.sample(&grid);
                AxisymMetric2::conformal(grid, samples, "conformal")
            }
            SigmaSpec::Samples { a, b } => {
                AxisymMetric2::new(Arc::new(ThetaGrid::new(a.len())?), a.clone(), b.clone(), "samples")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    ByMass {
        r: f64,
        /// Theta nodes for the embedded Liu-Yau cross-check.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    Scan {
        r_lo: f64,
        r_hi: f64,
        #[serde(default = "default_scan_n")]
        n: usize,
    },
    Adm {
        r0: f64,
        #[serde(default = "default_r_max")]
        r_max: f64,
    },
    Embed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<SigmaSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_file: Option<PathBuf>,
        #[serde(default = "default_theta_n")]
        n: usize,
    },
    Lightcone {
        #[serde(rename = "F")]
        f: LegendreProfile,
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_lightcone_n")]
        n: usize,
    },
    StaticCritical {
        #[serde(default = "default_r_b")]
        r_b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_in: Option<f64>,
        /// Constant boundary weight; defaults to the static potential.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<f64>,
        /// Scalar curvature target; defaults to that of the static metric.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
        bump: RadialBump,
        #[serde(default = "default_ladder")]
        t_ladder: Vec<f64>,
        #[serde(default = "default_cells")]
        cells: usize,
    },
    StaticResidual {
        /// 1 flat, 2 hyperbolic, 3 spherical, 4 isotropic Schwarzschild.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        example: Option<u8>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_hi: Option<f64>,
    },
    WangyauCheck {
        family: NamedFamily,
        #[serde(default)]
        t0: f64,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default = "default_theta_n")]
        n: usize,
    },
}

impl Scenario {
    pub fn command(&self) -> &'static str {
        match self {
            Scenario::ByMass { .. } => "by-mass",
            Scenario::Scan { .. } => "scan",
            Scenario::Adm { .. } => "adm",
            Scenario::Embed { .. } => "embed",
            Scenario::Lightcone { .. } => "lightcone",
            Scenario::StaticCritical { .. } => "static-critical",
            Scenario::StaticResidual { .. } => "static-residual",
            Scenario::WangyauCheck { .. } => "wangyau-check",
        }
    }

    fn needs_metric(&self) -> bool {
        !matches!(
            self,
            Scenario::Embed { .. } | Scenario::Lightcone { .. } | Scenario::WangyauCheck { .. } | Scenario::StaticResidual { .. }
        )
    }

    fn accepts_metric(&self) -> bool {
        self.needs_metric() || matches!(self, Scenario::StaticResidual { .. })
    }
}

/// A full scenario: the command, the ambient metric where one applies,
/// an optional CSV path and an optional override of the check tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub metric: Option<MetricSpec>,
    pub out_csv: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

fn reject_non_finite(v: &Value, path: &str) -> Result<(), CliError> {
    match v {
        Value::Number(n) if n.as_f64().is_some_and(|x| !x.is_finite()) => {
            Err(usage(format!("non-finite number at {path}")))
        }
        Value::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, x)| reject_non_finite(x, &format!("{path}[{i}]"))),
        Value::Object(map) => map.iter().try_for_each(|(k, x)| reject_non_finite(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario, metric: None, out_csv: None, tolerance: None }
    }

    pub fn with_metric(mut self, metric: MetricSpec) -> Self {
        self.metric = Some(metric);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: Value = serde_json::from_str(text).map_err(|e| usage(format!("config is not valid JSON: {e}")))?;
        Self::from_value(v)
    }

    pub fn from_value(v: Value) -> Result<Self, CliError> {
        reject_non_finite(&v, "$")?;
        let Value::Object(mut map) = v else {
            return Err(usage("config must be a JSON object"));
        };
        let mut metric_map = Map::new();
        for key in METRIC_KEYS {
            if let Some(x) = map.remove(key) {
                metric_map.insert(key.to_string(), x);
            }
        }
        let out_csv = match map.remove("out_csv") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(usage("out_csv must be a string")),
        };
        let tolerance = match map.remove("tolerance") {
            None | Some(Value::Null) => None,
            Some(x) => match x.as_f64() {
                Some(t) if t > 0.0 => Some(t),
                _ => return Err(usage("tolerance must be a positive number")),
            },
        };
        let scenario: Scenario =
            serde_json::from_value(Value::Object(map)).map_err(|e| usage(format!("bad scenario: {e}")))?;
        let metric = if metric_map.is_empty() {
            None
        } else if !scenario.accepts_metric() {
            return Err(usage(format!("{} does not take a metric", scenario.command())));
        } else if !metric_map.contains_key("metric") {
            return Err(usage("metric parameters given without \"metric\""));
        } else {
            let spec: MetricSpec = serde_json::from_value(Value::Object(metric_map.clone()))
                .map_err(|e| usage(format!("bad metric: {e}")))?;
            // unit variants ignore extra keys, so compare against the echo
            if let Ok(Value::Object(echo)) = serde_json::to_value(spec) {
                if let Some(extra) = metric_map.keys().find(|k| !echo.contains_key(*k)) {
                    return Err(usage(format!("unknown key {extra:?} for this metric")));
                }
            }
            Some(spec)
        };
        if scenario.needs_metric() && metric.is_none() {
            return Err(usage(format!("{} needs a \"metric\"", scenario.command())));
        }
        Ok(Self { scenario, metric, out_csv, tolerance })
    }

    pub fn to_value(&self) -> Value {
        let mut out = match serde_json::to_value(&self.scenario) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        if let Some(Ok(Value::Object(m))) = self.metric.map(serde_json::to_value) {
            out.extend(m);
        }
        if let Some(p) = &self.out_csv {
            out.insert("out_csv".into(), Value::String(p.display().to_string()));
        }
        if let Some(t) = self.tolerance {
            out.insert("tolerance".into(), json!(t));
        }
        Value::Object(out)
    }

    fn build_metric(&self) -> Result<WarpedMetric3, CliError> {
        let spec = self.metric.ok_or_else(|| usage(format!("{} needs a metric", self.scenario.command())))?;
        Ok(spec.build()?)
    }

    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    /// `value <= bound`; NaN fails.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), pass: value <= bound, value, bound }
    }

    /// `value >= bound`; NaN fails.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), pass: value >= bound, value, bound }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), pass, value: f64::from(u8::from(pass)), bound: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    pub wall_time: f64,
    pub version: String,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn summary_line(&self) -> String {
        let command = self.scenario.get("command").and_then(Value::as_str).unwrap_or("?");
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{command}: {status} ({}: {})", e.kind, e.message),
            None => format!("{command}: {status} ({passed}/{} checks, {:.3} s)", self.checks.len(), self.wall_time),
        }
    }

    pub fn exit_code(&self) -> u8 {
        u8::from(!self.passed())
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn create_csv(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_sigma(path: &Path) -> Result<SigmaSpec, CliError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    reject_non_finite(&v, "$")?;
    serde_json::from_value(v).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn static_example(example: u8, metric: Option<MetricSpec>) -> Result<(WarpedMetric3, f64, f64), CliError> {
    let m = match metric {
        Some(MetricSpec::SchwarzschildIsotropic { m }) => m,
        _ => 1.0,
    };
    Ok(match example {
        1 => (WarpedMetric3::flat(), 0.1, 10.0),
        2 => (WarpedMetric3::hyperbolic(), 0.1, 5.0),
        3 => (WarpedMetric3::spherical(), 0.1, 3.0),
        4 => (WarpedMetric3::schwarzschild_isotropic(m)?, 0.25 * m, 10.0 * m),
        other => return Err(usage(format!("static example must be 1-4, got {other}"))),
    })
}

fn execute(cfg: &ScenarioConfig) -> Result<(Value, Vec<Check>), CliError> {
    match &cfg.scenario {
        Scenario::ByMass { r, n } => {
            let g = cfg.build_metric()?;
            let by = coordinate_sphere_brown_york(&g, *r)?;
            let ly = coordinate_sphere_liu_yau(&g, *r)?;
            let m_by = by.m_by.unwrap_or(f64::NAN);
            let m_ly = ly.m_ly.unwrap_or(f64::NAN);
            let geo = g.sphere_geometry(*r)?;
            let mut checks = vec![Check::flag("finite_masses", m_by.is_finite() && m_ly.is_finite())];
            let mut results = json!({
                "r": r,
                "m_by": m_by,
                "m_ly": m_ly,
                "H": geo.mean_curvature,
                "H0": 2.0 / geo.area.sqrt() * (4.0 * std::f64::consts::PI).sqrt(),
                "area": geo.area,
                "brown_york": to_json(&by),
                "liu_yau": to_json(&ly),
            });
            if let Some(n) = n {
                let emb = coordinate_sphere_liu_yau_embedded(&g, *r, *n)?;
                let e = emb.m_ly.unwrap_or(f64::NAN);
                checks.push(Check::at_most("embedded_liu_yau_agrees", (e - m_ly).abs(), cfg.tol(1e-6)));
                results["liu_yau_embedded"] = to_json(&emb);
            }
            Ok((results, checks))
        }
        Scenario::Scan { r_lo, r_hi, n } => {
            let g = cfg.build_metric()?;
            let scan = foliation_scan(&g, *r_lo, *r_hi, *n)?;
            let tol = cfg.tol(1e-8);
            let worst = scan
                .dm_dr_fd
                .iter()
                .zip(&scan.dm_dr_formula)
                .map(|(fd, f)| (fd - f).abs() / (1.0 + f.abs()))
                .fold(0.0, f64::max);
            if let Some(p) = &cfg.out_csv {
                scan.write_csv(create_csv(p)?)?;
            }
            Ok((to_json(&scan), vec![Check::at_most("evolution_identity", worst, tol)]))
        }
        Scenario::Adm { r0, r_max } => {
            let g = cfg.build_metric()?;
            let dec = adm_decompose(&g, *r0, *r_max)?;
            let rel = dec.defect / dec.reference.abs().max(1.0);
            Ok((to_json(&dec), vec![Check::at_most("decomposition_defect", rel, cfg.tol(1e-3))]))
        }
        Scenario::Embed { sigma, sigma_file, n } => {
            let spec = match (sigma, sigma_file) {
                (Some(s), None) => s.clone(),
                (None, Some(p)) => load_sigma(p)?,
                _ => return Err(usage("embed needs exactly one of sigma, sigma_file")),
            };
            let metric = spec.build(*n)?;
            let emb = embed_axisym(&metric)?;
            let gauss = gauss_verify(&emb, &metric)?;
            let iso = emb.isometry_defect(&metric);
            let tol = cfg.tol(1e-6);
            if let Some(p) = &cfg.out_csv {
                emb.write_csv(create_csv(p)?)?;
            }
            let results = json!({
                "n": metric.grid().len(),
                "area": metric.area(),
                "total_mean_curvature": emb.total_mean_curvature(&metric),
                "gauss_defect": gauss,
                "isometry_defect": iso,
                "embedding": to_json(&emb),
            });
            Ok((results, vec![Check::at_most("gauss_equation", gauss, tol), Check::at_most("isometry", iso, tol)]))
        }
        Scenario::Lightcone { f, pairs, seed, n } => {
            let surface = liu_yau_profile(f, *n)?;
            let causal: AcausalityReport = acausality_check_profile(f, *pairs, *seed)?;
            let m_ly = surface.mass.m_ly.unwrap_or(f64::NAN);
            let tol = cfg.tol(1e-8);
            if let Some(p) = &cfg.out_csv {
                surface.write_csv(create_csv(p)?)?;
            }
            let results = json!({ "m_ly": m_ly, "surface": to_json(&surface), "acausality": to_json(&causal) });
            Ok((results, vec![Check::at_least("nonnegative_mass", m_ly, -tol), Check::flag("acausal", causal.pass)]))
        }
        Scenario::StaticCritical { r_b, r_in, phi, k, bump, t_ladder, cells } => {
            let g = cfg.build_metric()?;
            let domain = match r_in {
                Some(r_in) => RadialDomain::Shell { r_in: *r_in, r_b: *r_b },
                None => RadialDomain::Ball { r_b: *r_b },
            };
            let options = SolverOptions { cells: *cells, ..SolverOptions::default() };
            let setup = match (g.static_potential(), phi) {
                (Some((pot, k_static)), None) => CriticalitySetup {
                    metric: g,
                    domain,
                    weight: Weight::Potential(pot),
                    k_target: k.unwrap_or(k_static),
                    perturbation: *bump,
                    options,
                },
                (potential, Some(phi)) => CriticalitySetup {
                    metric: g,
                    domain,
                    weight: Weight::Constant(*phi),
                    k_target: k.or(potential.map(|p| p.1)).unwrap_or(0.0),
                    perturbation: *bump,
                    options,
                },
                (None, None) => return Err(usage("phi is required for a metric without a static potential")),
            };
            let report = criticality_test(&setup, t_ladder)?;
            if let Some(p) = &cfg.out_csv {
                let mut w = csv::Writer::from_writer(create_csv(p)?);
                for row in &report.rows {
                    w.serialize(row).map_err(|e| CliError::Io(e.into()))?;
                }
                w.flush()?;
            }
            let normalized = report.normalized.unwrap_or(f64::NAN);
            let checks = vec![
                Check::flag("second_variation_resolved", report.second_variation_resolved || report.d_f0 == 0.0),
                Check::at_most("normalized_first_derivative", normalized, cfg.tol(1e-6)),
            ];
            Ok((to_json(&report), checks))
        }
        Scenario::StaticResidual { example, samples, r_lo, r_hi } => {
            let (g, lo, hi) = match (example, cfg.metric) {
                (Some(e), None) | (Some(e @ 4), Some(MetricSpec::SchwarzschildIsotropic { .. })) => {
                    static_example(*e, cfg.metric)?
                }
                (Some(_), Some(_)) => return Err(usage("give either a static example or a metric, not both")),
                (None, Some(spec)) => {
                    let g = spec.build()?;
                    let (lo, hi) = match spec {
                        MetricSpec::Flat => (0.1, 10.0),
                        MetricSpec::Hyperbolic => (0.1, 5.0),
                        MetricSpec::Spherical => (0.1, 3.0),
                        MetricSpec::SchwarzschildIsotropic { m } => (0.25 * m, 10.0 * m),
                        _ => {
                            let (a, b) = g.admissible();
                            (a.max(0.1), b.min(a.max(0.1) + 10.0))
                        }
                    };
                    (g, lo, hi)
                }
                (None, None) => return Err(usage("static-residual needs a metric or an example")),
            };
            let (pot, _): (StaticPotential, f64) = g
                .static_potential()
                .ok_or_else(|| usage(format!("{} has no static potential", g.label())))?;
            let radii = g.radial_samples(r_lo.unwrap_or(lo), r_hi.unwrap_or(hi), *samples)?;
            let res = g.static_residual(&|r| pot.eval(r), &radii)?;
            let flat = g.static_flatness_check(&radii)?;
            if let Some(p) = &cfg.out_csv {
                let mut w = csv::Writer::from_writer(create_csv(p)?);
                for s in &res.component_profile {
                    w.serialize(s).map_err(|e| CliError::Io(e.into()))?;
                }
                w.flush()?;
            }
            let results = json!({
                "metric": g.label(),
                "potential": to_json(&pot),
                "flat": flat,
                "residual": to_json(&res),
            });
            Ok((results, vec![Check::at_most("static_residual", res.sup_norm, cfg.tol(1e-9))]))
        }
        Scenario::WangyauCheck { family, t0, step, n } => {
            let grid = Arc::new(ThetaGrid::new(*n)?);
            let check = wangyau_derivative_check(family, &grid, *t0, *step)?;
            let bound = cfg.tol(match family {
                NamedFamily::RoundDilation => 1e-10,
                _ => 1e-4,
            });
            Ok((to_json(&check), vec![Check::at_most("wangyau_identity", check.relative_difference, bound)]))
        }
    }
}

/// Run one scenario. Usage errors come back as `Err`; numerical failures
/// are recorded in the report.
pub fn run(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let (results, checks, error) = match execute(cfg) {
        Ok((r, c)) => (r, c, None),
        Err(CliError::Numerical(e)) => {
            (Value::Null, Vec::new(), Some(ErrorRecord { kind: e.kind().into(), message: e.to_string() }))
        }
        Err(other) => return Err(other),
    };
    Ok(RunReport {
        scenario: cfg.to_value(),
        results,
        checks,
        error,
        wall_time: start.elapsed().as_secs_f64(),
        version: VERSION.to_string(),
    })
}

/// Known-answer scenarios behind `--selftest`, with the result field and
/// value each must produce.
pub fn selftest_cases(command: &str) -> Vec<(ScenarioConfig, &'static str, f64, f64)> {
    let flat = MetricSpec::Flat;
    match command {
        "by-mass" => vec![
            (ScenarioConfig::new(Scenario::ByMass { r: 1.0, n: None }).with_metric(flat), "/m_by", 0.0, 1e-14),
            (ScenarioConfig::new(Scenario::ByMass { r: 1.0, n: None }).with_metric(flat), "/m_ly", 0.0, 1e-14),
        ],
        "scan" => vec![(
            ScenarioConfig::new(Scenario::Scan { r_lo: 1.0, r_hi: 2.0, n: 8 }).with_metric(flat),
            "/m_by/7",
            0.0,
            1e-14,
        )],
        "adm" => vec![(
            ScenarioConfig::new(Scenario::Adm { r0: 1.0, r_max: 1e4 }).with_metric(flat),
            "/sum",
            0.0,
            1e-14,
        )],
        "embed" => vec![(
            ScenarioConfig::new(Scenario::Embed { sigma: Some(SigmaSpec::Round { c: 1.0 }), sigma_file: None, n: 32 }),
            "/total_mean_curvature",
            8.0 * std::f64::consts::PI,
            1e-10,
        )],
        "lightcone" => vec![(
            ScenarioConfig::new(Scenario::Lightcone { f: LegendreProfile::constant(1.0), pairs: 1000, seed: 0, n: 32 }),
            "/m_ly",
            0.0,
            1e-8,
        )],
        "static-critical" => {
            let bump = RadialBump::on_interval(0.25, 0.75, 0.0).unwrap_or(RadialBump {
                center: 0.5,
                half_width: 0.25,
                amplitude: 0.0,
            });
            vec![(
                ScenarioConfig::new(Scenario::StaticCritical {
                    r_b: 1.0,
                    r_in: None,
                    phi: None,
                    k: None,
                    bump,
                    t_ladder: vec![0.02],
                    cells: 200,
                })
                .with_metric(flat),
                "/d_f0",
                0.0,
                0.0,
            )]
        }
        "static-residual" => vec![(
            ScenarioConfig::new(Scenario::StaticResidual { example: Some(1), samples: 16, r_lo: None, r_hi: None }),
            "/residual/sup_norm",
            0.0,
            1e-14,
        )],
        "wangyau-check" => vec![(
            ScenarioConfig::new(Scenario::WangyauCheck { family: NamedFamily::RoundDilation, t0: 0.0, step: 1e-3, n: 32 }),
            "/relative_difference",
            0.0,
            1e-10,
        )],
        _ => Vec::new(),
    }
}

/// Run the known-answer scenarios of `command`; returns one line per case
/// and whether all passed.
pub fn selftest(command: &str) -> (Vec<String>, bool) {
    let mut lines = Vec::new();
    let mut ok = true;
    for (cfg, pointer, expected, tol) in selftest_cases(command) {
        let line = match run(&cfg) {
            Ok(report) => {
                let got = report.results.pointer(pointer).and_then(Value::as_f64).unwrap_or(f64::NAN);
                let pass = report.passed() && (got - expected).abs() <= tol;
                ok &= pass;
                format!("selftest {command} {pointer}: {} (got {got:e}, expected {expected:e})", if pass { "PASS" } else { "FAIL" })
            }
            Err(e) => {
                ok = false;
                format!("selftest {command} {pointer}: FAIL ({e})")
            }
        };
        lines.push(line);
    }
    if lines.is_empty() {
        ok = false;
        lines.push(format!("selftest {command}: no cases"));
    }
    (lines, ok)
}

fn finite_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{s} is not finite"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "qlmass", version, about = "Quasilocal mass computations and identity checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// Metric constructor, e.g. flat, schwarzschild_isotropic, conformal_bump.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, value_parser = finite_f64)]
    pub m: Option<f64>,
    #[arg(long, value_parser = finite_f64)]
    pub eps: Option<f64>,
    #[arg(long, value_parser = finite_f64)]
    pub s: Option<f64>,
}

impl MetricArgs {
    fn insert_into(&self, map: &mut Map<String, Value>) {
        if let Some(name) = &self.metric {
            map.insert("metric".into(), json!(name));
        }
        for (k, v) in [("m", self.m), ("eps", self.eps), ("s", self.s)] {
            if let Some(v) = v {
                map.insert(k.into(), json!(v));
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run the known-answer cases of this subcommand and exit.
    #[arg(long)]
    pub selftest: bool,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print the JSON report on stdout instead of the summary line.
    #[arg(long)]
    pub json: bool,
    /// Override the bound of the embedded checks.
    #[arg(long, value_parser = finite_f64)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Brown-York and Liu-Yau mass of a coordinate sphere.
    ByMass {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_parser = finite_f64)]
        r: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mass along the coordinate-sphere foliation.
    Scan {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_parser = finite_f64)]
        r_lo: Option<f64>,
        #[arg(long, value_parser = finite_f64)]
        r_hi: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// ADM mass from an inner sphere plus volume integrals.
    Adm {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_parser = finite_f64)]
        r0: Option<f64>,
        #[arg(long, value_parser = finite_f64)]
        r_max: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Embed an axisymmetric two-metric as a surface of revolution.
    Embed {
        #[arg(long)]
        sigma_file: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Liu-Yau mass and acausality of a light-cone cross-section.
    Lightcone {
        /// Legendre coefficients of F by degree, comma separated.
        #[arg(long = "F-coeffs", value_delimiter = ',', value_parser = finite_f64)]
        f_coeffs: Option<Vec<f64>>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Finite-difference criticality of the weighted boundary functional.
    StaticCritical {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_parser = finite_f64)]
        phi: Option<f64>,
        /// center,half_width,amplitude
        #[arg(long, value_delimiter = ',', value_parser = finite_f64)]
        bump: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', value_parser = finite_f64)]
        t_ladder: Option<Vec<f64>>,
        #[arg(long, value_parser = finite_f64)]
        r_b: Option<f64>,
        #[arg(long, value_parser = finite_f64)]
        r_in: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Residual of the static equation for a model metric and its potential.
    StaticResidual {
        #[command(flatten)]
        metric: MetricArgs,
        /// 1 flat, 2 hyperbolic, 3 spherical, 4 isotropic Schwarzschild.
        #[arg(long)]
        example: Option<u8>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Derivative of the total mean curvature along a family of two-metrics.
    WangyauCheck {
        /// round_dilation, spheroid or conformal_p2.
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_parser = finite_f64)]
        t0: Option<f64>,
        #[arg(long, value_parser = finite_f64)]
        step: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a JSON scenario from a file, or from stdin with `-`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn put<T: Serialize>(map: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        map.insert(key.into(), to_json(&v));
    }
}

/// Translate subcommand flags into the JSON form of a scenario.
fn flags_to_value(cmd: &Command) -> Result<Value, CliError> {
    let mut map = Map::new();
    let name = match cmd {
        Command::ByMass { metric, r, n, .. } => {
            metric.insert_into(&mut map);
            put(&mut map, "r", *r);
            put(&mut map, "n", *n);
            "by-mass"
        }
        Command::Scan { metric, r_lo, r_hi, n, out_csv, .. } => {
            metric.insert_into(&mut map);
            put(&mut map, "r_lo", *r_lo);
            put(&mut map, "r_hi", *r_hi);
            put(&mut map, "n", *n);
            put(&mut map, "out_csv", out_csv.as_ref());
            "scan"
        }
        Command::Adm { metric, r0, r_max, .. } => {
            metric.insert_into(&mut map);
            put(&mut map, "r0", *r0);
            put(&mut map, "r_max", *r_max);
            "adm"
        }
        Command::Embed { sigma_file, n, out_csv, .. } => {
            put(&mut map, "sigma_file", sigma_file.as_ref());
            put(&mut map, "n", *n);
            put(&mut map, "out_csv", out_csv.as_ref());
            "embed"
        }
        Command::Lightcone { f_coeffs, pairs, seed, n, out_csv, .. } => {
            if let Some(c) = f_coeffs {
                let profile = LegendreProfile::new(c.clone()).map_err(CliError::from)?;
                map.insert("F".into(), to_json(&profile));
            }
            put(&mut map, "pairs", *pairs);
            put(&mut map, "seed", *seed);
            put(&mut map, "n", *n);
            put(&mut map, "out_csv", out_csv.as_ref());
            "lightcone"
        }
        Command::StaticCritical { metric, phi, bump, t_ladder, r_b, r_in, cells, out_csv, .. } => {
            metric.insert_into(&mut map);
            put(&mut map, "phi", *phi);
            if let Some(b) = bump {
                let [center, half_width, amplitude] = b.as_slice() else {
                    return Err(usage("--bump takes center,half_width,amplitude"));
                };
                map.insert(
                    "bump".into(),
                    json!({ "center": center, "half_width": half_width, "amplitude": amplitude }),
                );
            }
            put(&mut map, "t_ladder", t_ladder.as_ref());
            put(&mut map, "r_b", *r_b);
            put(&mut map, "r_in", *r_in);
            put(&mut map, "cells", *cells);
            put(&mut map, "out_csv", out_csv.as_ref());
            "static-critical"
        }
        Command::StaticResidual { metric, example, samples, out_csv, .. } => {
            metric.insert_into(&mut map);
            put(&mut map, "example", *example);
            put(&mut map, "samples", *samples);
            put(&mut map, "out_csv", out_csv.as_ref());
            "static-residual"
        }
        Command::WangyauCheck { family, t0, step, n, .. } => {
            put(&mut map, "family", family.as_ref());
            put(&mut map, "t0", *t0);
            put(&mut map, "step", *step);
            put(&mut map, "n", *n);
            "wangyau-check"
        }
        Command::Run { .. } => return Err(usage("run takes a config file")),
    };
    map.insert("command".into(), json!(name));
    Ok(Value::Object(map))
}

fn common_args(cmd: &Command) -> Option<&CommonArgs> {
    match cmd {
        Command::ByMass { common, .. }
        | Command::Scan { common, .. }
        | Command::Adm { common, .. }
        | Command::Embed { common, .. }
        | Command::Lightcone { common, .. }
        | Command::StaticCritical { common, .. }
        | Command::StaticResidual { common, .. }
        | Command::WangyauCheck { common, .. } => Some(common),
        Command::Run { .. } => None,
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        File::open(path)
            .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?
            .read_to_string(&mut text)?;
    }
    Ok(text)
}

fn emit(report: &RunReport, report_path: Option<&Path>, as_json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.into()))?;
    if let Some(p) = report_path {
        std::fs::write(p, format!("{text}\n"))?;
    }
    if as_json {
        writeln!(out, "{text}")?;
    } else {
        writeln!(out, "{}", report.summary_line())?;
    }
    Ok(())
}

/// Execute a parsed command line, writing to `out`; returns the exit code.
pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    let (value, report_path, as_json, tolerance) = match &cli.command {
        Command::Run { config, report, json } => {
            let text = read_config(config)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config is not valid JSON: {e}")))?;
            (v, report.clone(), *json, None)
        }
        cmd => {
            let common = common_args(cmd).ok_or_else(|| usage("missing options"))?;
            if common.selftest {
                let command = flags_to_value(cmd)?["command"].as_str().unwrap_or_default().to_string();
                let (lines, ok) = selftest(&command);
                for l in lines {
                    writeln!(out, "{l}")?;
                }
                return Ok(u8::from(!ok));
            }
            (flags_to_value(cmd)?, common.report.clone(), common.json, common.tolerance)
        }
    };
    let mut cfg = ScenarioConfig::from_value(value)?;
    if tolerance.is_some() {
        cfg.tolerance = tolerance;
    }
    let report = run(&cfg)?;
    emit(&report, report_path.as_deref(), as_json, out)?;
    Ok(report.exit_code())
}

/// Cap the global thread pool from `QLMASS_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("QLMASS_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| usage(format!("QLMASS_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(usage("QLMASS_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli, &mut std::io::stdout().lock()));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qlmass: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
