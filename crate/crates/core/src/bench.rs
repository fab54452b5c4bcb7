//! Benchmark harness: error metrics over trajectories, convergence-order
//! studies against closed-form or high-resolution references, and
//! work-precision measurement.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::daitche::integrate_direct;
use crate::error::{Error, Result};
use crate::flow::{FlowField, OscillatoryField, VortexField};
use crate::grid::PseudoGrid;
use crate::gridded::load_grid_series;
use crate::operator::{assemble_fd2, assemble_fd4};
use crate::params::ParamsConfig;
use crate::params::MreParams;
use crate::quad::QuadratureSpec;
use crate::reference::{
    oscillatory_solution, quiescent_solution, reference_trajectory, reference_trajectory_direct,
};
use crate::stepper::{integrate, Method, StepperConfig, Trajectory};
use crate::system::FullSystem;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FieldSpec {
    Quiescent,
    Oscillatory { u1: f64, lambda: f64 },
    Vortex { omega: f64 },
    Bickley,
    Gridded { path: String },
}

impl FieldSpec {
    pub fn build(&self) -> Result<FlowField> {
        Ok(match self {
            FieldSpec::Quiescent => FlowField::Quiescent,
            FieldSpec::Oscillatory { u1, lambda } => {
                FlowField::Oscillatory(OscillatoryField { u1: *u1, lambda: *lambda })
            }
            FieldSpec::Vortex { omega } => FlowField::Vortex(VortexField { omega: *omega }),
            FieldSpec::Bickley => FlowField::Bickley(crate::flow::BickleyField::standard()),
            FieldSpec::Gridded { path } => {
                FlowField::Gridded(load_grid_series(std::path::Path::new(path))?)
            }
        })
    }
}

/// A solver variant under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Fd { order: u8, method: Method },
    Daitche { order: usize },
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Fd { order, method } => write!(f, "fd{order}+{}", method.name()),
            Scheme::Daitche { order } => write!(f, "daitche{order}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(order) = s.strip_prefix("daitche") {
            let order: usize = order
                .parse()
                .map_err(|_| Error::Config(format!("bad scheme name {s:?}")))?;
            return Ok(Scheme::Daitche { order });
        }
        let (fd, method) = s
            .split_once('+')
            .ok_or_else(|| Error::Config(format!("bad scheme name {s:?}")))?;
        let order = match fd {
            "fd2" => 2,
            "fd4" => 4,
            _ => return Err(Error::Config(format!("bad scheme name {s:?}"))),
        };
        let method = match method {
            "trapezoidal" => Method::Trapezoidal,
            "dirk4" => Method::Dirk4,
            "imex2" => Method::Imex2,
            "imex4" => Method::Imex4,
            _ => return Err(Error::Config(format!("bad scheme name {s:?}"))),
        };
        Ok(Scheme::Fd { order, method })
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    MaxRelL2,
    FinalRelL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Closed form for quiescent and oscillatory fields.
    Analytic,
    /// High-resolution boundary-layer run with the self-convergence gate.
    Numeric,
    /// High-resolution direct history-quadrature run; better behaved when a
    /// discontinuous initial slip reduces the boundary-layer solvers to
    /// fractional orders.
    NumericDirect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub field: FieldSpec,
    pub params: ParamsConfig,
    pub y0: [f64; 2],
    /// Initial slip (relative velocity).
    pub q0: [f64; 2],
    pub t_end: f64,
    pub schemes: Vec<Scheme>,
    /// N values; each run uses N spatial nodes (FD schemes) and N time steps.
    pub ladder: Vec<usize>,
    #[serde(default = "default_grid_c")]
    pub grid_c: f64,
    pub metric: Metric,
    pub reference: ReferenceKind,
    /// Reference refinement factor over the finest ladder entry.
    #[serde(default = "default_ref_factor")]
    pub ref_factor: usize,
}

fn default_grid_c() -> f64 {
    10.0
}

fn default_ref_factor() -> usize {
    4
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("resolution ladder must be strictly increasing".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config(format!("final time must be positive, got {}", self.t_end)));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        if self.ref_factor < 4 {
            return Err(Error::Config("reference must be at least 4x finer than the ladder".into()));
        }
        Ok(())
    }
}

/// Maximum over steps of the relative position error; steps with near-zero
/// reference norm are skipped.
pub fn error_max_rel_l2(traj: &Trajectory, exact: &[Vector2<f64>]) -> Result<f64> {
    assert_eq!(traj.states.len(), exact.len(), "time grids must match");
    let mut best: Option<f64> = None;
    for (s, e) in traj.states.iter().zip(exact) {
        let norm = e.norm();
        if norm < 1e-14 {
            continue;
        }
        let d = (Vector2::new(s[2], s[3]) - e).norm() / norm;
        best = Some(best.map_or(d, |b: f64| b.max(d)));
    }
    best.ok_or_else(|| Error::Metric("all reference states are near zero".into()))
}

/// Relative position error at the final step. Falls back to the absolute
/// error (flagged `true`) when the reference norm vanishes.
pub fn error_final_rel_l2(traj: &Trajectory, exact_final: Vector2<f64>) -> (f64, bool) {
    let s = traj.last();
    let d = (Vector2::new(s[2], s[3]) - exact_final).norm();
    let norm = exact_final.norm();
    if norm < 1e-14 {
        (d, true)
    } else {
        (d / norm, false)
    }
}

/// Least-squares slope of log error against log N, negated.
pub fn fit_order(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(_, e)| !(e > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(nn, e) in points {
        let x = (nn as f64).ln();
        let y = e.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Some(-(n * sxy - sx * sy) / (n * sxx - sx * sx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub n: usize,
    pub dt: f64,
    pub error: Option<f64>,
    pub unstable: bool,
    /// Set when the relative metric fell back to an absolute error.
    #[serde(default)]
    pub absolute_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub entries: Vec<LadderEntry>,
    pub order_fit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metric: Metric,
    pub results: Vec<SchemeResult>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,N,dt,error,order_fit,unstable\n");
        for r in &self.results {
            for e in &r.entries {
                let err = e.error.map_or(String::new(), |v| format!("{v:.17e}"));
                let fit = r.order_fit.map_or(String::new(), |v| format!("{v:.4}"));
                out.push_str(&format!(
                    "{},{},{:.17e},{},{},{}\n",
                    r.scheme, e.n, e.dt, err, fit, e.unstable
                ));
            }
        }
        out
    }

    pub fn order_of(&self, scheme: Scheme) -> Option<f64> {
        self.results.iter().find(|r| r.scheme == scheme).and_then(|r| r.order_fit)
    }

    pub fn is_unstable(&self, scheme: Scheme) -> bool {
        self.results
            .iter()
            .find(|r| r.scheme == scheme)
            .is_some_and(|r| r.entries.iter().any(|e| e.unstable))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkPrecisionRow {
    pub scheme: Scheme,
    pub n: usize,
    pub dt: f64,
    pub wall_time_s: f64,
    pub error: Option<f64>,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkPrecisionReport {
    pub rows: Vec<WorkPrecisionRow>,
}

impl WorkPrecisionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,N,dt,wall_time_s,error\n");
        for r in &self.rows {
            let err = r.error.map_or(String::new(), |v| format!("{v:.17e}"));
            out.push_str(&format!(
                "{},{},{:.17e},{:.6e},{}\n",
                r.scheme, r.n, r.dt, r.wall_time_s, err
            ));
        }
        out
    }
}

/// Run one scheme at one resolution. FD schemes use N nodes and N steps.
pub fn run_scheme(
    scheme: Scheme,
    field: &FlowField,
    params: &MreParams,
    y0: Vector2<f64>,
    q0: Vector2<f64>,
    n: usize,
    t_end: f64,
    grid_c: f64,
) -> Result<Trajectory> {
    let dt = t_end / n as f64;
    match scheme {
        Scheme::Fd { order, method } => {
            let grid = PseudoGrid::build(n, grid_c)?;
            let op = if order == 2 {
                assemble_fd2(&grid, params)
            } else {
                assemble_fd4(&grid, params)?
            };
            let sys = FullSystem::new(op, field.clone(), params.clone());
            let eta0 = sys.initial_state(q0, y0);
            integrate(&sys, eta0, &StepperConfig::new(method, dt, t_end))
        }
        Scheme::Daitche { order } => {
            let v0 = q0 + field.eval(y0, 0.0)?.u;
            integrate_direct(field, params, y0, v0, dt, n, order)
        }
    }
}

/// Exact positions at the uniform times of an N-step run, from the closed
/// forms. Values are cached across ladder entries by time bits.
struct AnalyticReference<'a> {
    field: &'a FlowField,
    params: &'a MreParams,
    y0: Vector2<f64>,
    v0: Vector2<f64>,
    spec: QuadratureSpec,
    cache: HashMap<u64, Vector2<f64>>,
}

impl<'a> AnalyticReference<'a> {
    fn new(
        field: &'a FlowField,
        params: &'a MreParams,
        y0: Vector2<f64>,
        v0: Vector2<f64>,
    ) -> Result<Self> {
        match field {
            FlowField::Quiescent | FlowField::Oscillatory(_) => Ok(Self {
                field,
                params,
                y0,
                v0,
                spec: QuadratureSpec::default(),
                cache: HashMap::new(),
            }),
            _ => Err(Error::Reference(format!(
                "no closed form for the {} field; use the numeric reference",
                field.name()
            ))),
        }
    }

    fn at(&mut self, t: f64) -> Result<Vector2<f64>> {
        if let Some(v) = self.cache.get(&t.to_bits()) {
            return Ok(*v);
        }
        let v = match self.field {
            FlowField::Quiescent => quiescent_solution(t, self.params, self.y0, self.v0, &self.spec)?,
            FlowField::Oscillatory(o) => oscillatory_solution(
                t,
                self.params,
                self.y0,
                self.v0,
                o.u1,
                o.lambda,
                &self.spec,
            )?,
            _ => unreachable!("checked in new"),
        };
        self.cache.insert(t.to_bits(), v);
        Ok(v)
    }
}

enum ReferenceData<'a> {
    Analytic(AnalyticReference<'a>),
    Numeric { positions: Vec<Vector2<f64>>, n_ref: usize, self_diff: f64 },
}

impl ReferenceData<'_> {
    /// Reference positions at the times of an n-step run over [0, t_end].
    fn ladder_positions(&mut self, n: usize, t_end: f64) -> Result<Vec<Vector2<f64>>> {
        match self {
            ReferenceData::Analytic(a) => {
                let dt = t_end / n as f64;
                (0..=n).map(|k| a.at(k as f64 * dt)).collect()
            }
            ReferenceData::Numeric { positions, n_ref, .. } => {
                if *n_ref % n != 0 {
                    return Err(Error::Reference(format!(
                        "ladder N = {n} does not divide the reference resolution {n_ref}"
                    )));
                }
                let stride = *n_ref / n;
                Ok((0..=n).map(|k| positions[k * stride]).collect())
            }
        }
    }
}

fn build_reference<'a>(
    cfg: &BenchmarkConfig,
    field: &'a FlowField,
    params: &'a MreParams,
    y0: Vector2<f64>,
    q0: Vector2<f64>,
) -> Result<ReferenceData<'a>> {
    match cfg.reference {
        ReferenceKind::Analytic => {
            Ok(ReferenceData::Analytic(AnalyticReference::new(field, params, y0, q0)?))
        }
        ReferenceKind::Numeric | ReferenceKind::NumericDirect => {
            let n_max = *cfg.ladder.last().expect("validated non-empty");
            let n_ref = n_max * cfg.ref_factor;
            let dt_ref = cfg.t_end / n_ref as f64;
            let reference = if cfg.reference == ReferenceKind::Numeric {
                reference_trajectory(
                    field, params, y0, q0, cfg.grid_c, n_ref, dt_ref, cfg.t_end,
                )?
            } else {
                reference_trajectory_direct(field, params, y0, q0, n_ref, dt_ref)?
            };
            let positions = reference
                .trajectory
                .states
                .iter()
                .map(|s| Vector2::new(s[2], s[3]))
                .collect();
            Ok(ReferenceData::Numeric { positions, n_ref, self_diff: reference.self_diff })
        }
    }
}

fn measure(
    cfg: &BenchmarkConfig,
    traj: &Trajectory,
    reference: &mut ReferenceData<'_>,
    n: usize,
) -> Result<(f64, bool)> {
    let exact = reference.ladder_positions(n, cfg.t_end)?;
    match cfg.metric {
        Metric::MaxRelL2 => Ok((error_max_rel_l2(traj, &exact)?, false)),
        Metric::FinalRelL2 => Ok(error_final_rel_l2(traj, *exact.last().unwrap())),
    }
}

pub fn run_convergence(cfg: &BenchmarkConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let field = cfg.field.build()?;
    let params = cfg.params.resolve()?;
    let y0 = Vector2::new(cfg.y0[0], cfg.y0[1]);
    let q0 = Vector2::new(cfg.q0[0], cfg.q0[1]);
    let mut reference = build_reference(cfg, &field, &params, y0, q0)?;

    let mut results = Vec::new();
    for &scheme in &cfg.schemes {
        let mut entries = Vec::new();
        for &n in &cfg.ladder {
            let dt = cfg.t_end / n as f64;
            match run_scheme(scheme, &field, &params, y0, q0, n, cfg.t_end, cfg.grid_c) {
                Ok(traj) => {
                    let (error, fallback) = measure(cfg, &traj, &mut reference, n)?;
                    entries.push(LadderEntry {
                        n,
                        dt,
                        error: Some(error),
                        unstable: false,
                        absolute_fallback: fallback,
                    });
                }
                Err(Error::Instability { .. }) => {
                    entries.push(LadderEntry {
                        n,
                        dt,
                        error: None,
                        unstable: true,
                        absolute_fallback: false,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let points: Vec<(usize, f64)> =
            entries.iter().filter_map(|e| e.error.map(|v| (e.n, v))).collect();
        let order_fit = if entries.iter().any(|e| e.unstable) { None } else { fit_order(&points) };
        results.push(SchemeResult { scheme, entries, order_fit });
    }

    // The numeric reference is only trustworthy if its self-convergence
    // distance is far below the errors it is used to measure.
    if let ReferenceData::Numeric { self_diff, .. } = &reference {
        let coarsest = results
            .iter()
            .filter_map(|r| r.entries.first().and_then(|e| e.error))
            .fold(0.0, f64::max);
        if coarsest > 0.0 && *self_diff >= 0.01 * coarsest {
            return Err(Error::Reference(format!(
                "reference self-convergence distance {self_diff:.3e} is not below 1% of the \
                 coarsest benchmark error {coarsest:.3e}"
            )));
        }
    }

    Ok(ConvergenceReport { metric: cfg.metric, results })
}

pub fn run_work_precision(cfg: &BenchmarkConfig, repeats: usize) -> Result<WorkPrecisionReport> {
    cfg.validate()?;
    let repeats = repeats.max(3);
    let field = cfg.field.build()?;
    let params = cfg.params.resolve()?;
    let y0 = Vector2::new(cfg.y0[0], cfg.y0[1]);
    let q0 = Vector2::new(cfg.q0[0], cfg.q0[1]);
    let mut reference = build_reference(cfg, &field, &params, y0, q0)?;

    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &n in &cfg.ladder {
            let dt = cfg.t_end / n as f64;
            let mut best: Option<(f64, Trajectory)> = None;
            let mut unstable = false;
            for _ in 0..repeats {
                match run_scheme(scheme, &field, &params, y0, q0, n, cfg.t_end, cfg.grid_c) {
                    Ok(traj) => {
                        if best.as_ref().is_none_or(|(t, _)| traj.wall_time < *t) {
                            best = Some((traj.wall_time, traj));
                        }
                    }
                    Err(Error::Instability { .. }) => {
                        unstable = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            match best {
                Some((wall, traj)) if !unstable => {
                    let (error, _) = measure(cfg, &traj, &mut reference, n)?;
                    rows.push(WorkPrecisionRow {
                        scheme,
                        n,
                        dt,
                        wall_time_s: wall,
                        error: Some(error),
                        unstable: false,
                    });
                }
                _ => {
                    rows.push(WorkPrecisionRow {
                        scheme,
                        n,
                        dt,
                        wall_time_s: 0.0,
                        error: None,
                        unstable: true,
                    });
                }
            }
        }
    }
    Ok(WorkPrecisionReport { rows })
}
