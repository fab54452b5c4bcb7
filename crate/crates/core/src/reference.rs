//! Closed-form trajectories for the quiescent and oscillatory benchmarks,
//! and high-resolution numerical references with a self-convergence gate for
//! everything else.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::grid::PseudoGrid;
use crate::operator::assemble_fd4;
use crate::params::MreParams;
use crate::quad::{improper_integral, QuadratureSpec};
use crate::stepper::{integrate, Method, StepperConfig, Trajectory};
use crate::system::FullSystem;

/// Slip relaxation displacement of one component with initial slip 1:
/// (2 gamma / pi) int_0^inf (1 - e^{-k^2 t}) / ((alpha - k^2)^2 + (k gamma)^2) dk.
/// Keep the spectral peak near k = sqrt(alpha) inside the finite panel.
fn scaled(spec: &QuadratureSpec, alpha: f64) -> QuadratureSpec {
    QuadratureSpec { split_point: spec.split_point.max(3.0 * alpha.sqrt()), ..*spec }
}

fn relaxation_displacement(t: f64, params: &MreParams, spec: &QuadratureSpec) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let (alpha, gamma) = (params.alpha, params.gamma);
    let spec = &scaled(spec, alpha);
    let v = improper_integral(
        |k| {
            let k2 = k * k;
            let denom = (alpha - k2).powi(2) + (k * gamma).powi(2);
            (1.0 - (-k2 * t).exp()) / denom
        },
        spec,
    )?;
    Ok(2.0 * gamma / std::f64::consts::PI * v)
}

/// Particle position in still fluid after starting with slip `v0`.
pub fn quiescent_solution(
    t: f64,
    params: &MreParams,
    y0: Vector2<f64>,
    v0: Vector2<f64>,
    spec: &QuadratureSpec,
) -> Result<Vector2<f64>> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let d = relaxation_displacement(t, params, spec)?;
    Ok(y0 + v0 * d)
}

/// Particle position in the spatially uniform field (u1, sin(lambda t)),
/// starting with slip `v0`.
pub fn oscillatory_solution(
    t: f64,
    params: &MreParams,
    y0: Vector2<f64>,
    v0: Vector2<f64>,
    u1: f64,
    lambda: f64,
    spec: &QuadratureSpec,
) -> Result<Vector2<f64>> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {lambda}")));
    }
    let (alpha, gamma, r) = (params.alpha, params.gamma, params.r);
    let d = relaxation_displacement(t, params, spec)?;
    let spec = &scaled(spec, alpha);
    let y1 = y0[0] + u1 * t + v0[0] * d;

    let mut y2 = y0[1] + (1.0 - (lambda * t).cos()) / lambda + v0[1] * d;
    let fac = 2.0 / std::f64::consts::PI * (1.0 - r) * lambda / r;
    if fac != 0.0 {
        let base = |k: f64| {
            let k2 = k * k;
            ((k2 * gamma * gamma + (k2 - alpha).powi(2)) * (k2 * k2 + lambda * lambda)).recip()
        };
        let transient =
            improper_integral(|k| k * k * gamma * (-k * k * t).exp() * base(k), spec)?;
        let in_phase = improper_integral(
            |k| k.powi(4) * gamma * (lambda * t).sin() / lambda * base(k),
            spec,
        )?;
        let quadrature_phase =
            improper_integral(|k| k * k * gamma * (lambda * t).cos() * base(k), spec)?;
        y2 += fac * (transient + in_phase - quadrature_phase);
    }
    Ok(Vector2::new(y1, y2))
}

/// High-resolution numerical reference and the accompanying self-convergence
/// data.
pub struct NumericReference {
    pub trajectory: Trajectory,
    /// Maximum position distance between the (N, dt) run and the
    /// (N/2, 2 dt) run at shared times.
    pub self_diff: f64,
    pub n: usize,
    pub dt: f64,
}

impl NumericReference {
    /// Abort unless the self-convergence distance is below `frac` of the
    /// given coarse benchmark error.
    pub fn gate(&self, coarsest_error: f64, frac: f64) -> Result<()> {
        if self.self_diff >= frac * coarsest_error {
            return Err(Error::Reference(format!(
                "self-convergence distance {:.3e} is not below {frac} x coarsest error {:.3e}",
                self.self_diff, coarsest_error
            )));
        }
        Ok(())
    }
}

fn run_fd4(
    field: &FlowField,
    params: &MreParams,
    y0: Vector2<f64>,
    q0: Vector2<f64>,
    c: f64,
    n: usize,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    let grid = PseudoGrid::build(n, c)?;
    let op = assemble_fd4(&grid, params)?;
    let sys = FullSystem::new(op, field.clone(), params.clone());
    let eta0 = sys.initial_state(q0, y0);
    let cfg = StepperConfig::new(Method::Imex4, dt, t_end);
    integrate(&sys, eta0, &cfg)
}

/// Reference trajectory at resolution (n_ref, dt_ref), checked against the
/// half-resolution run. The caller must still gate the reported `self_diff`
/// against its coarsest benchmark error.
#[allow(clippy::too_many_arguments)]
pub fn reference_trajectory(
    field: &FlowField,
    params: &MreParams,
    y0: Vector2<f64>,
    q0: Vector2<f64>,
    c: f64,
    n_ref: usize,
    dt_ref: f64,
    t_end: f64,
) -> Result<NumericReference> {
    let fine = run_fd4(field, params, y0, q0, c, n_ref, dt_ref, t_end)?;
    let coarse = run_fd4(field, params, y0, q0, c, n_ref / 2, 2.0 * dt_ref, t_end)?;
    let mut self_diff = 0.0f64;
    for (i, s) in coarse.states.iter().enumerate() {
        let f = &fine.states[2 * i];
        let d = ((f[2] - s[2]).powi(2) + (f[3] - s[3]).powi(2)).sqrt();
        self_diff = self_diff.max(d);
    }
    Ok(NumericReference { trajectory: fine, self_diff, n: n_ref, dt: dt_ref })
}

/// Reference from the direct history-quadrature integrator at third order.
/// Preferred when the boundary-layer solvers suffer order reduction
/// (discontinuous initial slip), where refining a same-family reference
/// barely improves it.
pub fn reference_trajectory_direct(
    field: &FlowField,
    params: &MreParams,
    y0: Vector2<f64>,
    q0: Vector2<f64>,
    n_ref: usize,
    dt_ref: f64,
) -> Result<NumericReference> {
    let v0 = q0 + field.eval(y0, 0.0)?.u;
    let fine = crate::daitche::integrate_direct(field, params, y0, v0, dt_ref, n_ref, 3)?;
    let coarse =
        crate::daitche::integrate_direct(field, params, y0, v0, 2.0 * dt_ref, n_ref / 2, 3)?;
    let mut self_diff = 0.0f64;
    for (i, s) in coarse.states.iter().enumerate() {
        let f = &fine.states[2 * i];
        let d = ((f[2] - s[2]).powi(2) + (f[3] - s[3]).powi(2)).sqrt();
        self_diff = self_diff.max(d);
    }
    Ok(NumericReference { trajectory: fine, self_diff, n: n_ref, dt: dt_ref })
}
