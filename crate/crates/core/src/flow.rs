//! Analytic benchmark velocity fields with exact gradients and material
//! derivatives, plus the boundary forcing they induce.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridded::GridSeries;
use crate::params::MreParams;

/// A velocity field evaluated at one point and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    /// Velocity u.
    pub u: Vector2<f64>,
    /// Velocity gradient, `grad_u[(i, j)] = du_i / dy_j`.
    pub grad_u: Matrix2<f64>,
    /// Material derivative Du/Dt = du/dt + (u . grad) u.
    pub mat_deriv: Vector2<f64>,
}

impl FlowSample {
    pub fn zero() -> Self {
        Self { u: Vector2::zeros(), grad_u: Matrix2::zeros(), mat_deriv: Vector2::zeros() }
    }
}

/// Stationary vortex, u(y) = omega (-y2, y1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VortexField {
    pub omega: f64,
}

/// Spatially homogeneous oscillatory background, u(t) = (u1, sin(lambda t)).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OscillatoryField {
    pub u1: f64,
    pub lambda: f64,
}

/// Meandering-jet stream function with three travelling perturbations.
///
/// The default parameter set ships in `data/bickley.json` (units Mm, days).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BickleyField {
    pub u0: f64,
    pub l: f64,
    pub amplitudes: [f64; 3],
    pub wavenumbers: [f64; 3],
    pub sigmas: [f64; 3],
}

impl BickleyField {
    /// The parameter set used by the jet benchmarks.
    pub fn standard() -> Self {
        serde_json::from_str(include_str!("../data/bickley.json"))
            .expect("bundled bickley.json is valid")
    }

    /// Stream function value; u = -dPsi/dy, v = dPsi/dx.
    pub fn stream_function(&self, y: Vector2<f64>, t: f64) -> f64 {
        let (x, yy) = (y[0], y[1]);
        let tanh = (yy / self.l).tanh();
        let sech2 = 1.0 - tanh * tanh;
        let mut psi = -self.u0 * self.l * tanh;
        for i in 0..3 {
            let theta = self.wavenumbers[i] * x - self.sigmas[i] * t;
            psi += self.amplitudes[i] * self.u0 * self.l * sech2 * theta.cos();
        }
        psi
    }
}

/// One of the supported benchmark fields.
#[derive(Debug, Clone)]
pub enum FlowField {
    Quiescent,
    Vortex(VortexField),
    Oscillatory(OscillatoryField),
    Bickley(BickleyField),
    Gridded(GridSeries),
}

impl FlowField {
    /// Exact velocity, gradient and material derivative at `(y, t)`.
    ///
    /// Analytic fields are entire functions and cannot fail; the gridded
    /// field rejects out-of-domain queries.
    pub fn eval(&self, y: Vector2<f64>, t: f64) -> Result<FlowSample> {
        if !y[0].is_finite() || !y[1].is_finite() || !t.is_finite() {
            return Err(Error::Domain(format!("non-finite field query y = {y:?}, t = {t}")));
        }
        match self {
            FlowField::Quiescent => Ok(FlowSample::zero()),
            FlowField::Vortex(v) => Ok(eval_vortex(v, y)),
            FlowField::Oscillatory(o) => Ok(eval_oscillatory(o, t)),
            FlowField::Bickley(b) => Ok(eval_bickley(b, y, t)),
            FlowField::Gridded(g) => g.eval(y, t),
        }
    }

    /// Whether the field depends on time.
    pub fn is_steady(&self) -> bool {
        matches!(self, FlowField::Quiescent | FlowField::Vortex(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlowField::Quiescent => "quiescent",
            FlowField::Vortex(_) => "vortex",
            FlowField::Oscillatory(_) => "oscillatory",
            FlowField::Bickley(_) => "bickley",
            FlowField::Gridded(_) => "gridded",
        }
    }
}

fn eval_vortex(v: &VortexField, y: Vector2<f64>) -> FlowSample {
    let w = v.omega;
    let u = Vector2::new(-w * y[1], w * y[0]);
    let grad_u = Matrix2::new(0.0, -w, w, 0.0);
    // (u . grad) u = -omega^2 y, the centripetal acceleration.
    let mat_deriv = Vector2::new(-w * w * y[0], -w * w * y[1]);
    FlowSample { u, grad_u, mat_deriv }
}

fn eval_oscillatory(o: &OscillatoryField, t: f64) -> FlowSample {
    let u = Vector2::new(o.u1, (o.lambda * t).sin());
    let mat_deriv = Vector2::new(0.0, o.lambda * (o.lambda * t).cos());
    FlowSample { u, grad_u: Matrix2::zeros(), mat_deriv }
}

fn eval_bickley(b: &BickleyField, y: Vector2<f64>, t: f64) -> FlowSample {
    let (x, yy) = (y[0], y[1]);
    let tanh = (yy / b.l).tanh();
    let sech2 = 1.0 - tanh * tanh;

    let mut sum_cos = 0.0; // sum A_i cos(theta_i)
    let mut sum_k_sin = 0.0; // sum A_i k_i sin(theta_i)
    let mut sum_k2_cos = 0.0; // sum A_i k_i^2 cos(theta_i)
    let mut sum_sig_sin = 0.0; // sum A_i sigma_i sin(theta_i)
    let mut sum_k_sig_cos = 0.0; // sum A_i k_i sigma_i cos(theta_i)
    for i in 0..3 {
        let (a, k, sig) = (b.amplitudes[i], b.wavenumbers[i], b.sigmas[i]);
        let theta = k * x - sig * t;
        let (s, c) = theta.sin_cos();
        sum_cos += a * c;
        sum_k_sin += a * k * s;
        sum_k2_cos += a * k * k * c;
        sum_sig_sin += a * sig * s;
        sum_k_sig_cos += a * k * sig * c;
    }

    let u0 = b.u0;
    let u1 = u0 * sech2 + 2.0 * u0 * sech2 * tanh * sum_cos;
    let u2 = -u0 * b.l * sech2 * sum_k_sin;

    let du1_dx = -2.0 * u0 * sech2 * tanh * sum_k_sin;
    // d/dy (sech^2 tanh) = sech^2 (1 - 3 tanh^2) / L
    let du1_dy =
        -2.0 * u0 * sech2 * tanh / b.l + 2.0 * u0 * sech2 * (1.0 - 3.0 * tanh * tanh) / b.l * sum_cos;
    let du2_dx = -u0 * b.l * sech2 * sum_k2_cos;
    let du2_dy = 2.0 * u0 * tanh * sech2 * sum_k_sin;

    let du1_dt = 2.0 * u0 * sech2 * tanh * sum_sig_sin;
    let du2_dt = u0 * b.l * sech2 * sum_k_sig_cos;

    let u = Vector2::new(u1, u2);
    let grad_u = Matrix2::new(du1_dx, du1_dy, du2_dx, du2_dy);
    let mat_deriv = Vector2::new(
        du1_dt + u1 * du1_dx + u2 * du1_dy,
        du2_dt + u1 * du2_dx + u2 * du2_dy,
    );
    FlowSample { u, grad_u, mat_deriv }
}

/// Right hand side of the nonlinear boundary condition:
/// f = (1/R - 1) Du/Dt - (q0 . grad) u.
pub fn boundary_forcing(q0: Vector2<f64>, sample: &FlowSample, params: &MreParams) -> Vector2<f64> {
    let advective = sample.grad_u * q0; // component i: sum_j du_i/dy_j q0_j
    (1.0 / params.r - 1.0) * sample.mat_deriv - advective
}
