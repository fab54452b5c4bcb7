//! Fixed-step Runge-Kutta time integration of the split system
//! `u' = A u + g(u, t)`, with fully implicit and additive (implicit-explicit)
//! variants. Implicit stages are solved either by a cached LU factorization
//! (when the implicit part is the linear operator alone) or by a
//! Jacobian-free Newton-Krylov iteration with `I - dt a A` as the left
//! preconditioner.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresOptions};
use crate::system::FullSystem;
use crate::tableau::{self, Tableau};

/// Right hand side split into a constant stiff matrix and a remainder.
pub trait SplitOde {
    fn dim(&self) -> usize;
    fn stiff(&self) -> &DMatrix<f64>;
    fn nonstiff(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>>;

    fn rhs(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let mut out = self.nonstiff(state, t)?;
        out.gemv(1.0, self.stiff(), state, 1.0);
        Ok(out)
    }

    /// Quantities recorded along the trajectory; defaults to the full state.
    fn observe(&self, state: &DVector<f64>) -> DVector<f64> {
        state.clone()
    }
}

impl SplitOde for FullSystem {
    fn dim(&self) -> usize {
        FullSystem::dim(self)
    }

    fn stiff(&self) -> &DMatrix<f64> {
        self.linear_matrix()
    }

    fn nonstiff(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.nonlinear_part(state, t)
    }

    fn rhs(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        FullSystem::rhs(self, state, t)
    }

    fn observe(&self, state: &DVector<f64>) -> DVector<f64> {
        let qd = self.q_dim();
        DVector::from_column_slice(&[state[0], state[1], state[qd], state[qd + 1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Trapezoidal rule, fully implicit, order 2.
    Trapezoidal,
    /// Six-stage stiffly accurate ESDIRK, fully implicit, order 4.
    Dirk4,
    /// Midpoint splitting: implicit linear part, explicit remainder, order 2.
    Imex2,
    /// Additive six-stage pair sharing weights, order 4.
    Imex4,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Trapezoidal => "trapezoidal",
            Method::Dirk4 => "dirk4",
            Method::Imex2 => "imex2",
            Method::Imex4 => "imex4",
        }
    }

    pub fn order(self) -> usize {
        match self {
            Method::Trapezoidal | Method::Imex2 => 2,
            Method::Dirk4 | Method::Imex4 => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    /// Divergence guard on the state norm.
    pub blowup_norm: f64,
}

impl StepperConfig {
    pub fn new(method: Method, dt: f64, t_end: f64) -> Self {
        Self {
            method,
            dt,
            t_end,
            newton_tol: 1e-11,
            newton_max_iter: 25,
            gmres_tol: 1e-12,
            gmres_restart: 30,
            blowup_norm: 1e8,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config(format!("final time must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One observed vector per time, as produced by [`SplitOde::observe`].
    pub states: Vec<DVector<f64>>,
    /// Wall time of the stepping loop alone.
    pub wall_time: f64,
    pub steps: usize,
    pub newton_iters: usize,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Cache of LU factorizations of `I - a A`, keyed by the coefficient bits.
struct LuCache {
    identity_minus: HashMap<u64, nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl LuCache {
    fn new() -> Self {
        Self { identity_minus: HashMap::new() }
    }

    fn get(
        &mut self,
        a: &DMatrix<f64>,
        coeff: f64,
    ) -> Result<&nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let key = coeff.to_bits();
        if !self.identity_minus.contains_key(&key) {
            let n = a.nrows();
            let mut m = -coeff * a;
            for i in 0..n {
                m[(i, i)] += 1.0;
            }
            let lu = m.lu();
            if lu.determinant() == 0.0 {
                return Err(Error::Assembly(format!("I - {coeff} A is singular")));
            }
            self.identity_minus.insert(key, lu);
        }
        Ok(&self.identity_minus[&key])
    }
}

/// Solve `z = base + coeff * rhs(z, t)` by Newton-Krylov with finite
/// difference Jacobian actions, preconditioned by `(I - coeff A)^-1`.
/// Returns the stage value and the Newton iteration count.
fn solve_stage_newton<S: SplitOde>(
    ode: &S,
    base: &DVector<f64>,
    predictor: DVector<f64>,
    coeff: f64,
    t: f64,
    cache: &mut LuCache,
    cfg: &StepperConfig,
) -> Result<(DVector<f64>, usize)> {
    let lu = cache.get(ode.stiff(), coeff)?;
    let opts = GmresOptions {
        tol: cfg.gmres_tol,
        restart: cfg.gmres_restart,
        max_restarts: 20,
    };
    let mut z = predictor;
    let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let mut r = ode.rhs(z, t)?;
        r *= -coeff;
        r += z;
        r -= base;
        Ok(r)
    };

    let mut r = residual(&z)?;
    for iter in 0..cfg.newton_max_iter {
        let scale = 1.0 + z.norm();
        if r.norm() <= cfg.newton_tol * scale {
            return Ok((z, iter));
        }
        let rhs_pre = lu
            .solve(&r)
            .ok_or_else(|| Error::Step { time: t, msg: "preconditioner solve failed".into() })?;
        let z_ref = &z;
        let r_ref = &r;
        let apply = |v: &DVector<f64>| -> DVector<f64> {
            let vn = v.norm();
            if vn == 0.0 {
                return DVector::zeros(v.len());
            }
            let eps = (f64::EPSILON).sqrt() * scale / vn;
            let jr = match residual(&(z_ref + v * eps)) {
                Ok(rp) => (rp - r_ref) / eps,
                // Out-of-domain probes poison the direction; a huge vector
                // makes GMRES reject it rather than silently use zeros.
                Err(_) => DVector::from_element(v.len(), f64::MAX.sqrt()),
            };
            lu.solve(&jr).unwrap_or_else(|| jr.clone())
        };
        let (dz, _) = gmres(apply, &rhs_pre, &opts).map_err(|e| match e {
            Error::Step { msg, .. } => Error::Step { time: t, msg },
            other => other,
        })?;
        z -= &dz;
        r = residual(&z)?;
    }
    let rn = r.norm();
    Err(Error::Step {
        time: t,
        msg: format!(
            "Newton failed to converge in {} iterations (residual {rn:.3e})",
            cfg.newton_max_iter
        ),
    })
}

fn check_state(state: &DVector<f64>, t: f64, limit: f64) -> Result<()> {
    let norm = state.norm();
    if !norm.is_finite() || norm > limit {
        return Err(Error::Instability { time: t, norm });
    }
    Ok(())
}

/// One step of a (possibly fully implicit) diagonally implicit tableau,
/// applying the whole right hand side implicitly.
fn dirk_step<S: SplitOde>(
    ode: &S,
    u: &DVector<f64>,
    t: f64,
    tab: &Tableau,
    cache: &mut LuCache,
    cfg: &StepperConfig,
) -> Result<(DVector<f64>, usize)> {
    let dt = cfg.dt;
    let s = tab.stages();
    let mut f: Vec<DVector<f64>> = Vec::with_capacity(s);
    let mut newton = 0usize;
    for i in 0..s {
        let ti = t + tab.c[i] * dt;
        let mut base = u.clone();
        for (j, fj) in f.iter().enumerate() {
            let a = tab.a[i][j];
            if a != 0.0 {
                base.axpy(dt * a, fj, 1.0);
            }
        }
        let aii = tab.a[i][i];
        if aii == 0.0 {
            f.push(ode.rhs(&base, ti)?);
        } else {
            // Forward Euler predictor from the latest available slope.
            let predictor = match f.last() {
                Some(fl) => {
                    let mut p = base.clone();
                    p.axpy(dt * aii, fl, 1.0);
                    p
                }
                None => base.clone(),
            };
            let (z, it) = solve_stage_newton(ode, &base, predictor, dt * aii, ti, cache, cfg)?;
            newton += it;
            // Recover the slope from the solved stage instead of a fresh
            // evaluation: z = base + dt aii f_i.
            f.push((&z - &base) / (dt * aii));
        }
    }
    let mut out = u.clone();
    for (j, fj) in f.iter().enumerate() {
        if tab.b[j] != 0.0 {
            out.axpy(dt * tab.b[j], fj, 1.0);
        }
    }
    Ok((out, newton))
}

/// One step of an additive pair: the stiff matrix implicit via `tab_i`,
/// the remainder explicit via `tab_e`. Stage solves are single LU solves.
fn imex_step<S: SplitOde>(
    ode: &S,
    u: &DVector<f64>,
    t: f64,
    tab_i: &Tableau,
    tab_e: &Tableau,
    cache: &mut LuCache,
    cfg: &StepperConfig,
) -> Result<DVector<f64>> {
    let dt = cfg.dt;
    let s = tab_i.stages();
    let a_mat = ode.stiff();
    let mut fe: Vec<DVector<f64>> = Vec::with_capacity(s);
    let mut fi: Vec<DVector<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let ti = t + tab_i.c[i] * dt;
        let mut base = u.clone();
        for j in 0..i {
            if tab_e.a[i][j] != 0.0 {
                base.axpy(dt * tab_e.a[i][j], &fe[j], 1.0);
            }
            if tab_i.a[i][j] != 0.0 {
                base.axpy(dt * tab_i.a[i][j], &fi[j], 1.0);
            }
        }
        let aii = tab_i.a[i][i];
        let z = if aii == 0.0 {
            base
        } else {
            let lu = cache.get(a_mat, dt * aii)?;
            lu.solve(&base)
                .ok_or_else(|| Error::Step { time: ti, msg: "stage solve failed".into() })?
        };
        fe.push(ode.nonstiff(&z, ti)?);
        fi.push(a_mat * &z);
    }
    let mut out = u.clone();
    for j in 0..s {
        if tab_i.b[j] != 0.0 {
            out.axpy(dt * tab_i.b[j], &fi[j], 1.0);
        }
        if tab_e.b[j] != 0.0 {
            out.axpy(dt * tab_e.b[j], &fe[j], 1.0);
        }
    }
    Ok(out)
}

/// Integrate from `u0` at t = 0 to `t_end` with fixed steps, recording the
/// observed state at every step. `t_end` must be an integer multiple of `dt`
/// to within a relative 1e-9, so that convergence studies compare identical
/// time points; there is no shortened final step.
pub fn integrate<S: SplitOde>(
    ode: &S,
    u0: DVector<f64>,
    cfg: &StepperConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n_steps_f = cfg.t_end / cfg.dt;
    let n_steps = n_steps_f.round() as usize;
    if n_steps == 0 || (n_steps_f - n_steps as f64).abs() > 1e-9 * n_steps_f {
        return Err(Error::Config(format!(
            "final time {} is not a multiple of step size {}",
            cfg.t_end, cfg.dt
        )));
    }

    let (tab_i, tab_e) = match cfg.method {
        Method::Trapezoidal => (tableau::trapezoidal(), None),
        Method::Dirk4 => (tableau::esdirk4(), None),
        Method::Imex2 => (tableau::imex_midpoint_implicit(), Some(tableau::imex_midpoint_explicit())),
        Method::Imex4 => (tableau::esdirk4(), Some(tableau::erk4())),
    };

    let mut cache = LuCache::new();
    let mut u = u0;
    check_state(&u, 0.0, cfg.blowup_norm)?;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(ode.observe(&u));
    let mut newton_iters = 0usize;

    let start = Instant::now();
    for k in 0..n_steps {
        let t = k as f64 * cfg.dt;
        match &tab_e {
            None => {
                let (next, it) = dirk_step(ode, &u, t, &tab_i, &mut cache, cfg)?;
                u = next;
                newton_iters += it;
            }
            Some(te) => {
                u = imex_step(ode, &u, t, &tab_i, te, &mut cache, cfg)?;
            }
        }
        let t_next = (k + 1) as f64 * cfg.dt;
        check_state(&u, t_next, cfg.blowup_norm)?;
        times.push(t_next);
        states.push(ode.observe(&u));
    }
    let wall_time = start.elapsed().as_secs_f64();

    Ok(Trajectory { times, states, wall_time, steps: n_steps, newton_iters })
}
