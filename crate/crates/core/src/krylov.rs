//! Restarted GMRES for the matrix-free Newton solves.

use nalgebra::DVector;

use crate::error::{Error, Result};

pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_restarts: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-12, restart: 30, max_restarts: 20 }
    }
}

/// Solve `apply(x) = b` to a relative residual `tol`, starting from zero.
/// Returns the solution and the total iteration count.
pub fn gmres<F>(apply: F, b: &DVector<f64>, opts: &GmresOptions) -> Result<(DVector<f64>, usize)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((DVector::zeros(n), 0));
    }
    let target = opts.tol * bnorm;
    let m = opts.restart.min(n);
    let mut x = DVector::zeros(n);
    let mut total_iters = 0usize;

    for _ in 0..opts.max_restarts {
        let r = b - apply(&x);
        let beta = r.norm();
        if beta <= target {
            return Ok((x, total_iters));
        }

        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
        basis.push(&r / beta);
        // Hessenberg columns after Givens reduction, plus the rotations.
        let mut h_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![beta];
        let mut k_used = 0;

        for k in 0..m {
            total_iters += 1;
            let mut w = apply(&basis[k]);
            let mut h = vec![0.0; k + 2];
            // Modified Gram-Schmidt.
            for (j, v) in basis.iter().enumerate() {
                h[j] = w.dot(v);
                w.axpy(-h[j], v, 1.0);
            }
            h[k + 1] = w.norm();

            for j in 0..k {
                let t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
            cs.push(c);
            sn.push(s);
            h[k] = denom;
            let gk = g[k];
            g.push(-s * gk);
            g[k] = c * gk;

            let happy = h[k + 1] < 1e-14 * bnorm;
            h_cols.push(h);
            k_used = k + 1;
            if happy || g[k + 1].abs() <= target {
                break;
            }
            basis.push(&w / h_cols[k][k + 1]);
        }

        // Back substitution on the triangular system.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h_cols[j][i] * y[j];
            }
            y[i] = acc / h_cols[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], 1.0);
        }
        if g[k_used].abs() <= target {
            return Ok((x, total_iters));
        }
    }

    let res = (b - apply(&x)).norm() / bnorm;
    Err(Error::Step {
        time: f64::NAN,
        msg: format!("GMRES stalled at relative residual {res:.3e} after {total_iters} iterations"),
    })
}
