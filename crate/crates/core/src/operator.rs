//! Assembly of the semi-discrete spatial operator and boundary-source map.
//!
//! The state carries both velocity components interleaved,
//! (q_0^1, q_0^2, q_1^1, q_1^2, ...), over nodes 0..N-2 of the pseudo-grid.
//! The far-field node N-1 is treated as homogeneous Dirichlet.

use nalgebra::{DMatrix, DVector, Matrix5, Vector2, Vector5};

use crate::error::{Error, Result};
use crate::grid::PseudoGrid;
use crate::params::MreParams;

/// Assembled spatial operator: `q' = a_s q + source * f(q0, y, t)`.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    /// Finite difference order, 2 or 4.
    pub order: u8,
    /// System matrix over the interleaved q-vector, dimension 2(N-1).
    pub a_s: DMatrix<f64>,
    /// Maps the 2-vector boundary forcing into the q equation.
    pub source: DMatrix<f64>,
    pub grid: PseudoGrid,
}

impl SpatialOperator {
    pub fn dim(&self) -> usize {
        self.a_s.nrows()
    }

    /// Apply the boundary-source map to a forcing vector.
    pub fn source_vector(&self, f: Vector2<f64>) -> DVector<f64> {
        &self.source * DVector::from_column_slice(&[f[0], f[1]])
    }
}

/// Expand a scalar per-node matrix to the interleaved two-component layout.
fn interleave(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = s[(i, j)];
            if v != 0.0 {
                out[(2 * i, 2 * j)] = v;
                out[(2 * i + 1, 2 * j + 1)] = v;
            }
        }
    }
    out
}

/// Second-order operator with the half-node flux stencils and the ghost-node
/// boundary closure.
pub fn assemble_fd2(grid: &PseudoGrid, params: &MreParams) -> SpatialOperator {
    let n = grid.n;
    let dim = 2 * (n - 1);
    let (alpha, gamma) = (params.alpha, params.gamma);
    let (psi, zeta) = (&grid.psi, &grid.zeta);

    let mut a = DMatrix::zeros(dim, dim);

    // Boundary rows couple the PDE at node 0 to the Robin condition through
    // the ghost half-node at xi = -1/(2N).
    let denom = zeta[0] * (2.0 + gamma * psi[0]);
    a[(0, 0)] = -(gamma + 2.0 * alpha * zeta[0]) / denom;
    a[(1, 1)] = a[(0, 0)];
    a[(0, 2)] = gamma / denom;
    a[(1, 3)] = a[(0, 2)];

    for m in 1..=n - 2 {
        let r = 2 * m;
        let lower = 1.0 / (2.0 * psi[m] * zeta[m - 1]);
        let diag = -(zeta[m - 1] + zeta[m]) / (2.0 * psi[m] * zeta[m - 1] * zeta[m]);
        let upper = 1.0 / (2.0 * psi[m] * zeta[m]);
        a[(r, r - 2)] = lower;
        a[(r + 1, r - 1)] = lower;
        a[(r, r)] = diag;
        a[(r + 1, r + 1)] = diag;
        if m < n - 2 {
            // Node N-1 is the homogeneous Dirichlet far field; its coupling
            // is dropped.
            a[(r, r + 2)] = upper;
            a[(r + 1, r + 3)] = upper;
        }
    }

    let mut source = DMatrix::zeros(dim, 2);
    let scale = 2.0 / (2.0 + gamma * psi[0]);
    source[(0, 0)] = scale;
    source[(1, 1)] = scale;

    SpatialOperator { order: 2, a_s: a, source, grid: grid.clone() }
}

/// Coefficients of the fourth-order boundary closure that folds the Robin
/// condition into the compact first-derivative system.
///
/// Returns `(b_hat0, b0, b1, b2, b3)` for the scheme
/// `(d_xi q)_0 + (d_xi q)_1 = b_hat0 (alpha q0 - (gamma/c)(d_xi q)_0)
///  + (b0 q0 + b1 q1 + b2 q2 + b3 q3)/d`,
/// obtained by matching Taylor moments through fourth order.
pub fn boundary_closure_coeffs(alpha: f64, gamma: f64, c: f64, d: f64) -> (f64, f64, f64, f64, f64) {
    // Unknowns ordered [b_hat0, b0, b1, b2, b3].
    let m = Matrix5::new(
        alpha * d, 1.0, 1.0, 1.0, 1.0, // q0 moment (scaled by d)
        gamma / c, 0.0, -1.0, -2.0, -3.0, // first derivative
        0.0, 0.0, -0.5, -2.0, -4.5, // second
        0.0, 0.0, -1.0 / 6.0, -8.0 / 6.0, -27.0 / 6.0, // third
        0.0, 0.0, -1.0 / 24.0, -16.0 / 24.0, -81.0 / 24.0, // fourth
    );
    let rhs = Vector5::new(0.0, -2.0, -1.0, -0.5, -1.0 / 6.0);
    let sol = m.lu().solve(&rhs).expect("moment system is nonsingular for gamma, c, d > 0");
    (sol[0], sol[1], sol[2], sol[3], sol[4])
}

/// Scalar (one component, per-node) factors of the compact fourth-order
/// scheme. Exposed for the dense-assembly oracle and diagnostics.
pub struct CompactMatrices {
    /// Pade mass matrix with the Robin boundary closure row.
    pub m1: DMatrix<f64>,
    /// Pade mass matrix with the no-boundary-condition upwind row.
    pub m2: DMatrix<f64>,
    /// Right hand side of the first-derivative system (with closure row 0).
    pub b1: DMatrix<f64>,
    /// Right hand side with the Lele upwind row 0.
    pub b2: DMatrix<f64>,
    /// Scale of the forcing / time-derivative boundary entries, -2c/(3 gamma).
    pub k_scale: f64,
}

/// Build the scalar compact-difference factors for one velocity component.
pub fn compact_matrices(grid: &PseudoGrid, params: &MreParams) -> CompactMatrices {
    let n = grid.n;
    let rows = n - 1; // nodes 0..N-2
    let c = grid.c;
    let d = grid.d;
    let nf = n as f64;
    let (b_hat0, b0, b1c, b2c, b3c) = boundary_closure_coeffs(params.alpha, params.gamma, c, d);

    let mut m1 = DMatrix::zeros(rows, rows);
    let mut m2 = DMatrix::zeros(rows, rows);
    let mut b1 = DMatrix::zeros(rows, rows);
    let mut b2 = DMatrix::zeros(rows, rows);

    // Boundary rows. M1/B1 carry the Robin closure; M2/B2 the plain
    // fourth-order upwind scheme.
    m1[(0, 0)] = c;
    m1[(0, 1)] = nf * c / (nf - 1.0);
    b1[(0, 0)] = b0 / d;
    b1[(0, 1)] = b1c / d;
    b1[(0, 2)] = b2c / d;
    b1[(0, 3)] = b3c / d;

    m2[(0, 0)] = c;
    m2[(0, 1)] = 3.0 * nf * c / (nf - 1.0);
    b2[(0, 0)] = -17.0 / (6.0 * d);
    b2[(0, 1)] = 3.0 / (2.0 * d);
    b2[(0, 2)] = 3.0 / (2.0 * d);
    b2[(0, 3)] = -1.0 / (6.0 * d);

    // Interior Pade rows, transformed to pseudo-space by the exact Jacobian
    // of the logarithmic map.
    for m in 1..rows {
        let mf = m as f64;
        let row = [
            nf * c / (nf - mf + 1.0),
            4.0 * nf * c / (nf - mf),
            nf * c / (nf - mf - 1.0),
        ];
        for (off, &v) in [-1i64, 0, 1].iter().zip(&row) {
            let col = m as i64 + off;
            if (0..rows as i64).contains(&col) {
                m1[(m, col as usize)] = v;
                m2[(m, col as usize)] = v;
            }
        }
        if m >= 1 {
            b1[(m, m - 1)] = -3.0 / d;
            b2[(m, m - 1)] = -3.0 / d;
        }
        if m + 1 < rows {
            b1[(m, m + 1)] = 3.0 / d;
            b2[(m, m + 1)] = 3.0 / d;
        }
    }

    let k_scale = b_hat0; // -2c / (3 gamma)
    CompactMatrices { m1, m2, b1, b2, k_scale }
}

fn checked_inverse(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    let norm = m.norm();
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Assembly(format!("{name} is singular (norm {norm:.3e})")))?;
    let cond = norm * inv.norm();
    if !cond.is_finite() || cond > 1e15 {
        return Err(Error::Assembly(format!(
            "{name} is numerically singular (condition estimate {cond:.3e})"
        )));
    }
    Ok(inv)
}

/// Fourth-order operator: compact interior scheme, exact-Jacobian chain rule
/// and upwind boundary closures, materialized as a dense matrix.
pub fn assemble_fd4(grid: &PseudoGrid, params: &MreParams) -> Result<SpatialOperator> {
    let cm = compact_matrices(grid, params);
    let rows = cm.m1.nrows();

    let m1_inv = checked_inverse(&cm.m1, "M1")?;
    let dx = &m1_inv * &cm.b1; // first-derivative map given q
    let b2_m1_inv = &cm.b2 * &m1_inv;

    // Psi = M2 - (2c / 3 gamma) B2 M1^-1 P; P picks the q0 entry, so the
    // correction only touches column 0.
    let mut psi = cm.m2.clone();
    let corr = &cm.b2 * m1_inv.column(0);
    for i in 0..rows {
        psi[(i, 0)] += cm.k_scale * corr[i];
    }
    let psi_inv = checked_inverse(&psi, "Psi")?;

    let a_scalar = &psi_inv * &cm.b2 * &dx;
    let source_scalar = &psi_inv * &b2_m1_inv.column(0) * cm.k_scale;

    let a_s = interleave(&a_scalar);
    let mut source = DMatrix::zeros(2 * rows, 2);
    for i in 0..rows {
        source[(2 * i, 0)] = source_scalar[i];
        source[(2 * i + 1, 1)] = source_scalar[i];
    }

    Ok(SpatialOperator { order: 4, a_s, source, grid: grid.clone() })
}
