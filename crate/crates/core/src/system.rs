//! Coupled evolution of the boundary-layer state and the particle position.
//!
//! The full state vector is (q interleaved, y1, y2), with
//! q' = A q + source * f(q0, y, t) and y' = q0 + u(y, t).

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::Result;
use crate::flow::{boundary_forcing, FlowField};
use crate::operator::SpatialOperator;
use crate::params::MreParams;

#[derive(Debug, Clone)]
pub struct FullSystem {
    pub operator: SpatialOperator,
    pub field: FlowField,
    pub params: MreParams,
    linear: DMatrix<f64>,
}

impl FullSystem {
    pub fn new(operator: SpatialOperator, field: FlowField, params: MreParams) -> Self {
        let qd = operator.dim();
        let mut linear = DMatrix::zeros(qd + 2, qd + 2);
        linear.view_mut((0, 0), (qd, qd)).copy_from(&operator.a_s);
        linear[(qd, 0)] = 1.0;
        linear[(qd + 1, 1)] = 1.0;
        Self { operator, field, params, linear }
    }

    /// Length of the full state vector, 2(N-1) + 2.
    pub fn dim(&self) -> usize {
        self.operator.dim() + 2
    }

    pub fn q_dim(&self) -> usize {
        self.operator.dim()
    }

    /// Initial state: the slip q0 lives only at the boundary node; the
    /// pseudo-space interior starts empty (no history yet), particle at `y0`.
    pub fn initial_state(&self, q0: Vector2<f64>, y0: Vector2<f64>) -> DVector<f64> {
        let qd = self.q_dim();
        let mut eta = DVector::zeros(qd + 2);
        eta[0] = q0[0];
        eta[1] = q0[1];
        eta[qd] = y0[0];
        eta[qd + 1] = y0[1];
        eta
    }

    pub fn split_state(&self, eta: &DVector<f64>) -> (Vector2<f64>, Vector2<f64>) {
        let qd = self.q_dim();
        (Vector2::new(eta[0], eta[1]), Vector2::new(eta[qd], eta[qd + 1]))
    }

    /// Linear part of the right hand side as one (dim+2) square matrix:
    /// the operator block with the q0 rows feeding the position equations.
    pub fn linear_matrix(&self) -> &DMatrix<f64> {
        &self.linear
    }

    /// Nonlinear remainder: boundary forcing mapped into the q block plus the
    /// fluid velocity in the position block.
    pub fn nonlinear_part(&self, eta: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let qd = self.q_dim();
        let (q0, y) = self.split_state(eta);
        let sample = self.field.eval(y, t)?;
        let f = boundary_forcing(q0, &sample, &self.params);
        let mut out = DVector::zeros(qd + 2);
        out.rows_mut(0, qd).copy_from(&self.operator.source_vector(f));
        out[qd] = sample.u[0];
        out[qd + 1] = sample.u[1];
        Ok(out)
    }

    /// Full right hand side.
    pub fn rhs(&self, eta: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let mut out = self.nonlinear_part(eta, t)?;
        out.gemv(1.0, &self.linear, eta, 1.0);
        Ok(out)
    }

    /// Dump the linear matrix in Matrix Market coordinate format.
    pub fn dump_operator(&self, mut w: impl std::io::Write) -> Result<()> {
        let m = self.linear_matrix();
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
                }
            }
        }
        Ok(())
    }
}
