//! Quasi-uniform grid on the semi-infinite pseudo-space.
//!
//! Uniform reference nodes on [0, 1) are mapped to [0, inf) by the
//! logarithmic rule x(xi) = -c ln(1 - xi). Half-index spacings are computed
//! through the same map at fractional arguments, including the analytic
//! continuation at xi = -1/(2N) for the ghost half-node.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PseudoGrid {
    /// Node count on the reference grid.
    pub n: usize,
    /// Mapping scale; about 63% of nodes land in [0, c].
    pub c: f64,
    /// Reference spacing, 1/N.
    pub d: f64,
    /// Reference nodes xi_n = n/N, n = 0..N-1.
    pub xi: Vec<f64>,
    /// Mapped nodes x_n = -c ln(1 - xi_n).
    pub x: Vec<f64>,
    /// psi_n = x(n+1/2) - x(n-1/2), n = 0..N-2.
    pub psi: Vec<f64>,
    /// zeta_n = x(n+3/4) - x(n+1/4), n = 0..N-2.
    pub zeta: Vec<f64>,
}

impl PseudoGrid {
    pub fn build(n: usize, c: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 nodes (4-node boundary stencil), got {n}"
            )));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("mapping scale c must be positive, got {c}")));
        }
        let d = 1.0 / n as f64;
        let map = |xi: f64| -c * (1.0 - xi).ln();
        let xi: Vec<f64> = (0..n).map(|i| i as f64 * d).collect();
        let x: Vec<f64> = xi.iter().map(|&v| map(v)).collect();
        let psi: Vec<f64> = (0..n - 1)
            .map(|i| map((i as f64 + 0.5) * d) - map((i as f64 - 0.5) * d))
            .collect();
        let zeta: Vec<f64> = (0..n - 1)
            .map(|i| map((i as f64 + 0.75) * d) - map((i as f64 + 0.25) * d))
            .collect();
        debug_assert!(x[0] == 0.0);
        debug_assert!(x.windows(2).all(|w| w[1] > w[0]));
        debug_assert!(psi.iter().chain(&zeta).all(|&v| v > 0.0));
        Ok(Self { n, c, d, xi, x, psi, zeta })
    }

    /// The logarithmic map x(xi), valid for xi < 1 including negative xi.
    pub fn map(&self, xi: f64) -> f64 {
        -self.c * (1.0 - xi).ln()
    }
}
