//! Runge-Kutta tableaus, loaded from an embedded table of exact rationals.

use serde::Deserialize;

use crate::error::{Error, Result};

pub const TABLEAU_JSON: &str = include_str!("../data/tableaus.json");

type Rat = [i64; 2];

#[derive(Deserialize)]
struct RawTableau {
    c: Vec<Rat>,
    a: Vec<Vec<Rat>>,
    b: Vec<Rat>,
    #[serde(default)]
    bhat: Option<Vec<Rat>>,
}

#[derive(Deserialize)]
struct RawFile {
    esdirk4: RawTableau,
    erk4: RawTableau,
}

#[derive(Debug, Clone)]
pub struct Tableau {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub bhat: Option<Vec<f64>>,
}

impl Tableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }
}

fn rat(r: Rat) -> f64 {
    r[0] as f64 / r[1] as f64
}

fn convert(raw: RawTableau) -> Result<Tableau> {
    let s = raw.b.len();
    if raw.c.len() != s || raw.a.len() != s || raw.a.iter().any(|row| row.len() != s) {
        return Err(Error::Config("tableau arrays have inconsistent sizes".into()));
    }
    let t = Tableau {
        c: raw.c.into_iter().map(rat).collect(),
        a: raw.a.into_iter().map(|row| row.into_iter().map(rat).collect()).collect(),
        b: raw.b.into_iter().map(rat).collect(),
        bhat: raw.bhat.map(|v| v.into_iter().map(rat).collect()),
    };
    for (i, row) in t.a.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - t.c[i]).abs() > 1e-13 {
            return Err(Error::Config(format!("tableau row {i} sums to {sum}, not c = {}", t.c[i])));
        }
    }
    Ok(t)
}

/// Six-stage stiffly accurate L-stable ESDIRK, order 4, embedded order 3.
pub fn esdirk4() -> Tableau {
    let raw: RawFile = serde_json::from_str(TABLEAU_JSON).expect("embedded tableau parses");
    convert(raw.esdirk4).expect("embedded tableau is consistent")
}

/// Explicit additive partner of [`esdirk4`], sharing c and b.
pub fn erk4() -> Tableau {
    let raw: RawFile = serde_json::from_str(TABLEAU_JSON).expect("embedded tableau parses");
    convert(raw.erk4).expect("embedded tableau is consistent")
}

/// Implicit half of the two-stage midpoint splitting scheme, order 2.
pub fn imex_midpoint_implicit() -> Tableau {
    Tableau {
        c: vec![0.0, 0.5],
        a: vec![vec![0.0, 0.0], vec![0.0, 0.5]],
        b: vec![0.0, 1.0],
        bhat: None,
    }
}

/// Explicit half of the two-stage midpoint splitting scheme.
pub fn imex_midpoint_explicit() -> Tableau {
    Tableau {
        c: vec![0.0, 0.5],
        a: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
        b: vec![0.0, 1.0],
        bhat: None,
    }
}

/// Two-stage trapezoidal rule as a stiffly accurate tableau, order 2.
pub fn trapezoidal() -> Tableau {
    Tableau {
        c: vec![0.0, 1.0],
        a: vec![vec![0.0, 0.0], vec![0.5, 0.5]],
        b: vec![0.5, 0.5],
        bhat: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    /// Guard against accidental edits of the coefficient table.
    #[test]
    fn embedded_table_checksum() {
        let digest = hex::encode(Sha256::digest(TABLEAU_JSON.as_bytes()));
        assert_eq!(digest, "6d285ef0e7f50a6c42f7ea19bca4b46cba2b32bbbf3f413f5071c5874728a531");
    }

    fn order_sums(t: &Tableau) -> (f64, f64, f64) {
        let s = t.stages();
        let p2: f64 = (0..s).map(|i| t.b[i] * t.c[i]).sum();
        let p3: f64 = (0..s).map(|i| t.b[i] * t.c[i] * t.c[i]).sum();
        let p4: f64 = (0..s).map(|i| t.b[i] * t.c[i] * t.c[i] * t.c[i]).sum();
        (p2, p3, p4)
    }

    #[test]
    fn esdirk4_order_conditions() {
        let t = esdirk4();
        assert_eq!(t.stages(), 6);
        assert!((t.b.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let (p2, p3, p4) = order_sums(&t);
        assert!((p2 - 0.5).abs() < 1e-13);
        assert!((p3 - 1.0 / 3.0).abs() < 1e-13);
        assert!((p4 - 0.25).abs() < 1e-13);
        // sum_ij b_i a_ij c_j = 1/6
        let s: f64 = (0..6)
            .map(|i| (0..6).map(|j| t.b[i] * t.a[i][j] * t.c[j]).sum::<f64>())
            .sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-13);
        // Stiff accuracy: last row of a equals b.
        for j in 0..6 {
            assert_eq!(t.a[5][j], t.b[j]);
        }
        // Embedded weights are third order only.
        let bh = t.bhat.as_ref().unwrap();
        assert!((bh.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p2h: f64 = (0..6).map(|i| bh[i] * t.c[i]).sum();
        assert!((p2h - 0.5).abs() < 1e-12);
        let p4h: f64 = (0..6).map(|i| bh[i] * t.c[i].powi(3)).sum();
        assert!((p4h - 0.25).abs() > 1e-6, "embedded weights must differ at order 4");
    }

    #[test]
    fn erk4_order_conditions() {
        let t = erk4();
        let ti = esdirk4();
        assert_eq!(t.c, ti.c);
        assert_eq!(t.b, ti.b);
        for i in 0..6 {
            for j in i..6 {
                assert_eq!(t.a[i][j], 0.0, "explicit tableau must be strictly lower");
            }
        }
        let (p2, p3, p4) = order_sums(&t);
        assert!((p2 - 0.5).abs() < 1e-13);
        assert!((p3 - 1.0 / 3.0).abs() < 1e-13);
        assert!((p4 - 0.25).abs() < 1e-13);
        let s: f64 = (0..6)
            .map(|i| (0..6).map(|j| t.b[i] * t.a[i][j] * t.c[j]).sum::<f64>())
            .sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn midpoint_pair_is_second_order() {
        for t in [imex_midpoint_implicit(), imex_midpoint_explicit()] {
            assert!((t.b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let p2: f64 = (0..2).map(|i| t.b[i] * t.c[i]).sum();
            assert!((p2 - 0.5).abs() < 1e-15);
            for (i, row) in t.a.iter().enumerate() {
                assert!((row.iter().sum::<f64>() - t.c[i]).abs() < 1e-15);
            }
        }
    }
}
