//! Discretely sampled velocity fields: binary I/O plus spline-in-space,
//! linear-in-time interpolation.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::flow::FlowSample;
use crate::spline;

pub const GRID_MAGIC: &[u8; 8] = b"MREGRID1";

/// A time series of velocity snapshots on a rectangular grid.
///
/// Data layout per snapshot is row major with index `iy * nx + ix`. Spline
/// coefficient tables are precomputed on construction, so evaluation is
/// read-only and safe to share across threads.
#[derive(Debug, Clone)]
pub struct GridSeries {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub t0: f64,
    pub dt: f64,
    /// `nt * nx * ny` horizontal velocity samples.
    pub u_data: Vec<f64>,
    /// `nt * nx * ny` vertical velocity samples.
    pub v_data: Vec<f64>,
    /// Per snapshot, per component: second derivatives of the column splines
    /// along y, one column per grid x-index. Same indexing as the data.
    col_m_u: Vec<f64>,
    col_m_v: Vec<f64>,
}

impl GridSeries {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nx: usize,
        ny: usize,
        nt: usize,
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
        t0: f64,
        dt: f64,
        u_data: Vec<f64>,
        v_data: Vec<f64>,
    ) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Config(format!(
                "grid must be at least 4x4 for cubic interpolation, got {nx}x{ny}"
            )));
        }
        if nt < 2 {
            return Err(Error::Config(format!("need at least 2 snapshots, got {nt}")));
        }
        if !(dx > 0.0 && dy > 0.0 && dt > 0.0) {
            return Err(Error::Config(format!("spacings must be positive: dx={dx} dy={dy} dt={dt}")));
        }
        let expected = nt * nx * ny;
        if u_data.len() != expected || v_data.len() != expected {
            return Err(Error::Config(format!(
                "expected {expected} samples per component, got {} / {}",
                u_data.len(),
                v_data.len()
            )));
        }
        let mut g = Self {
            nx, ny, nt, x0, y0, dx, dy, t0, dt, u_data, v_data,
            col_m_u: Vec::new(),
            col_m_v: Vec::new(),
        };
        g.precompute_columns();
        Ok(g)
    }

    fn precompute_columns(&mut self) {
        let (nx, ny, nt) = (self.nx, self.ny, self.nt);
        let mut col = vec![0.0; ny];
        for (data, out) in [(&self.u_data, &mut self.col_m_u), (&self.v_data, &mut self.col_m_v)] {
            out.clear();
            out.resize(nt * nx * ny, 0.0);
            for it in 0..nt {
                let base = it * nx * ny;
                for ix in 0..nx {
                    for iy in 0..ny {
                        col[iy] = data[base + iy * nx + ix];
                    }
                    let m = spline::second_derivatives(&col, self.dy);
                    for iy in 0..ny {
                        out[base + iy * nx + ix] = m[iy];
                    }
                }
            }
        }
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.nx - 1) as f64 * self.dx
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + (self.ny - 1) as f64 * self.dy
    }

    pub fn t_max(&self) -> f64 {
        self.t0 + (self.nt - 1) as f64 * self.dt
    }

    /// Spatial interpolant of one snapshot and component at `(x, y)`.
    /// Returns `(value, d/dx, d/dy)`.
    fn eval_snapshot(&self, comp: usize, it: usize, x: f64, y: f64) -> (f64, f64, f64) {
        let (data, col_m) = if comp == 0 {
            (&self.u_data, &self.col_m_u)
        } else {
            (&self.v_data, &self.col_m_v)
        };
        let base = it * self.nx * self.ny;

        // Stage 1: evaluate every column spline (and its y-derivative) at y.
        let mut vals = vec![0.0; self.nx];
        let mut dvals = vec![0.0; self.nx];
        let n = self.ny;
        let mut i = ((y - self.y0) / self.dy).floor() as isize;
        i = i.clamp(0, n as isize - 2);
        let iy = i as usize;
        let tau = (y - (self.y0 + iy as f64 * self.dy)) / self.dy;
        let om = 1.0 - tau;
        let h = self.dy;
        for ix in 0..self.nx {
            let f0 = data[base + iy * self.nx + ix];
            let f1 = data[base + (iy + 1) * self.nx + ix];
            let m0 = col_m[base + iy * self.nx + ix];
            let m1 = col_m[base + (iy + 1) * self.nx + ix];
            vals[ix] = f0 * om
                + f1 * tau
                + h * h / 6.0 * ((tau * tau * tau - tau) * m1 + (om * om * om - om) * m0);
            dvals[ix] = (f1 - f0) / h
                + h / 6.0 * ((3.0 * tau * tau - 1.0) * m1 - (3.0 * om * om - 1.0) * m0);
        }

        // Stage 2: spline across x through the column values.
        let mx = spline::second_derivatives(&vals, self.dx);
        let (val, ddx) = spline::eval_with_derivative(&vals, &mx, self.x0, self.dx, x);
        let my = spline::second_derivatives(&dvals, self.dx);
        let (ddy, _) = spline::eval_with_derivative(&dvals, &my, self.x0, self.dx, x);
        (val, ddx, ddy)
    }

    /// Interpolated velocity, gradient and material derivative at `(y, t)`.
    pub fn eval(&self, y: Vector2<f64>, t: f64) -> Result<FlowSample> {
        let (px, py) = (y[0], y[1]);
        if !(px >= self.x0 && px <= self.x_max()) {
            return Err(Error::Domain(format!(
                "x = {px} outside grid [{}, {}]",
                self.x0,
                self.x_max()
            )));
        }
        if !(py >= self.y0 && py <= self.y_max()) {
            return Err(Error::Domain(format!(
                "y = {py} outside grid [{}, {}]",
                self.y0,
                self.y_max()
            )));
        }
        if !(t >= self.t0 && t <= self.t_max()) {
            return Err(Error::Domain(format!(
                "t = {t} outside snapshot span [{}, {}]",
                self.t0,
                self.t_max()
            )));
        }

        let mut it = ((t - self.t0) / self.dt).floor() as isize;
        it = it.clamp(0, self.nt as isize - 2);
        let it = it as usize;
        let w = (t - (self.t0 + it as f64 * self.dt)) / self.dt;

        let mut u = Vector2::zeros();
        let mut dudt = Vector2::zeros();
        let mut grad = Matrix2::zeros();
        for comp in 0..2 {
            let (v_a, dx_a, dy_a) = self.eval_snapshot(comp, it, px, py);
            let (v_b, dx_b, dy_b) = self.eval_snapshot(comp, it + 1, px, py);
            u[comp] = (1.0 - w) * v_a + w * v_b;
            // Slope of the linear-in-time blend; piecewise constant in t.
            dudt[comp] = (v_b - v_a) / self.dt;
            grad[(comp, 0)] = (1.0 - w) * dx_a + w * dx_b;
            grad[(comp, 1)] = (1.0 - w) * dy_a + w * dy_b;
        }
        let mat_deriv = dudt + grad * u;
        Ok(FlowSample { u, grad_u: grad, mat_deriv })
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64) -> Result<()> {
    let at = *offset;
    r.read_exact(buf)
        .map_err(|e| Error::Format { offset: at, msg: format!("truncated payload: {e}") })?;
    *offset += buf.len() as u64;
    Ok(())
}

/// Load the little-endian `MREGRID1` binary format.
pub fn load_grid_series(path: &Path) -> Result<GridSeries> {
    let file = std::fs::File::open(path)?;
    let mut r = std::io::BufReader::new(file);
    let mut offset = 0u64;

    let mut magic = [0u8; 8];
    read_exact_at(&mut r, &mut magic, &mut offset)?;
    if &magic != GRID_MAGIC {
        return Err(Error::Format { offset: 0, msg: format!("bad magic {magic:?}") });
    }

    let mut b8 = [0u8; 8];
    let mut read_u64 = |r: &mut std::io::BufReader<std::fs::File>, offset: &mut u64| -> Result<u64> {
        read_exact_at(r, &mut b8, offset)?;
        Ok(u64::from_le_bytes(b8))
    };
    let nx = read_u64(&mut r, &mut offset)? as usize;
    let ny = read_u64(&mut r, &mut offset)? as usize;
    let nt = read_u64(&mut r, &mut offset)? as usize;

    let mut b8 = [0u8; 8];
    let mut read_f64 = |r: &mut std::io::BufReader<std::fs::File>, offset: &mut u64| -> Result<f64> {
        read_exact_at(r, &mut b8, offset)?;
        Ok(f64::from_le_bytes(b8))
    };
    let x0 = read_f64(&mut r, &mut offset)?;
    let y0 = read_f64(&mut r, &mut offset)?;
    let dx = read_f64(&mut r, &mut offset)?;
    let dy = read_f64(&mut r, &mut offset)?;
    let t0 = read_f64(&mut r, &mut offset)?;
    let dt = read_f64(&mut r, &mut offset)?;

    if nx.checked_mul(ny).and_then(|p| p.checked_mul(nt)).is_none() || nx * ny * nt > (1 << 32) {
        return Err(Error::Format { offset, msg: format!("implausible dimensions {nx}x{ny}x{nt}") });
    }
    let per_snapshot = nx * ny;
    let mut u_data = Vec::with_capacity(nt * per_snapshot);
    let mut v_data = Vec::with_capacity(nt * per_snapshot);
    let mut block = vec![0u8; per_snapshot * 8];
    for _ in 0..nt {
        for data in [&mut u_data, &mut v_data] {
            let block_start = offset;
            read_exact_at(&mut r, &mut block, &mut offset)?;
            for (i, chunk) in block.chunks_exact(8).enumerate() {
                let v = f64::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::Format {
                        offset: block_start + 8 * i as u64,
                        msg: format!("non-finite sample {v}"),
                    });
                }
                data.push(v);
            }
        }
    }

    GridSeries::new(nx, ny, nt, x0, y0, dx, dy, t0, dt, u_data, v_data)
}

/// Write the `MREGRID1` binary format; inverse of [`load_grid_series`].
pub fn write_grid_series(g: &GridSeries, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(GRID_MAGIC)?;
    for v in [g.nx as u64, g.ny as u64, g.nt as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [g.x0, g.y0, g.dx, g.dy, g.t0, g.dt] {
        w.write_all(&v.to_le_bytes())?;
    }
    let per_snapshot = g.nx * g.ny;
    for it in 0..g.nt {
        for data in [&g.u_data, &g.v_data] {
            for v in &data[it * per_snapshot..(it + 1) * per_snapshot] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Sample an analytic closure onto a grid; used by tests and fixtures.
#[allow(clippy::too_many_arguments)]
pub fn sample_to_grid(
    f: impl Fn(f64, f64, f64) -> (f64, f64),
    nx: usize,
    ny: usize,
    nt: usize,
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    t0: f64,
    dt: f64,
) -> Result<GridSeries> {
    let mut u_data = Vec::with_capacity(nt * nx * ny);
    let mut v_data = Vec::with_capacity(nt * nx * ny);
    for it in 0..nt {
        let t = t0 + it as f64 * dt;
        for iy in 0..ny {
            for ix in 0..nx {
                let (u, v) = f(x0 + ix as f64 * dx, y0 + iy as f64 * dy, t);
                u_data.push(u);
                v_data.push(v);
            }
        }
    }
    GridSeries::new(nx, ny, nt, x0, y0, dx, dy, t0, dt, u_data, v_data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn tiny_zero_series() -> GridSeries {
        sample_to_grid(|_, _, _| (0.0, 0.0), 4, 4, 2, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        let g = sample_to_grid(
            |x, y, t| ((x * y + t).sin(), (x - y).cos()),
            6, 5, 3, -1.0, 0.5, 0.25, 0.5, 0.0, 0.04,
        )
        .unwrap();
        write_grid_series(&g, &p1).unwrap();
        let g2 = load_grid_series(&p1).unwrap();
        write_grid_series(&g2, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn minimal_zero_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zero.bin");
        write_grid_series(&tiny_zero_series(), &p).unwrap();
        let g = load_grid_series(&p).unwrap();
        assert!(g.u_data.iter().chain(&g.v_data).all(|&v| v == 0.0));
        let s = g.eval(Vector2::new(1.5, 1.5), 0.5).unwrap();
        assert_eq!(s.u, Vector2::zeros());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        write_grid_series(&tiny_zero_series(), &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[3] ^= 0xff;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_grid_series(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trunc.bin");
        write_grid_series(&tiny_zero_series(), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 16]).unwrap();
        assert!(matches!(load_grid_series(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn constant_field_reproduced() {
        let g = sample_to_grid(|_, _, _| (1.0, 0.0), 6, 6, 3, 0.0, 0.0, 0.5, 0.5, 0.0, 1.0).unwrap();
        let s = g.eval(Vector2::new(1.23, 0.77), 1.4).unwrap();
        assert!((s.u[0] - 1.0).abs() < 1e-13);
        assert!(s.u[1].abs() < 1e-13);
        assert!(s.grad_u.norm() < 1e-12);
        assert!(s.mat_deriv.norm() < 1e-12);
    }

    #[test]
    fn linear_shear_gradient_exact() {
        // u = (y, 0): cubic interpolation is exact on linear data.
        let g = sample_to_grid(|_, y, _| (y, 0.0), 8, 8, 2, 0.0, 0.0, 0.5, 0.5, 0.0, 1.0).unwrap();
        let s = g.eval(Vector2::new(1.7, 2.1), 0.3).unwrap();
        assert!((s.grad_u[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((s.u[0] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn cubic_polynomials_reproduced() {
        // Total degree <= 3 in space, linear in t: tensor-product cubic
        // splines plus linear time blending are exact.
        let f = |x: f64, y: f64, t: f64| {
            (
                1.0 + x - 2.0 * y + x * x * y + 0.3 * y * y * y + 0.5 * t * (x + y),
                x * y - x * x * x + t,
            )
        };
        let g = sample_to_grid(f, 9, 7, 3, -1.0, -1.0, 0.25, 0.3, 0.0, 0.5).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for _ in 0..50 {
            let x = rng.random_range(-1.0..1.0);
            let y = rng.random_range(-1.0..0.8);
            let t = rng.random_range(0.0..1.0);
            let s = g.eval(Vector2::new(x, y), t).unwrap();
            let (u, v) = f(x, y, t);
            assert!((s.u[0] - u).abs() < 1e-12, "u at ({x},{y},{t})");
            assert!((s.u[1] - v).abs() < 1e-12, "v at ({x},{y},{t})");
        }
    }

    #[test]
    fn continuity_across_cell_boundaries() {
        let g = sample_to_grid(
            |x, y, t| ((x + 2.0 * y + t).sin(), (x * y).cos()),
            10, 10, 3, 0.0, 0.0, 0.3, 0.3, 0.0, 0.5,
        )
        .unwrap();
        for k in 1..9 {
            let x = 0.3 * k as f64;
            let a = g.eval(Vector2::new(x - 1e-9, 1.234), 0.4).unwrap();
            let b = g.eval(Vector2::new(x + 1e-9, 1.234), 0.4).unwrap();
            assert!((a.u - b.u).norm() < 1e-6 * a.u.norm().max(1.0));
        }
    }

    #[test]
    fn out_of_domain_is_error() {
        let g = tiny_zero_series();
        assert!(g.eval(Vector2::new(-0.1, 1.0), 0.5).is_err());
        assert!(g.eval(Vector2::new(1.0, 3.5), 0.5).is_err());
        assert!(g.eval(Vector2::new(1.0, 1.0), 1.5).is_err());
    }

    #[test]
    fn resampled_vortex_matches_analytic() {
        use crate::flow::{FlowField, VortexField};
        let omega = 1.0;
        let g = sample_to_grid(
            |x, y, _| (-omega * y, omega * x),
            40, 40, 2, -2.0, -2.0, 0.1, 0.1, 0.0, 1.0,
        )
        .unwrap();
        let analytic = FlowField::Vortex(VortexField { omega });
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for _ in 0..50 {
            let y = Vector2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let s = g.eval(y, 0.5).unwrap();
            let a = analytic.eval(y, 0.5).unwrap();
            assert!((s.u - a.u).norm() <= 1e-4 * a.u.norm().max(1.0));
            assert!((s.grad_u - a.grad_u).norm() < 1e-4 * a.grad_u.norm().max(1.0));
        }
    }
}
