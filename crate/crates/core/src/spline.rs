//! Uniform-grid cubic splines with not-a-knot end conditions.
//!
//! Stored as nodal second derivatives; evaluation is the usual piecewise
//! cubic in terms of the bracketing nodes.

/// Nodal second derivatives of the not-a-knot cubic spline through `values`
/// at uniform spacing `h`. Requires at least 4 points.
pub fn second_derivatives(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "not-a-knot spline needs at least 4 points");
    let h2 = h * h;
    let r = |i: usize| 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / h2;

    let mut m = vec![0.0; n];
    // Not-a-knot at both ends makes the first and last interior unknowns
    // decouple: substituting m0 = 2 m1 - m2 into row 1 gives 6 m1 = r1.
    m[1] = r(1) / 6.0;
    m[n - 2] = r(n - 2) / 6.0;

    if n > 5 {
        // Thomas algorithm for m[2..n-3] with m[1], m[n-2] known.
        let k = n - 4; // unknowns m[2] .. m[n-3]
        let mut diag = vec![4.0; k];
        let mut rhs = vec![0.0; k];
        for (j, item) in rhs.iter_mut().enumerate() {
            *item = r(j + 2);
        }
        rhs[0] -= m[1];
        rhs[k - 1] -= m[n - 2];
        for j in 1..k {
            let w = 1.0 / diag[j - 1];
            diag[j] -= w;
            rhs[j] -= w * rhs[j - 1];
        }
        m[k + 1] = rhs[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            m[j + 2] = (rhs[j] - m[j + 3]) / diag[j];
        }
    } else if n == 5 {
        m[2] = (r(2) - m[1] - m[3]) / 4.0;
    }

    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

/// Value and first derivative of the spline at `x`, given nodal values,
/// second derivatives, origin and spacing. `x` must lie inside the node span.
pub fn eval_with_derivative(values: &[f64], m: &[f64], x0: f64, h: f64, x: f64) -> (f64, f64) {
    let n = values.len();
    let mut i = ((x - x0) / h).floor() as isize;
    i = i.clamp(0, n as isize - 2);
    let i = i as usize;
    let tau = (x - (x0 + i as f64 * h)) / h;
    let om = 1.0 - tau;
    let val = values[i] * om
        + values[i + 1] * tau
        + h * h / 6.0 * ((tau * tau * tau - tau) * m[i + 1] + (om * om * om - om) * m[i]);
    let deriv = (values[i + 1] - values[i]) / h
        + h / 6.0 * ((3.0 * tau * tau - 1.0) * m[i + 1] - (3.0 * om * om - 1.0) * m[i]);
    (val, deriv)
}
