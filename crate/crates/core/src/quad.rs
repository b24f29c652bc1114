//! Small quadrature, interpolation and fitting helpers shared by the
//! recovery and diagnostics code.

/// Cumulative integral of `y` over the nodes `x` using the cubic Hermite
/// rule `Δ/2·(a + b) + Δ²/12·(a' - b')`, starting from `init`.
pub fn hermite_cumulative(x: &[f64], y: &[f64], dy: &[f64], init: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = init;
    out.push(acc);
    for k in 1..x.len() {
        let h = x[k] - x[k - 1];
        acc += 0.5 * h * (y[k - 1] + y[k]) + h * h / 12.0 * (dy[k - 1] - dy[k]);
        out.push(acc);
    }
    out
}

/// Cubic Hermite interpolant on `[x0, x1]` and its derivative.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let deriv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, deriv)
}

/// Index `k` with `x[k] <= v <= x[k+1]` for sorted `x` (clamped to the ends).
pub fn bracket(x: &[f64], v: f64) -> usize {
    let k = x.partition_point(|&a| a <= v);
    k.saturating_sub(1).min(x.len().saturating_sub(2))
}

/// Least-squares fit of `y = a + b·x`; returns `(b, a)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Finite-difference weights for the first derivative at `x0` on the nodes
/// `xs` (Fornberg's recursion).
pub fn first_derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[j][m]: weight of node j for the m-th derivative, m = 0, 1.
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for m in (1..=mn).rev() {
                    c[i][m] = c1 * (m as f64 * c[i - 1][m - 1] - c5 * c[i - 1][m]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for m in (1..=mn).rev() {
                c[j][m] = (c4 * c[j][m] - m as f64 * c[j][m - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}
