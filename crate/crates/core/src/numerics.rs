//! Small numerical kernels shared by the geometry modules: finite-difference
//! weights, quadrature, tridiagonal solves, root bracketing and an adaptive
//! Runge-Kutta integrator.

use crate::error::{QlError, Result};

/// Parity of a sampled function under reflection through a pole of the
/// polar grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Finite-difference weights (Fornberg) for derivatives of order `0..=m`
/// at `x0` using arbitrary distinct `nodes`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of order `order` of samples `y(x)` on a nonuniform grid using a
/// sliding window of `points` nodes (centered where possible).
pub fn deriv_nonuniform(x: &[f64], y: &[f64], order: usize, points: usize) -> Vec<f64> {
    let n = x.len();
    assert_eq!(n, y.len());
    assert!(n >= points && points > order);
    (0..n)
        .map(|i| {
            let half = points / 2;
            let start = i.saturating_sub(half).min(n - points);
            let nodes = &x[start..start + points];
            let w = fornberg_weights(x[i], nodes, order);
            w[order]
                .iter()
                .zip(&y[start..start + points])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

#[inline]
fn reflect(v: &[f64], j: isize, parity: Parity) -> f64 {
    let n = v.len() as isize - 1;
    let (idx, flip) = if j < 0 {
        (-j, true)
    } else if j > n {
        (2 * n - j, true)
    } else {
        (j, false)
    };
    let val = v[idx as usize];
    if flip && parity == Parity::Odd {
        -val
    } else {
        val
    }
}

/// Fourth-order centered first derivative on a uniform polar grid
/// `t_i = i h`, `i = 0..=n`, with reflection through both poles.
pub fn d1_polar(v: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    (0..v.len() as isize)
        .map(|i| {
            let g = |k: isize| reflect(v, i + k, parity);
            (-g(2) + 8.0 * g(1) - 8.0 * g(-1) + g(-2)) / (12.0 * h)
        })
        .collect()
}

/// Fourth-order centered second derivative on the uniform polar grid.
pub fn d2_polar(v: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    (0..v.len() as isize)
        .map(|i| {
            let g = |k: isize| reflect(v, i + k, parity);
            (-g(2) + 16.0 * g(1) - 30.0 * g(0) + 16.0 * g(-1) - g(-2)) / (12.0 * h * h)
        })
        .collect()
}

/// Centered derivative of order `deriv` on the uniform polar grid using
/// `2·half_width + 1` reflected nodes (accuracy order `2·half_width`).
pub fn polar_derivative(v: &[f64], h: f64, parity: Parity, deriv: usize, half_width: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (-(half_width as isize)..=half_width as isize).map(|j| j as f64).collect();
    let w = fornberg_weights(0.0, &nodes, deriv);
    let scale = h.powi(deriv as i32);
    (0..v.len() as isize)
        .map(|i| {
            let acc: f64 = nodes
                .iter()
                .zip(&w[deriv])
                .map(|(o, c)| c * reflect(v, i + *o as isize, parity))
                .sum();
            acc / scale
        })
        .collect()
}

/// Second-order centered first derivative on the uniform polar grid.
pub fn d1_polar2(v: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    (0..v.len() as isize)
        .map(|i| (reflect(v, i + 1, parity) - reflect(v, i - 1, parity)) / (2.0 * h))
        .collect()
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
pub fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len() - 1;
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even number of intervals");
    let mut s = y[0] + y[n];
    for (i, v) in y.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Clenshaw–Curtis weights for `∫_{-1}^{1} g(x) dx` at `x_i = cos(iπ/n)`.
///
/// Equivalently, `Σ w_i g(t_i) ≈ ∫_0^π g(t) sin t dt` on the uniform polar
/// grid, spectrally accurate for smooth axisymmetric `g`.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "clenshaw_curtis needs an even number of intervals");
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    w[0] = 1.0 / (nf * nf - 1.0);
    w[n] = w[0];
    for (i, wi) in w.iter_mut().enumerate().take(n).skip(1) {
        let th = i as f64 * std::f64::consts::PI / nf;
        let mut v = 1.0;
        for k in 1..n / 2 {
            let kf = k as f64;
            v -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
        }
        v -= (nf * th).cos() / (nf * nf - 1.0);
        *wi = 2.0 * v / nf;
    }
    w
}

/// Trapezoid rule on a nonuniform grid.
pub fn trapz(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Cumulative trapezoid integral starting at zero.
pub fn cumtrapz(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(QlError::Numeric(format!(
            "bisection bracket [{a}, {b}] has no sign change"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(QlError::Numeric("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(QlError::Numeric("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(t, y)`, returning the
/// state at each requested output time (which must be monotone from `t0`).
pub fn dopri45<F>(f: F, t0: f64, y0: &[f64], outputs: &[f64], rtol: f64, atol: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const BS: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(outputs.len());
    let span = outputs.last().map(|e| (e - t0).abs()).unwrap_or(0.0);
    let mut h = (span * 1e-3).max(1e-12);
    for &target in outputs {
        let dir = if target >= t { 1.0 } else { -1.0 };
        let mut guard = 0usize;
        while (target - t).abs() > 1e-14 * (1.0 + t.abs()) {
            guard += 1;
            if guard > 1_000_000 {
                return Err(QlError::Solver("dopri45 exceeded step budget".into()));
            }
            let step = h.min((target - t).abs()) * dir;
            let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let ys: Vec<f64> = (0..dim)
                    .map(|d| y[d] + step * (0..s).map(|j| A[s][j] * k[j][d]).sum::<f64>())
                    .collect();
                k.push(f(t + C[s] * step, &ys));
            }
            let y5: Vec<f64> = (0..dim)
                .map(|d| y[d] + step * (0..7).map(|j| B[j] * k[j][d]).sum::<f64>())
                .collect();
            let err = (0..dim)
                .map(|d| {
                    let y4 = y[d] + step * (0..7).map(|j| BS[j] * k[j][d]).sum::<f64>();
                    let sc = atol + rtol * y[d].abs().max(y5[d].abs());
                    ((y5[d] - y4) / sc).powi(2)
                })
                .sum::<f64>()
                / dim as f64;
            let err = err.sqrt();
            if !err.is_finite() {
                return Err(QlError::Numeric("dopri45 produced non-finite state".into()));
            }
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step.abs() * fac;
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clenshaw_curtis_is_spectral() {
        let n = 32;
        let w = clenshaw_curtis(n);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // ∫ exp(cos t) sin t dt = e - 1/e
        let s: f64 = (0..=n)
            .map(|i| w[i] * (i as f64 * std::f64::consts::PI / n as f64).cos().exp())
            .sum();
        assert!((s - (1f64.exp() - (-1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn fornberg_recovers_polynomial_derivatives() {
        let x = [0.0, 0.3, 0.7, 1.2, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let d1 = deriv_nonuniform(&x, &y, 1, 5);
        let d2 = deriv_nonuniform(&x, &y, 2, 5);
        for i in 0..5 {
            assert!((d1[i] - 3.0 * x[i] * x[i]).abs() < 1e-12);
            assert!((d2[i] - 6.0 * x[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn polar_derivatives_respect_parity() {
        let n = 64;
        let h = std::f64::consts::PI / n as f64;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let c: Vec<f64> = t.iter().map(|v| v.cos().powi(2)).collect();
        let d = d1_polar(&c, h, Parity::Even);
        let dd = d2_polar(&c, h, Parity::Even);
        for i in 0..=n {
            assert!((d[i] + (2.0 * t[i]).sin()).abs() < 1e-5);
            assert!((dd[i] + 2.0 * (2.0 * t[i]).cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn quadratures() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let n = 100;
        let h = std::f64::consts::PI / n as f64;
        let y: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin()).collect();
        assert!((simpson(&y, h) - 2.0).abs() < 1e-7);
    }

    #[test]
    fn tridiagonal_and_bisection() {
        let x = solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 0.0], &[3.0, 4.0, 3.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(bisect(|x| x * x + 1.0, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn dopri_exponential() {
        let out = dopri45(|_, y| vec![-y[0]], 0.0, &[1.0], &[1.0, 2.0], 1e-12, 1e-14).unwrap();
        assert!((out[0][0] - (-1f64).exp()).abs() < 1e-11);
        assert!((out[1][0] - (-2f64).exp()).abs() < 1e-11);
    }
}
