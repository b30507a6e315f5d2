//! Shared helpers for the integration tests.
#![allow(dead_code)]

/// Fornberg finite-difference weights at `x0` for derivatives `0..=m` on `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
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

/// First and second derivative of `f` at `x` from an 11-point centered stencil.
pub fn fd_derivs(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = (-5..=5).map(|i| x + i as f64 * h).collect();
    let w = fd_weights(x, &xs, 2);
    let vals: Vec<f64> = xs.iter().map(|&t| f(t)).collect();
    let d1 = w[1].iter().zip(&vals).map(|(a, b)| a * b).sum();
    let d2 = w[2].iter().zip(&vals).map(|(a, b)| a * b).sum();
    (vals[5], d1, d2)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}
