//! Quadrature rules.

use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_deriv(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }

    /// `int_a^b f` split into `pieces` equal panels.
    pub fn integrate_composite(&self, a: f64, b: f64, pieces: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / pieces as f64;
        (0..pieces).map(|j| self.integrate(a + j as f64 * h, a + (j + 1) as f64 * h, &mut f)).sum()
    }

    /// `int_0^1 g(s) sqrt(s) ds` for smooth `g`, via `s = u^2`.
    pub fn integrate_sqrt_weight(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.integrate(0.0, 1.0, |u| 2.0 * u * u * g(u * u))
    }
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Clenshaw-Curtis weights for the `n` Chebyshev-Lobatto points `cos(pi j/(n-1))` on [-1, 1].
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = n - 1;
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = PI * j as f64 / m as f64;
        let mut v = 1.0;
        for k in 1..=m / 2 {
            let b = if 2 * k == m { 1.0 } else { 2.0 };
            v -= b * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
        }
        let c = if j == 0 || j == m { 1.0 } else { 2.0 };
        *wj = c * v / m as f64;
    }
    w
}
