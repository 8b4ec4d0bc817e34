//! Quadrature rules for integrands with inverse-square-root endpoint
//! singularities.

use std::f64::consts::{FRAC_PI_2, PI};

/// Result of an adaptive rule: the value and the change produced by the
/// last halving of the node spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub last_change: f64,
}

impl Estimate {
    pub fn relative_change(&self) -> f64 {
        self.last_change / self.value.abs().max(f64::MIN_POSITIVE)
    }
}

const TANH_SINH_T_MAX: f64 = 4.5;
const TANH_SINH_LEVELS: usize = 9;

/// Double-exponential quadrature of ∫_a^b f.
///
/// `f(x, x - a, b - x)` receives both endpoint distances, computed from the
/// transform without cancellation, so that factors like 1/√(x − a) keep
/// full precision next to the endpoints.
pub fn tanh_sinh(a: f64, b: f64, f: impl Fn(f64, f64, f64) -> f64) -> Estimate {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let term = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let da = 2.0 * half / (1.0 + (-2.0 * u).exp());
        let db = 2.0 * half / (1.0 + (2.0 * u).exp());
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let x = if t < 0.0 { a + da } else { b - db };
        let x = if t == 0.0 { mid } else { x };
        let weight = half * FRAC_PI_2 * t.cosh() / (u.cosh() * u.cosh());
        let v = weight * f(x, da, db);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // level 0: h = 1
    let mut h = 1.0;
    let mut sum = term(0.0);
    let mut k = 1.0;
    while k * h <= TANH_SINH_T_MAX {
        sum += term(k * h) + term(-k * h);
        k += 1.0;
    }
    let mut value = h * sum;
    let mut last_change = f64::INFINITY;
    for level in 1..TANH_SINH_LEVELS {
        h *= 0.5;
        let mut odd = 0.0;
        let mut k = 1.0;
        while k * h <= TANH_SINH_T_MAX {
            odd += term(k * h) + term(-k * h);
            k += 2.0;
        }
        sum += odd;
        let next = h * sum;
        last_change = (next - value).abs();
        value = next;
        if level >= 3 && last_change <= 1e-14 * value.abs() {
            break;
        }
    }
    Estimate { value, last_change }
}

/// ∫_a^b g(x) / √((x − a)(b − x)) dx with n Gauss–Chebyshev nodes
/// (x = mid + half·sin θ).
pub fn gauss_chebyshev(a: f64, b: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let s: f64 = (0..n)
        .map(|k| {
            let theta = -FRAC_PI_2 + PI * (k as f64 + 0.5) / n as f64;
            g(mid + half * theta.sin())
        })
        .sum();
    s * PI / n as f64
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
