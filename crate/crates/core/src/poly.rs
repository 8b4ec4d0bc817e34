//! Small real polynomials with complex evaluation and root finding.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

/// Real polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub c: Vec<f64>,
}

impl Poly {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn eval_c(&self, x: Complex64) -> Complex64 {
        self.c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Poly {
        if self.c.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(self.c.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.c.len().max(other.c.len());
        let get = |p: &Poly, i: usize| p.c.get(i).copied().unwrap_or(0.0);
        Poly::new((0..n).map(|i| get(self, i) - get(other, i)).collect())
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.c.iter().map(|a| a * s).collect())
    }

    /// Coefficient of x^i (zero past the end).
    pub fn coeff(&self, i: usize) -> f64 {
        self.c.get(i).copied().unwrap_or(0.0)
    }

    /// Degree after dropping leading coefficients with |a| ≤ `tol`.
    pub fn degree(&self, tol: f64) -> Option<usize> {
        self.c.iter().rposition(|a| a.abs() > tol)
    }

    /// Roots of the polynomial truncated to `degree`, via companion-matrix
    /// eigenvalues followed by a few Newton steps on the full polynomial.
    ///
    /// The QR iteration can stall on clustered multiple roots; it is capped
    /// and replaced by Aberth iteration in that case.
    pub fn roots(&self, degree: usize) -> Vec<Complex64> {
        if degree == 0 {
            return Vec::new();
        }
        let lead = self.c[degree];
        let companion = DMatrix::from_fn(degree, degree, |i, j| {
            if j == degree - 1 {
                -self.c[i] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let trunc = Poly::new(self.c[..=degree].to_vec());
        let seeds: Vec<Complex64> = match Schur::try_new(companion, f64::EPSILON, 500) {
            Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
            None => trunc.aberth(),
        };
        let d = trunc.derivative();
        seeds
            .into_iter()
            .map(|z0| {
                let mut z = z0;
                for _ in 0..4 {
                    let f = trunc.eval_c(z);
                    let fp = d.eval_c(z);
                    if fp.norm() == 0.0 {
                        break;
                    }
                    let next = z - f / fp;
                    if !next.is_finite() || trunc.eval_c(next).norm() >= f.norm() {
                        break;
                    }
                    z = next;
                }
                z
            })
            .collect()
    }

    /// Simultaneous Aberth–Ehrlich iteration for all roots.
    fn aberth(&self) -> Vec<Complex64> {
        let n = self.c.len() - 1;
        let d = self.derivative();
        let lead = self.c[n].abs();
        let radius = self.c[..n].iter().map(|a| a.abs() / lead).fold(0.0, f64::max) + 1.0;
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(0.5 * radius, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
            .collect();
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for i in 0..n {
                let ratio = self.eval_c(z[i]) / d.eval_c(z[i]);
                let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
                let step = ratio / (1.0 - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    moved = moved.max(step.norm());
                }
            }
            if moved <= 1e-15 * radius {
                break;
            }
        }
        z
    }
}

/// Roots of a y² + b y + c = 0 ordered by modulus, computed without
/// cancellation. Returns `None` for the far root when |a| ≤ `lead_tol`.
pub fn quadratic_roots(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    lead_tol: f64,
) -> (Complex64, Option<Complex64>) {
    if a.norm() <= lead_tol {
        return (-c / b, None);
    }
    let sq = (b * b - 4.0 * a * c).sqrt();
    let plus = b + sq;
    let minus = b - sq;
    let q = -0.5 * if plus.norm() >= minus.norm() { plus } else { minus };
    if q.norm() == 0.0 {
        // b = 0 and c = 0: double root at the origin
        return (Complex64::new(0.0, 0.0), Some(Complex64::new(0.0, 0.0)));
    }
    let r1 = q / a;
    let r2 = c / q;
    if r1.norm() <= r2.norm() {
        (r1, Some(r2))
    } else {
        (r2, Some(r1))
    }
}
