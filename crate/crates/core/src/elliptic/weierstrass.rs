//! Weierstrass ℘ for a lattice given by two generators.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::carlson::carlson_rf;
use crate::error::{Error, Result};

const Q_TERMS: usize = 60;
const EISENSTEIN_TERMS: usize = 30;

/// A period lattice Z·ga + Z·gb with its invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub ga: Complex64,
    pub gb: Complex64,
    pub g2: Complex64,
    pub g3: Complex64,
    /// ℘(ga/2), ℘(gb/2), ℘((ga+gb)/2).
    pub e: [Complex64; 3],
    reduced: (Complex64, Complex64),
    shortest: f64,
}

fn divisor_power_sum(n: usize, p: i32) -> f64 {
    (1..=n).filter(|d| n % d == 0).map(|d| (d as f64).powi(p)).sum()
}

/// Gauss-reduces a basis so that τ = b/a lies in the standard fundamental
/// domain (Im τ > 0, |Re τ| ≤ ½, |τ| ≥ 1).
fn reduce_basis(ga: Complex64, gb: Complex64) -> Result<(Complex64, Complex64)> {
    let (mut a, mut b) = (ga, gb);
    let tau = b / a;
    if !tau.is_finite() || tau.im.abs() <= 1e-14 * tau.norm() {
        return Err(Error::DegenerateLattice { q: 1.0 });
    }
    if tau.im < 0.0 {
        b = -b;
    }
    for _ in 0..200 {
        let tau = b / a;
        let n = tau.re.round();
        b -= a * n;
        let tau = b / a;
        if tau.norm() < 1.0 - 1e-15 {
            let old = a;
            a = b;
            b = -old;
        } else {
            break;
        }
    }
    Ok((a, b))
}

impl Lattice {
    /// Invariants g2, g3 from the Eisenstein series in the nome of the
    /// reduced period ratio, and the e-values.
    pub fn new(ga: Complex64, gb: Complex64) -> Result<Self> {
        let (ra, rb) = reduce_basis(ga, gb)?;
        let tau = rb / ra;
        let q = (Complex64::new(0.0, 2.0 * PI) * tau).exp();
        if q.norm() >= 1.0 - 1e-6 {
            return Err(Error::DegenerateLattice { q: q.norm() });
        }
        let mut s3 = Complex64::new(0.0, 0.0);
        let mut s5 = Complex64::new(0.0, 0.0);
        let mut qn = Complex64::new(1.0, 0.0);
        for n in 1..=EISENSTEIN_TERMS {
            qn *= q;
            s3 += qn * divisor_power_sum(n, 3);
            s5 += qn * divisor_power_sum(n, 5);
        }
        let e4 = 1.0 + 240.0 * s3;
        let e6 = 1.0 - 504.0 * s5;
        let g2 = (4.0 * PI.powi(4) / 3.0) * e4 / ra.powi(4);
        let g3 = (8.0 * PI.powi(6) / 27.0) * e6 / ra.powi(6);
        let mut lat = Lattice {
            ga,
            gb,
            g2,
            g3,
            e: [Complex64::new(0.0, 0.0); 3],
            reduced: (ra, rb),
            shortest: ra.norm(),
        };
        let halves = [ga * 0.5, gb * 0.5, (ga + gb) * 0.5];
        let roots = cubic_roots(g2, g3);
        for (slot, h) in halves.iter().enumerate() {
            let approx = lat.wp(*h)?;
            let nearest = roots
                .iter()
                .min_by(|a, b| (**a - approx).norm().total_cmp(&(**b - approx).norm()))
                .copied()
                .unwrap_or(approx);
            lat.e[slot] = nearest;
        }
        Ok(lat)
    }

    pub fn shortest(&self) -> f64 {
        self.shortest
    }

    /// Real coordinates of z in the basis (u, v).
    fn coords(z: Complex64, u: Complex64, v: Complex64) -> (f64, f64) {
        let det = u.re * v.im - u.im * v.re;
        let a = (z.re * v.im - z.im * v.re) / det;
        let b = (u.re * z.im - u.im * z.re) / det;
        (a, b)
    }

    /// z minus the lattice point nearest in reduced coordinates.
    pub fn reduce(&self, z: Complex64) -> Complex64 {
        let (ra, rb) = self.reduced;
        let (a, b) = Self::coords(z, ra, rb);
        let mut best = z - ra * a.round() - rb * b.round();
        // the rounded point can miss the nearest one by a neighbour
        for da in -1..=1 {
            for db in -1..=1 {
                let cand = best - ra * da as f64 - rb * db as f64;
                if cand.norm() < best.norm() {
                    best = cand;
                }
            }
        }
        best
    }

    /// ℘(z) and ℘′(z) from the q-series in the reduced basis (a, b):
    /// ℘ = (2πi/a)²[1/12 + Σ_{n∈Z} T(qⁿx) − 2Σ_{n≥1} n qⁿ/(1 − qⁿ)] with
    /// T(y) = y/(1 − y)², v = z/a, x = e^{2πiv}, q = e^{2πi b/a}. The n = 0
    /// term is written as −1/(4 sin²(πv)) to keep the pole accurate.
    pub fn wp_pair(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if !z.is_finite() {
            return Err(Error::Input("non-finite argument to wp".into()));
        }
        let z = self.reduce(z);
        if z.norm() <= 1e-12 * self.shortest {
            return Err(Error::PoleAtLatticePoint);
        }
        let (ra, rb) = self.reduced;
        let v = z / ra;
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let q = (two_pi_i * (rb / ra)).exp();
        let x = (two_pi_i * v).exp();
        let (sin, cos) = ((v * PI).sin(), (v * PI).cos());
        let mut p = (sin * sin).inv() * (PI * PI) - PI * PI / 3.0;
        let mut dp = -2.0 * PI.powi(3) * cos / (sin * sin * sin);
        let t = |y: Complex64| y / ((1.0 - y) * (1.0 - y));
        let dt = |y: Complex64| y * (1.0 + y) / ((1.0 - y) * (1.0 - y) * (1.0 - y));
        let k2 = two_pi_i * two_pi_i;
        let k3 = k2 * two_pi_i;
        let mut qn = Complex64::new(1.0, 0.0);
        for n in 1..=Q_TERMS {
            qn *= q;
            let (a, b) = (qn * x, qn / x);
            let term = k2 * (t(a) + t(b) - 2.0 * n as f64 * qn / (1.0 - qn));
            p += term;
            dp += k3 * (dt(a) - dt(b));
            if term.norm() <= 1e-18 * p.norm() && a.norm().max(b.norm()) <= 1e-18 {
                break;
            }
        }
        Ok((p / (ra * ra), dp / (ra * ra * ra)))
    }

    pub fn wp(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.wp_pair(z)?.0)
    }

    /// Representative of z modulo the lattice and z ↦ −z: the centered cell
    /// in (ga, gb) coordinates, sign chosen so the ga-coordinate is ≥ 0.
    pub fn representative(&self, z: Complex64) -> Complex64 {
        let (a, b) = Self::coords(z, self.ga, self.gb);
        let (a, b) = (a - a.round(), b - b.round());
        let (a, b) = if a < 0.0 || (a == 0.0 && b < 0.0) { (-a, -b) } else { (a, b) };
        self.ga * a + self.gb * b
    }

    /// z with ℘(z) = v, as [`Lattice::representative`].
    pub fn wp_inverse(&self, v: Complex64) -> Result<Complex64> {
        if !v.is_finite() {
            return Err(Error::Input("wp_inverse needs a finite value".into()));
        }
        let [e1, e2, e3] = self.e;
        let mut z = self.representative(carlson_rf(v - e1, v - e2, v - e3)?);
        let scale = v.norm().max(self.e.iter().map(|e| e.norm()).fold(0.0, f64::max));
        let mut err = f64::INFINITY;
        for _ in 0..5 {
            let (p, dp) = match self.wp_pair(z) {
                Ok(pair) => pair,
                // v = ∞ is excluded, so z = 0 only arises for huge v
                Err(Error::PoleAtLatticePoint) => return Ok(z),
                Err(e) => return Err(e),
            };
            err = (p - v).norm() / scale;
            if err <= 1e-14 || dp.norm() <= 1e-8 * scale {
                break;
            }
            let step = (p - v) / dp;
            if step.norm() > 0.1 * self.shortest {
                break;
            }
            z = self.representative(z - step);
        }
        if err > 1e-9 {
            return Err(Error::RoundTripFailure { error: err });
        }
        Ok(z)
    }
}

/// Roots of 4z³ − g2 z − g3 by Durand–Kerner with Newton polishing.
fn cubic_roots(g2: Complex64, g3: Complex64) -> [Complex64; 3] {
    let f = |z: Complex64| 4.0 * z * z * z - g2 * z - g3;
    let df = |z: Complex64| 12.0 * z * z - g2;
    let scale = g2.norm().sqrt().max(g3.norm().cbrt()).max(1e-300);
    let seed = Complex64::new(0.4, 0.9);
    let mut r = [seed * scale, seed * seed * scale, seed * seed * seed * scale];
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..3 {
            let mut den = Complex64::new(4.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= r[i] - r[j];
                }
            }
            let step = f(r[i]) / den;
            r[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= 1e-16 * scale {
            break;
        }
    }
    for z in r.iter_mut() {
        for _ in 0..3 {
            let d = df(*z);
            if d.norm() == 0.0 {
                break;
            }
            let next = *z - f(*z) / d;
            if f(next).norm() < f(*z).norm() {
                *z = next;
            } else {
                break;
            }
        }
    }
    r
}
