//! The three period integrals of dx/√δ.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::quadrature::{gauss_chebyshev, gauss_legendre, tanh_sinh};
use crate::error::{Error, Result};
use crate::kernel::{BranchPoints, Kernel};

/// Relative change allowed between the last two quadrature levels.
const LEVEL_AGREEMENT: f64 = 1e-10;
/// Relative agreement required between the two independent schemes, when
/// the cross-check scheme has itself settled.
const SCHEME_AGREEMENT: f64 = 1e-9;

/// ω1 (purely imaginary), ω2, ω3. At the critical point ω1 is i·∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodTriple {
    pub omega1: Complex64,
    pub omega2: f64,
    pub omega3: f64,
}

impl PeriodTriple {
    pub fn is_critical(&self) -> bool {
        self.omega1.im.is_infinite()
    }
}

/// |δ| written as |lead|·∏|x − r| over the finite branch points, with the
/// factors of the integration endpoints supplied separately.
struct Factored {
    lead: f64,
    roots: Vec<f64>,
}

impl Factored {
    fn new(k: &Kernel, bp: &BranchPoints) -> Self {
        let x4 = bp.x.r[3];
        let (lead, roots) = if x4.is_finite() {
            (k.delta.coeff(4), bp.x.r.to_vec())
        } else {
            (k.delta.coeff(3), bp.x.r[..3].to_vec())
        };
        Self { lead, roots }
    }

    /// |lead|·∏_{i ∉ skip}|x − r_i|, each difference formed from the nearer
    /// endpoint of [a, b] so that clustered roots keep their precision.
    fn rest(&self, skip: &[usize], a: f64, b: f64, da: f64, db: f64) -> f64 {
        let near_a = da <= db;
        self.roots
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, &r)| if near_a { ((a - r) + da).abs() } else { ((b - r) - db).abs() })
            .product::<f64>()
            * self.lead.abs()
    }
}

fn settled(name: &'static str, est: super::quadrature::Estimate) -> Result<f64> {
    if !est.value.is_finite() || est.relative_change() > LEVEL_AGREEMENT {
        return Err(Error::QuadratureDisagreement {
            integral: name,
            detail: format!("value {} changed by {} on the last halving", est.value, est.last_change),
        });
    }
    Ok(est.value)
}

/// Compares against the cross-check value when that value converged.
fn cross_check(name: &'static str, primary: f64, check: Option<f64>) -> Result<()> {
    if let Some(v) = check {
        let rel = (v - primary).abs() / primary.abs();
        if rel > SCHEME_AGREEMENT {
            return Err(Error::QuadratureDisagreement {
                integral: name,
                detail: format!("double-exponential {primary} vs cross-check {v}"),
            });
        }
    }
    Ok(())
}

/// Gauss–Chebyshev with doubling node counts; `None` if it never settles.
fn chebyshev_settled(a: f64, b: f64, g: impl Fn(f64) -> f64) -> Option<f64> {
    let mut prev = gauss_chebyshev(a, b, 32, &g);
    let mut n = 64;
    while n <= 8192 {
        let next = gauss_chebyshev(a, b, n, &g);
        if (next - prev).abs() <= 1e-13 * next.abs() {
            return Some(next);
        }
        prev = next;
        n *= 2;
    }
    None
}

/// Integral over an interval whose two endpoints are the branch points
/// with indices `ia < ib`; `sign` is the required sign of δ inside.
fn two_sided(f: &Factored, k: &Kernel, ia: usize, ib: usize, sign: f64, name: &'static str) -> Result<f64> {
    let (a, b) = (f.roots[ia], f.roots[ib]);
    if sign * k.delta.eval(0.5 * (a + b)) <= 0.0 {
        return Err(Error::NegativeIntegrand(name));
    }
    let skip = [ia, ib];
    let est = tanh_sinh(a, b, |_, da, db| 1.0 / (da * db * f.rest(&skip, a, b, da, db)).sqrt());
    let value = settled(name, est)?;
    let check = chebyshev_settled(a, b, |x| 1.0 / f.rest(&skip, a, b, x - a, b - x).sqrt());
    cross_check(name, value, check)?;
    Ok(value)
}

/// ∫_{X(y1)}^{x1} dx/√δ: only the right endpoint is a branch point.
fn one_sided(f: &Factored, k: &Kernel, a: f64, name: &'static str) -> Result<f64> {
    let b = f.roots[0];
    if a == f64::NEG_INFINITY {
        return to_minus_infinity(f, k, name);
    }
    if !(a < b) || k.delta.eval(0.5 * (a + b)) <= 0.0 {
        return Err(Error::NegativeIntegrand(name));
    }
    let skip = [0];
    let est = tanh_sinh(a, b, |_, da, db| 1.0 / (db * f.rest(&skip, a, b, da, db)).sqrt());
    let value = settled(name, est)?;
    // x = b − (b − a)v² removes the singularity at b
    let width = b - a;
    let gl = |n: usize| {
        let (nodes, weights) = gauss_legendre(n);
        nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| {
                let v = 0.5 * (s + 1.0);
                let db = width * v * v;
                let da = width - db;
                0.5 * w * 2.0 * width.sqrt() / f.rest(&skip, a, b, da, db).sqrt()
            })
            .sum::<f64>()
    };
    let (g1, g2) = (gl(48), gl(96));
    let check = ((g1 - g2).abs() <= 1e-13 * g2.abs()).then_some(g2);
    cross_check(name, value, check)?;
    Ok(value)
}

/// ∫_{−∞}^{x1} dx/√δ through x = x1 − (1 − s)/s.
fn to_minus_infinity(f: &Factored, k: &Kernel, name: &'static str) -> Result<f64> {
    let b = f.roots[0];
    if k.delta.eval(b - 1.0 - b.abs()) <= 0.0 {
        return Err(Error::NegativeIntegrand(name));
    }
    let skip = [0];
    let rest = |s: f64, db: f64| -> f64 {
        let gap = db / s;
        f.roots
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, &r)| ((b - r) - gap).abs())
            .product::<f64>()
            * f.lead.abs()
    };
    // dx = ds/s², b − x = (1 − s)/s
    let est = tanh_sinh(0.0, 1.0, |_, s, db| 1.0 / (s * s * (db / s * rest(s, db)).sqrt()));
    settled(name, est)
}

/// ω1 = i∫_{x1}^{x2} dx/√(−δ), ω2 = ∫_{x2}^{x3} dx/√δ, ω3 = ∫_{X(y1)}^{x1} dx/√δ.
///
/// When x2 = x3 (the critical case) ω1 is reported as i·∞ and ω2 takes its
/// limiting value π/√(−δ″(x2)/2).
pub fn period_integrals(k: &Kernel, bp: &BranchPoints) -> Result<PeriodTriple> {
    let f = Factored::new(k, bp);
    let [_, x2, x3, _] = bp.x.r;
    let critical = x3 - x2 <= 1e-12 * x2.abs().max(1.0);
    let (omega1, omega2) = if critical {
        let dpp = k.delta.derivative().derivative().eval(x2);
        if !(dpp < 0.0) {
            return Err(Error::NegativeIntegrand("omega2"));
        }
        (Complex64::new(0.0, f64::INFINITY), PI / (-0.5 * dpp).sqrt())
    } else {
        let w1 = two_sided(&f, k, 0, 1, -1.0, "omega1")?;
        let w2 = two_sided(&f, k, 1, 2, 1.0, "omega2")?;
        (Complex64::new(0.0, w1), w2)
    };
    let x_y1 = k.x_y1(bp);
    let omega3 = one_sided(&f, k, x_y1, "omega3")?;
    Ok(PeriodTriple { omega1, omega2, omega3 })
}
