//! Step sets, the Laplace transform φ, the critical value t0, and
//! exponential tilting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::HarmonicGrid;
use crate::tol::Tolerances;

/// The eight non-trivial small steps, clockwise from north-east.
pub const CLOCKWISE: [(i32, i32); 8] = [
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
];

/// Validated transition weights p[k,l], k,l ∈ {−1,0,1}.
///
/// Stored as `w[k + 1][l + 1]`. Construction goes through [`StepSet::validate`],
/// so a value of this type always satisfies the small-steps and
/// non-degeneracy hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSet {
    w: [[f64; 3]; 3],
}

/// Model file layout: rows are l = +1, 0, −1 and columns are k = −1, 0, +1,
/// matching the picture of the lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub weights: [[f64; 3]; 3],
}

impl StepSet {
    /// Validates a raw array indexed `raw[k + 1][l + 1]`.
    pub fn validate(raw: [[f64; 3]; 3]) -> Result<Self> {
        Self::validate_with(raw, &Tolerances::default())
    }

    pub fn validate_with(raw: [[f64; 3]; 3], tol: &Tolerances) -> Result<Self> {
        for k in -1..=1 {
            for l in -1..=1 {
                let v = raw[(k + 1) as usize][(l + 1) as usize];
                if !v.is_finite() {
                    return Err(Error::NonFinite("step weights"));
                }
                if v < 0.0 {
                    return Err(Error::NegativeWeight { k, l, value: v });
                }
            }
        }
        if raw[1][1] != 0.0 {
            return Err(Error::CenterNonzero { value: raw[1][1] });
        }
        let sum: f64 = raw.iter().flatten().sum();
        let mut w = raw;
        if (sum - 1.0).abs() > tol.weight_sum {
            if (sum - 1.0).abs() > tol.renormalize {
                return Err(Error::SumNotOne { sum });
            }
            w.iter_mut().flatten().for_each(|v| *v /= sum);
        }
        for start in 0..8 {
            let zero = |i: usize| {
                let (k, l) = CLOCKWISE[(start + i) % 8];
                w[(k + 1) as usize][(l + 1) as usize] == 0.0
            };
            if zero(0) && zero(1) && zero(2) {
                let (k, l) = CLOCKWISE[start];
                return Err(Error::ThreeConsecutiveZeros { k, l });
            }
        }
        Ok(Self { w })
    }

    /// Builds a raw array from `((k, l), weight)` pairs and validates it.
    pub fn from_pairs(pairs: &[((i32, i32), f64)]) -> Result<Self> {
        let mut raw = [[0.0; 3]; 3];
        for &((k, l), v) in pairs {
            if k.abs() > 1 || l.abs() > 1 {
                return Err(Error::Input(format!("step ({k},{l}) is not a small step")));
            }
            raw[(k + 1) as usize][(l + 1) as usize] += v;
        }
        Self::validate(raw)
    }

    pub fn from_model(file: &ModelFile) -> Result<Self> {
        let mut raw = [[0.0; 3]; 3];
        for (row, l) in [1i32, 0, -1].into_iter().enumerate() {
            for (col, k) in [-1i32, 0, 1].into_iter().enumerate() {
                raw[(k + 1) as usize][(l + 1) as usize] = file.weights[row][col];
            }
        }
        Self::validate(raw)
    }

    pub fn to_model(&self) -> ModelFile {
        let mut weights = [[0.0; 3]; 3];
        for (row, l) in [1i32, 0, -1].into_iter().enumerate() {
            for (col, k) in [-1i32, 0, 1].into_iter().enumerate() {
                weights[row][col] = self.p(k, l);
            }
        }
        ModelFile { weights }
    }

    /// p[k,l]; zero outside the small-step range.
    #[inline]
    pub fn p(&self, k: i32, l: i32) -> f64 {
        if k.abs() > 1 || l.abs() > 1 {
            return 0.0;
        }
        self.w[(k + 1) as usize][(l + 1) as usize]
    }

    pub fn raw(&self) -> [[f64; 3]; 3] {
        self.w
    }

    /// Iterates over the non-zero steps.
    pub fn steps(&self) -> impl Iterator<Item = ((i32, i32), f64)> + '_ {
        (-1..=1)
            .flat_map(|k| (-1..=1).map(move |l| (k, l)))
            .map(|(k, l)| ((k, l), self.p(k, l)))
            .filter(|&(_, v)| v != 0.0)
    }

    /// True when only the four axis steps carry weight.
    pub fn is_simple(&self) -> bool {
        self.steps().all(|((k, l), _)| k == 0 || l == 0)
    }

    pub fn drift(&self) -> (f64, f64) {
        self.steps()
            .fold((0.0, 0.0), |(m1, m2), ((k, l), p)| (m1 + k as f64 * p, m2 + l as f64 * p))
    }

    pub fn reflect_x(&self) -> Self {
        self.remap(|k, l| (-k, l))
    }

    pub fn reflect_y(&self) -> Self {
        self.remap(|k, l| (k, -l))
    }

    pub fn transpose(&self) -> Self {
        self.remap(|k, l| (l, k))
    }

    fn remap(&self, f: impl Fn(i32, i32) -> (i32, i32)) -> Self {
        let mut w = [[0.0; 3]; 3];
        for k in -1..=1 {
            for l in -1..=1 {
                let (k2, l2) = f(k, l);
                w[(k2 + 1) as usize][(l2 + 1) as usize] = self.p(k, l);
            }
        }
        Self { w }
    }
}

impl fmt::Display for StepSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in [1, 0, -1] {
            writeln!(f, "{:>10.6} {:>10.6} {:>10.6}", self.p(-1, l), self.p(0, l), self.p(1, l))?;
        }
        Ok(())
    }
}

/// Exponents a = (a1, a2) of an exponential change of measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltVector {
    pub a1: f64,
    pub a2: f64,
}

impl TiltVector {
    pub fn new(a1: f64, a2: f64) -> Self {
        Self { a1, a2 }
    }

    pub const ZERO: TiltVector = TiltVector { a1: 0.0, a2: 0.0 };

    pub fn dot(&self, i: f64, j: f64) -> f64 {
        self.a1 * i + self.a2 * j
    }
}

/// φ(a) = Σ p[k,l] e^{k a1 + l a2}.
pub fn phi(s: &StepSet, a: TiltVector) -> f64 {
    s.steps().map(|((k, l), p)| p * a.dot(k as f64, l as f64).exp()).sum()
}

fn phi_grad_hess(s: &StepSet, a: TiltVector) -> (f64, [f64; 2], [[f64; 3]; 1]) {
    let mut v = 0.0;
    let mut g = [0.0; 2];
    let (mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0);
    for ((k, l), p) in s.steps() {
        let (k, l) = (k as f64, l as f64);
        let e = p * a.dot(k, l).exp();
        v += e;
        g[0] += k * e;
        g[1] += l * e;
        h11 += k * k * e;
        h12 += k * l * e;
        h22 += l * l * e;
    }
    (v, g, [[h11, h12, h22]])
}

/// ∇φ(a).
pub fn phi_gradient(s: &StepSet, a: TiltVector) -> (f64, f64) {
    let (_, g, _) = phi_grad_hess(s, a);
    (g[0], g[1])
}

/// The minimum t0 of φ and its minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalData {
    pub t0: f64,
    pub a_star: TiltVector,
}

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_GRAD_TOL: f64 = 1e-10;

/// Damped Newton iteration on ∇φ = 0 from the origin.
pub fn solve_t0(s: &StepSet) -> Result<CriticalData> {
    let mut a = TiltVector::ZERO;
    let (mut val, mut g, mut h) = phi_grad_hess(s, a);
    for _ in 0..NEWTON_MAX_ITER {
        let gnorm = g[0].hypot(g[1]);
        if gnorm <= NEWTON_GRAD_TOL * 1e-2 {
            break;
        }
        let [h11, h12, h22] = h[0];
        let det = h11 * h22 - h12 * h12;
        if !(det > 0.0) {
            return Err(Error::NoConvergence { iterations: 0, gradient: gnorm });
        }
        let d1 = -(h22 * g[0] - h12 * g[1]) / det;
        let d2 = -(-h12 * g[0] + h11 * g[1]) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = TiltVector::new(a.a1 + step * d1, a.a2 + step * d2);
            let (tv, tg, th) = phi_grad_hess(s, trial);
            // near the minimum φ only changes at rounding level, so a step
            // that shrinks the gradient is taken even without a visible decrease
            let flat = tv <= val * (1.0 + 8.0 * f64::EPSILON);
            if tv < val || (flat && tg[0].hypot(tg[1]) < gnorm) {
                a = trial;
                val = tv;
                g = tg;
                h = th;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // φ is flat to rounding here: the minimizer has been reached.
            break;
        }
    }
    let gnorm = g[0].hypot(g[1]);
    if gnorm > NEWTON_GRAD_TOL {
        return Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, gradient: gnorm });
    }
    Ok(CriticalData { t0: val, a_star: a })
}

/// The three t-Martin-boundary regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Empty,
    Point,
    Segment,
}

/// Regime of `t` relative to a known `t0`.
pub fn classify_with_t0(t0: f64, t: f64, tol: f64) -> Regime {
    if t < t0 - tol {
        Regime::Empty
    } else if t > t0 + tol {
        Regime::Segment
    } else {
        Regime::Point
    }
}

pub fn classify(s: &StepSet, t: f64) -> Result<Regime> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveT { t });
    }
    let crit = solve_t0(s)?;
    Ok(classify_with_t0(crit.t0, t, Tolerances::default().classify))
}

/// Point of the level set {φ = t} on the ray from the minimizer in direction `d`.
pub fn level_point(s: &StepSet, crit: &CriticalData, t: f64, d: (f64, f64)) -> Result<TiltVector> {
    let norm = d.0.hypot(d.1);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Input("direction must be a non-zero finite vector".into()));
    }
    let (d1, d2) = (d.0 / norm, d.1 / norm);
    if t <= crit.t0 {
        if crit.t0 - t > Tolerances::default().classify {
            return Err(Error::BelowCritical { t, t0: crit.t0 });
        }
        return Ok(crit.a_star);
    }
    let at = |r: f64| TiltVector::new(crit.a_star.a1 + r * d1, crit.a_star.a2 + r * d2);
    let excess = |r: f64| phi(s, at(r)) - t;
    let mut hi = 1.0;
    while excess(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Input("level set not reached along the direction".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = if excess(lo).abs() <= excess(hi).abs() { lo } else { hi };
    Ok(at(r))
}

const LEVEL_TOL: f64 = 1e-10;

/// Tilted weights p[k,l] e^{⟨a,(k,l)⟩} / t, which form a step set when φ(a) = t.
pub fn tilt(s: &StepSet, a: TiltVector, t: f64) -> Result<StepSet> {
    let mismatch = (phi(s, a) - t).abs();
    if mismatch > LEVEL_TOL {
        return Err(Error::LevelMismatch { mismatch });
    }
    let mut raw = [[0.0; 3]; 3];
    for ((k, l), p) in s.steps() {
        raw[(k + 1) as usize][(l + 1) as usize] = p * a.dot(k as f64, l as f64).exp() / t;
    }
    StepSet::validate(raw)
}

/// Multiplies f(i,j) by e^{−sign·⟨a,(i,j)⟩}.
///
/// `sign = +1` maps a t-harmonic function to a 1-harmonic function of the
/// tilted walk; `sign = −1` undoes it.
pub fn transfer_harmonic(grid: &HarmonicGrid, a: TiltVector, sign: i32) -> Result<HarmonicGrid> {
    let n = grid.n();
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    let corner = (a.a1.abs() + a.a2.abs()) * n as f64;
    if corner > 700.0 {
        return Err(Error::Overflow { exponent: corner });
    }
    let mut out = grid.clone();
    for i in 0..=n {
        for j in 0..=n {
            let factor = (-s * a.dot(i as f64, j as f64)).exp();
            out.set(i, j, grid.get(i, j) * factor);
        }
    }
    Ok(out)
}
