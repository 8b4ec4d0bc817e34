//! The kernel L(x,y), its coefficient polynomials, branch points, algebraic
//! branches, the curves M and L, and the segment S_t.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::StepSet;
use crate::poly::{quadratic_roots, Poly};

/// Leading coefficients at or below this are treated as exact zeros.
pub const LEAD_TOL: f64 = 1e-14;
/// Imaginary parts below this (relative to max(1,|z|)) are snapped to zero.
pub const SNAP_TOL: f64 = 1e-9;
/// Near-coincident roots closer than this (relative) are merged into a
/// double root.
const MERGE_TOL: f64 = 1e-6;

/// α, β, γ (polynomials in x) and α̃, β̃, γ̃ (polynomials in y).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPolys {
    pub alpha: Poly,
    pub beta: Poly,
    pub gamma: Poly,
    pub alpha_t: Poly,
    pub beta_t: Poly,
    pub gamma_t: Poly,
}

pub fn coeff_polys(s: &StepSet, t: f64) -> CoeffPolys {
    let p = |k, l| s.p(k, l);
    CoeffPolys {
        alpha: Poly::new(vec![p(1, -1), p(0, -1), p(-1, -1)]),
        beta: Poly::new(vec![p(1, 0), -t, p(-1, 0)]),
        gamma: Poly::new(vec![p(1, 1), p(0, 1), p(-1, 1)]),
        alpha_t: Poly::new(vec![p(-1, 1), p(-1, 0), p(-1, -1)]),
        beta_t: Poly::new(vec![p(0, 1), -t, p(0, -1)]),
        gamma_t: Poly::new(vec![p(1, 1), p(1, 0), p(1, -1)]),
    }
}

/// δ = β² − 4αγ and δ̃ = β̃² − 4α̃γ̃.
pub fn discriminants(cp: &CoeffPolys) -> (Poly, Poly) {
    let d = cp.beta.mul(&cp.beta).sub(&cp.alpha.mul(&cp.gamma).scale(4.0));
    let dt = cp.beta_t.mul(&cp.beta_t).sub(&cp.alpha_t.mul(&cp.gamma_t).scale(4.0));
    (d, dt)
}

/// Branch points x1..x4 (or y1..y4), ordered by modulus. An infinite x4 is
/// stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Roots4 {
    pub r: [f64; 4],
}

impl Roots4 {
    pub fn fourth_is_infinite(&self) -> bool {
        self.r[3].is_infinite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoints {
    pub x: Roots4,
    pub y: Roots4,
}

/// L(x,y) = xy(Σ p x^{-k} y^{-l} − t) at fixed t, with cached polynomials.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub step: StepSet,
    pub t: f64,
    pub cp: CoeffPolys,
    pub delta: Poly,
    pub delta_t: Poly,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl Kernel {
    pub fn new(step: StepSet, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::NonPositiveT { t });
        }
        let cp = coeff_polys(&step, t);
        let (delta, delta_t) = discriminants(&cp);
        Ok(Self { step, t, cp, delta, delta_t })
    }

    pub fn eval_l(&self, x: Complex64, y: Complex64) -> Complex64 {
        self.cp.alpha.eval_c(x) * y * y + self.cp.beta.eval_c(x) * y + self.cp.gamma.eval_c(x)
    }

    /// Y0, Y1 at x, |Y0| ≤ |Y1|; Y1 is `None` when α(x) vanishes.
    pub fn y_branches(&self, x: Complex64) -> (Complex64, Option<Complex64>) {
        let cp = &self.cp;
        quadratic_roots(cp.alpha.eval_c(x), cp.beta.eval_c(x), cp.gamma.eval_c(x), LEAD_TOL)
    }

    /// X0, X1 at y, |X0| ≤ |X1|; X1 is `None` when α̃(y) vanishes.
    pub fn x_branches(&self, y: Complex64) -> (Complex64, Option<Complex64>) {
        let cp = &self.cp;
        quadratic_roots(cp.alpha_t.eval_c(y), cp.beta_t.eval_c(y), cp.gamma_t.eval_c(y), LEAD_TOL)
    }

    pub fn y0(&self, x: Complex64) -> Complex64 {
        self.y_branches(x).0
    }

    pub fn x0(&self, y: Complex64) -> Complex64 {
        self.x_branches(y).0
    }

    pub fn branch_points(&self) -> Result<BranchPoints> {
        Ok(BranchPoints {
            x: ordered_roots(&self.delta, "x")?,
            y: ordered_roots(&self.delta_t, "y")?,
        })
    }

    /// The double root −β̃(y)/(2α̃(y)) of the x-equation at a branch point y.
    pub fn x_at_branch(&self, y: f64) -> f64 {
        -self.cp.beta_t.eval(y) / (2.0 * self.cp.alpha_t.eval(y))
    }

    /// X(y1), or −∞ when α̃ and β̃ both vanish at y1 = 0 and M passes
    /// through infinity.
    pub fn x_y1(&self, bp: &BranchPoints) -> f64 {
        if self.step.p(-1, 1) == 0.0 && self.step.p(0, 1) == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.x_at_branch(bp.y.r[0])
    }

    /// The double root −β(x)/(2α(x)) of the y-equation at a branch point x.
    pub fn y_at_branch(&self, x: f64) -> f64 {
        -self.cp.beta.eval(x) / (2.0 * self.cp.alpha.eval(x))
    }

    /// Endpoints (x2, X(y2)) of the segment S_t.
    pub fn segment(&self, bp: &BranchPoints) -> (f64, f64) {
        (bp.x.r[1], self.x_at_branch(bp.y.r[1]))
    }

    pub fn segment_s(&self) -> Result<(f64, f64)> {
        Ok(self.segment(&self.branch_points()?))
    }

    /// p′ = Y0(p) for p in S_t.
    pub fn conjugate_point(&self, bp: &BranchPoints, p: f64) -> Result<f64> {
        let (a, b) = self.segment(bp);
        let (lo, hi) = (a.min(b), a.max(b));
        let slack = 1e-9 * hi.abs().max(1.0);
        if !(p >= lo - slack && p <= hi + slack) {
            return Err(Error::OutOfSegment { p, lo, hi });
        }
        if (p - bp.x.r[1]).abs() <= slack {
            return Ok(self.y_at_branch(bp.x.r[1]));
        }
        Ok(self.y0(c(p)).re)
    }

    /// max over n points u on |u| = x of |Y0(u)| / Y0(x).
    pub fn circle_bound_check(&self, x: f64, n: usize) -> f64 {
        let base = self.y0(c(x)).norm();
        (0..n)
            .map(|k| {
                let u = Complex64::from_polar(x, std::f64::consts::TAU * k as f64 / n as f64);
                self.y0(u).norm() / base
            })
            .fold(0.0, f64::max)
    }

    /// The curve M = X([y1, y2]).
    pub fn curve_m(&self, bp: &BranchPoints, n: usize) -> CurveSample {
        sample_curve(bp.y.r[0], bp.y.r[1], n, |y| self.x_branches(y))
    }

    /// The curve L = Y([x1, x2]).
    pub fn curve_l(&self, bp: &BranchPoints, n: usize) -> CurveSample {
        sample_curve(bp.x.r[0], bp.x.r[1], n, |x| self.y_branches(x))
    }
}

/// Points of a curve traced by both branches over a real parameter interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSample {
    pub param: Vec<f64>,
    pub branch0: Vec<Complex64>,
    pub branch1: Vec<Complex64>,
}

fn sample_curve(
    a: f64,
    b: f64,
    n: usize,
    branches: impl Fn(Complex64) -> (Complex64, Option<Complex64>),
) -> CurveSample {
    let n = n.max(8);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut out = CurveSample { param: Vec::with_capacity(n), branch0: Vec::new(), branch1: Vec::new() };
    for k in 0..n {
        let s = mid - half * (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        let (z0, z1) = branches(c(s));
        let z1 = z1.unwrap_or(Complex64::new(f64::INFINITY, 0.0));
        // the two branches are conjugate on the curve; record the upper one first
        let (u, l) = if z0.im >= z1.im { (z0, z1) } else { (z1, z0) };
        out.param.push(s);
        out.branch0.push(u);
        out.branch1.push(l);
    }
    out
}

fn ordered_roots(d: &Poly, var: &str) -> Result<Roots4> {
    let degree = if d.coeff(4).abs() <= LEAD_TOL { 3 } else { 4 };
    let mut roots = d.roots(degree);
    for z in roots.iter_mut() {
        if z.im.abs() <= SNAP_TOL * z.norm().max(1.0) {
            z.im = 0.0;
        }
    }
    merge_double_roots(d, &mut roots);
    if let Some(z) = roots.iter().find(|z| z.im != 0.0) {
        return Err(Error::OrderingViolation(format!(
            "{var}-branch point {z} is not real (t below t0?)"
        )));
    }
    let mut r: Vec<f64> = roots.iter().map(|z| z.re).collect();
    r.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let tie = |a: f64, b: f64| (a.abs() - b.abs()).abs() <= SNAP_TOL * a.abs().max(1.0);
    // ties in modulus: the inner pair takes the negative root first, the
    // outer pair the positive one, so that x2 and x3 are the positive roots
    if tie(r[0], r[1]) && r[0] > r[1] {
        r.swap(0, 1);
    }
    if r.len() == 4 && tie(r[2], r[3]) && r[2] < r[3] {
        r.swap(2, 3);
    }
    let x4 = if degree == 3 { f64::INFINITY } else { r[3] };
    let out = Roots4 { r: [r[0], r[1], r[2], x4] };
    check_pattern(d, &out, var)?;
    Ok(out)
}

fn merge_double_roots(d: &Poly, roots: &mut [Complex64]) {
    let n = roots.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (roots[i], roots[j]);
            let scale = a.norm().max(1.0);
            if (a - b).norm() <= MERGE_TOL * scale && a.im.abs() <= MERGE_TOL * scale {
                let dp = d.derivative();
                let dpp = dp.derivative();
                let mut x = 0.5 * (a.re + b.re);
                for _ in 0..8 {
                    let step = dp.eval(x) / dpp.eval(x);
                    if !step.is_finite() {
                        break;
                    }
                    x -= step;
                    if step.abs() <= 1e-16 * x.abs().max(1.0) {
                        break;
                    }
                }
                roots[i] = c(x);
                roots[j] = c(x);
            }
        }
    }
}

fn check_pattern(d: &Poly, r: &Roots4, var: &str) -> Result<()> {
    let [x1, x2, x3, x4] = r.r;
    let fail = |msg: String| Err(Error::OrderingViolation(format!("{var}: {msg}")));
    // x1 ∈ [−1, 1) holds at t = 1 only; for small t0 it can be below −1
    if !(x1 < x2) {
        return fail(format!("first root {x1} not below the second {x2}"));
    }
    if !(x2 > 0.0 && x3 > 0.0) {
        return fail(format!("roots {x2}, {x3} are not positive"));
    }
    let sign_on = |a: f64, b: f64, want_negative: bool| -> bool {
        if (b - a).abs() <= 1e-9 * a.abs().max(1.0) {
            return true;
        }
        let v = d.eval(0.5 * (a + b));
        if want_negative {
            v < 0.0
        } else {
            v > 0.0
        }
    };
    if !sign_on(x1, x2, true) {
        return fail("discriminant not negative between the first two roots".into());
    }
    if !sign_on(x2, x3, false) {
        return fail("discriminant not positive between the middle roots".into());
    }
    let beyond_ok = if x4.is_finite() && x4 > x3 {
        sign_on(x3, x4, true)
    } else {
        d.eval(2.0 * x3 + 1.0) < 0.0
    };
    if !beyond_ok {
        return fail("discriminant not negative beyond the third root".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::solve_t0;

    fn simple() -> StepSet {
        StepSet::from_pairs(&[((1, 0), 0.25), ((-1, 0), 0.25), ((0, 1), 0.25), ((0, -1), 0.25)])
            .unwrap()
    }

    fn all8() -> StepSet {
        let mut raw = [[0.125; 3]; 3];
        raw[1][1] = 0.0;
        StepSet::validate(raw).unwrap()
    }

    fn skewed() -> StepSet {
        StepSet::from_pairs(&[
            ((1, 1), 0.2),
            ((1, 0), 0.15),
            ((0, 1), 0.15),
            ((-1, -1), 0.1),
            ((-1, 0), 0.1),
            ((0, -1), 0.1),
            ((1, -1), 0.1),
            ((-1, 1), 0.1),
        ])
        .unwrap()
    }

    #[test]
    fn eval_l_examples() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        assert!(k.eval_l(c(0.5), c(0.5)).norm() < 1e-15);
        assert!((k.eval_l(c(1.0), c(1.0)) - c(-0.25)).norm() < 1e-15);
        let k = Kernel::new(skewed(), 1.1).unwrap();
        assert_eq!(k.eval_l(c(0.0), c(0.0)), c(0.2));
    }

    #[test]
    fn eval_l_matches_definition() {
        let s = skewed();
        let k = Kernel::new(s, 1.3).unwrap();
        let x = Complex64::new(0.3, -0.7);
        let y = Complex64::new(-1.1, 0.4);
        let direct: Complex64 = s
            .steps()
            .map(|((a, b), p)| p * x.powi(-a) * y.powi(-b))
            .sum::<Complex64>()
            - 1.3;
        assert!((k.eval_l(x, y) - x * y * direct).norm() < 1e-14);
        // tilde form
        let cp = &k.cp;
        let tilde = cp.alpha_t.eval_c(y) * x * x + cp.beta_t.eval_c(y) * x + cp.gamma_t.eval_c(y);
        assert!((k.eval_l(x, y) - tilde).norm() < 1e-14);
    }

    #[test]
    fn coefficient_polys() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        assert_eq!(k.cp.beta.c, vec![0.25, -1.25, 0.25]);
        let s = skewed();
        let a = coeff_polys(&s, 1.1);
        let b = coeff_polys(&s.transpose(), 1.1);
        assert_eq!(a.alpha_t, b.alpha);
        assert_eq!(a.beta_t, b.beta);
        assert_eq!(a.gamma_t, b.gamma);
    }

    #[test]
    fn simple_walk_discriminant() {
        for t in [1.0, 1.25, 2.0] {
            let k = Kernel::new(simple(), t).unwrap();
            for x in [-2.0, 0.1, 0.7, 3.0] {
                let b: f64 = x * x / 4.0 - t * x + 0.25;
                let expect = b * b - x * x / 4.0;
                assert!((k.delta.eval(x) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn simple_walk_branch_points() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        let bp = k.branch_points().unwrap();
        // δ = (x² − 3x + 1)(x² − 7x + 1)
        let s5 = 5f64.sqrt();
        let s45 = 45f64.sqrt();
        let expect = [(7.0 - s45) / 2.0, (3.0 - s5) / 2.0, (3.0 + s5) / 2.0, (7.0 + s45) / 2.0];
        for (a, b) in bp.x.r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((bp.x.r[1] - 0.3819660).abs() < 1e-7);
        assert!((bp.x.r[0] - 0.1458980).abs() < 1e-7);
        assert_eq!(bp.x, bp.y);
        for r in bp.x.r {
            assert!(k.delta.eval(r).abs() < 1e-10);
        }
    }

    #[test]
    fn critical_simple_walk() {
        let k = Kernel::new(simple(), 1.0).unwrap();
        let bp = k.branch_points().unwrap();
        let s8 = 8f64.sqrt();
        assert!((bp.x.r[0] - (3.0 - s8)).abs() < 1e-12);
        assert!((bp.x.r[1] - 1.0).abs() < 1e-10);
        assert!((bp.x.r[2] - 1.0).abs() < 1e-10);
        assert!((bp.x.r[3] - (3.0 + s8)).abs() < 1e-12);
        let (a, b) = k.segment(&bp);
        assert!((a - 1.0).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn below_critical_is_rejected() {
        let k = Kernel::new(simple(), 0.9).unwrap();
        assert!(matches!(k.branch_points(), Err(Error::OrderingViolation(_))));
    }

    #[test]
    fn degree_three() {
        // p−1,0 = 0 and p−1,−1 = 0 → δ has degree 3
        let s = StepSet::from_pairs(&[((1, 0), 0.3), ((0, -1), 0.3), ((-1, 1), 0.2), ((1, 1), 0.2)])
            .unwrap();
        let k = Kernel::new(s, 1.2).unwrap();
        let bp = k.branch_points().unwrap();
        assert!(bp.x.fourth_is_infinite());
        for r in &bp.x.r[..3] {
            assert!(k.delta.eval(*r).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_walk_has_positive_middle_roots() {
        let s = StepSet::from_pairs(&[((1, 1), 0.25), ((-1, -1), 0.25), ((1, -1), 0.25), ((-1, 1), 0.25)])
            .unwrap();
        let k = Kernel::new(s, 1.2).unwrap();
        let bp = k.branch_points().unwrap();
        let [x1, x2, x3, x4] = bp.x.r;
        assert!(x1 < 0.0 && x2 > 0.0 && x3 > 0.0 && x4 < 0.0);
        assert!((x1 + x2).abs() < 1e-12 && (x3 + x4).abs() < 1e-12);
    }

    #[test]
    fn branches() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        let (y0, y1) = k.y_branches(c(0.5));
        assert!((y0 - 0.5).norm() < 1e-14 && (y1.unwrap() - 2.0).norm() < 1e-14);
        let bp = k.branch_points().unwrap();
        let x2 = bp.x.r[1];
        let (y0, y1) = k.y_branches(c(x2));
        let dbl = k.y_at_branch(x2);
        assert!((y0 - dbl).norm() < 1e-7 && (y1.unwrap() - dbl).norm() < 1e-7);
        assert_eq!(k.x_branches(c(0.7)), k.y_branches(c(0.7)));

        let k = Kernel::new(all8(), 1.1).unwrap();
        let (x0, _) = k.x_branches(c(0.0));
        let (r, _) = quadratic_roots(c(0.125), c(0.125), c(0.125), LEAD_TOL);
        assert!((x0 - r).norm() < 1e-15);

        let s = StepSet::from_pairs(&[((1, 0), 0.3), ((0, 1), 0.2), ((-1, -1), 0.3), ((0, -1), 0.2)])
            .unwrap();
        let k = Kernel::new(s, 1.0).unwrap();
        assert_eq!(k.x0(c(0.0)), c(0.0));
    }

    #[test]
    fn curve_m_examples() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        let bp = k.branch_points().unwrap();
        let m = k.curve_m(&bp, 33);
        assert!(m.branch0[0].im.abs() <= 1e-7);
        assert!((m.branch0[32] - 1.0).norm() <= 1e-7);
        assert!((k.x_at_branch(bp.y.r[1]) - 1.0).abs() < 1e-12);
        for (a, b) in m.branch0.iter().zip(&m.branch1) {
            assert!((a.conj() - b).norm() <= 1e-10 * a.norm().max(1.0));
            // M is the unit circle for the symmetric walk
            assert!((a.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_and_conjugate() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        let bp = k.branch_points().unwrap();
        let (a, b) = k.segment(&bp);
        assert!((a - 0.3819660).abs() < 1e-7 && (b - 1.0).abs() < 1e-12);
        assert!((k.conjugate_point(&bp, 0.5).unwrap() - 0.5).abs() < 1e-14);
        let px2 = k.conjugate_point(&bp, a).unwrap();
        assert!((px2 - k.y_at_branch(a)).abs() < 1e-14);
        assert!(matches!(k.conjugate_point(&bp, 1.5), Err(Error::OutOfSegment { .. })));
        for lam in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let p = a + lam * (b - a);
            let pp = k.conjugate_point(&bp, p).unwrap();
            assert!(k.eval_l(c(p), c(pp)).norm() < 1e-12);
        }
        let y2 = bp.y.r[1];
        assert!((k.y0(c(b)).re - y2).abs() < 1e-7);
    }

    #[test]
    fn circle_bound() {
        let k = Kernel::new(simple(), 1.25).unwrap();
        assert!(k.circle_bound_check(0.5, 64) <= 1.0 + 1e-9);
        assert!((k.circle_bound_check(0.5, 1) - 1.0).abs() < 1e-15);
        let neg = k.y0(c(-0.5)).norm() / k.y0(c(0.5)).norm();
        assert!(neg < 1.0 - 1e-3);
    }

    #[test]
    fn gaps_close_near_t0() {
        for s in [simple(), all8(), skewed()] {
            let t0 = solve_t0(&s).unwrap().t0;
            let bp = Kernel::new(s, t0 + 1e-8).unwrap().branch_points().unwrap();
            assert!((bp.x.r[2] - bp.x.r[1]).abs() <= 1e-3);
            assert!((bp.y.r[2] - bp.y.r[1]).abs() <= 1e-3);
        }
    }
}
