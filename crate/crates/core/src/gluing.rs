//! The conformal gluing function w of the domain bounded by M.
//!
//! Above t0 the construction goes through two Weierstrass functions:
//! u(x) = ℘_{1,3}(ω − ω2/2) with ℘_{1,2}(ω) = g(x). At t0 the lattice
//! degenerates and u has a closed trigonometric form. In both cases
//! w(x) = u(x0)/(u(x) − u(x0)) − u(x0)/(u(0) − u(x0)).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::elliptic::{period_integrals, Lattice, PeriodTriple};
use crate::error::{Error, Result};
use crate::kernel::{BranchPoints, Kernel};
use crate::model::{CriticalData, StepSet};
use crate::poly::Poly;
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Generic,
    Critical,
}

/// Where the second derivative of δ in the critical formula is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SecondDerivativeAt {
    /// At the double branch point x2 = x3.
    #[default]
    X2,
    /// At the point 1.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GluingOptions {
    pub tol: Tolerances,
    pub second_derivative: SecondDerivativeAt,
    /// Overrides the automatic choice of the reference pole.
    pub x0: Option<f64>,
}

/// The Möbius map g sending the branch points to the e-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GMap {
    /// δ″(x4)/6 + δ′(x4)/(x − x4).
    Finite { x4: f64, c0: f64, c1: f64 },
    /// δ″(0)/6 + δ‴(0)x/6.
    Infinite { c0: f64, c1: f64 },
}

impl GMap {
    pub fn new(delta: &Poly, bp: &BranchPoints) -> Self {
        let d1 = delta.derivative();
        let d2 = d1.derivative();
        let x4 = bp.x.r[3];
        if x4.is_finite() {
            GMap::Finite { x4, c0: d2.eval(x4) / 6.0, c1: d1.eval(x4) }
        } else {
            GMap::Infinite { c0: d2.eval(0.0) / 6.0, c1: d2.derivative().eval(0.0) / 6.0 }
        }
    }

    pub fn eval(&self, x: Complex64) -> Result<Complex64> {
        match *self {
            GMap::Finite { x4, c0, c1 } => {
                let d = x - x4;
                if d.norm() <= 1e-14 * x4.abs().max(1.0) {
                    return Err(Error::PoleAtX4);
                }
                Ok(c0 + c1 / d)
            }
            GMap::Infinite { c0, c1 } => Ok(c0 + c1 * x),
        }
    }
}

/// Angle of the critical cone: θ = arccos(−c/√(ab)) for the covariances
/// a = Σ i²q_ij, b = Σ j²q_ij, c = Σ ij q_ij of the zero-drift weights
/// q_ij = p_ij x2^{−i} y2^{−j} at the double point (x2, y2).
pub fn theta_angle(k: &Kernel, bp: &BranchPoints) -> Result<f64> {
    let (x2, y2) = (bp.x.r[1], bp.y.r[1]);
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for ((i, j), p) in k.step.steps() {
        let q = p * x2.powi(-i) * y2.powi(-j);
        a += (i * i) as f64 * q;
        b += (j * j) as f64 * q;
        c += (i * j) as f64 * q;
    }
    let arg = -c / (a * b).sqrt();
    if !arg.is_finite() || arg.abs() > 1.0 + 1e-10 {
        return Err(Error::OutOfRange { value: arg });
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

#[derive(Debug, Clone)]
enum Core {
    Generic { lat12: Lattice, lat13: Lattice },
    Critical { theta: f64, d2: f64 },
}

/// A conformal gluing function, immutable after construction.
#[derive(Debug, Clone)]
pub struct GluingFn {
    pub kernel: Kernel,
    pub bp: BranchPoints,
    pub mode: Mode,
    pub periods: PeriodTriple,
    pub g: GMap,
    pub x0: f64,
    /// X(y1) and X(y2), the real points of M.
    pub x_y1: f64,
    pub x_y2: f64,
    core: Core,
    u_x0: Complex64,
    u_zero: Complex64,
    scale: f64,
    tol: Tolerances,
}

impl GluingFn {
    /// Builds w at level t. Within `tol.critical` of t0 the kernel is taken
    /// at t0 itself and the trigonometric form is used.
    pub fn new(step: &StepSet, t: f64, crit: &CriticalData, opts: &GluingOptions) -> Result<Self> {
        let tol = opts.tol;
        if t < crit.t0 - tol.critical {
            return Err(Error::BelowCritical { t, t0: crit.t0 });
        }
        let critical = t - crit.t0 <= tol.critical;
        let kernel = Kernel::new(*step, if critical { crit.t0 } else { t })?;
        let bp = kernel.branch_points()?;
        let periods = period_integrals(&kernel, &bp)?;
        Self::from_parts(kernel, bp, periods, critical, opts)
    }

    /// Builds w from explicit periods (used to test the validator against
    /// perturbed data).
    pub fn from_parts(
        kernel: Kernel,
        bp: BranchPoints,
        periods: PeriodTriple,
        critical: bool,
        opts: &GluingOptions,
    ) -> Result<Self> {
        let g = GMap::new(&kernel.delta, &bp);
        let x_y1 = kernel.x_y1(&bp);
        let x_y2 = kernel.x_at_branch(bp.y.r[1]);
        let x2 = bp.x.r[1];
        let core = if critical || periods.is_critical() {
            // ω2 = π/√(−δ″(x2)/2) at the double point
            let d2 = match opts.second_derivative {
                SecondDerivativeAt::X2 if periods.is_critical() && periods.omega2 > 0.0 => {
                    -2.0 * (PI / periods.omega2).powi(2)
                }
                SecondDerivativeAt::X2 => kernel.delta.derivative().derivative().eval(x2),
                SecondDerivativeAt::One => kernel.delta.derivative().derivative().eval(1.0),
            };
            Core::Critical { theta: theta_angle(&kernel, &bp)?, d2 }
        } else {
            Core::Generic {
                lat12: Lattice::new(Complex64::new(periods.omega2, 0.0), periods.omega1)?,
                lat13: Lattice::new(Complex64::new(periods.omega3, 0.0), periods.omega1)?,
            }
        };
        let mode = match core {
            Core::Generic { .. } => Mode::Generic,
            Core::Critical { .. } => Mode::Critical,
        };
        let x0 = match opts.x0 {
            Some(x0) => x0,
            None => default_x0(x_y1, x2, bp.x.r[0]),
        };
        let mut gf = GluingFn {
            kernel,
            bp,
            mode,
            periods,
            g,
            x0,
            x_y1,
            x_y2,
            core,
            u_x0: Complex64::new(0.0, 0.0),
            u_zero: Complex64::new(0.0, 0.0),
            scale: 1.0,
            tol: opts.tol,
        };
        gf.u_x0 = gf.u(Complex64::new(x0, 0.0))?;
        if !gf.u_x0.is_finite() {
            return Err(Error::PoleAtReference);
        }
        // u(0) = ∞ when x1 = 0, and the normalizing term drops out
        gf.u_zero = if gf.at_x1(Complex64::new(0.0, 0.0)) {
            Complex64::new(f64::INFINITY, 0.0)
        } else {
            gf.u(Complex64::new(0.0, 0.0))?
        };
        if gf.u_zero.is_nan() {
            return Err(Error::PoleAtReference);
        }
        Ok(gf)
    }

    /// Copy of self with w multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    pub fn theta(&self) -> Option<f64> {
        match self.core {
            Core::Critical { theta, .. } => Some(theta),
            Core::Generic { .. } => None,
        }
    }

    pub fn lattices(&self) -> Option<(&Lattice, &Lattice)> {
        match &self.core {
            Core::Generic { lat12, lat13 } => Some((lat12, lat13)),
            Core::Critical { .. } => None,
        }
    }

    /// u(x); `Ok(None)` at a pole of u.
    pub fn u_checked(&self, x: Complex64) -> Result<Option<Complex64>> {
        let v = self.g.eval(x)?;
        self.u_of_g(Some(v), x)
    }

    /// u at x = ∞, where g takes the value c0 or is itself infinite.
    pub fn u_at_infinity(&self) -> Result<Option<Complex64>> {
        let v = match self.g {
            GMap::Finite { c0, .. } => Some(Complex64::new(c0, 0.0)),
            GMap::Infinite { .. } => None,
        };
        self.u_of_g(v, Complex64::new(f64::INFINITY, 0.0))
    }

    /// u from the value v = g(x); `None` stands for v = ∞.
    fn u_of_g(&self, v: Option<Complex64>, x: Complex64) -> Result<Option<Complex64>> {
        let u = match &self.core {
            Core::Generic { lat12, lat13 } => {
                let omega = match v {
                    Some(v) => lat12.wp_inverse(v)?,
                    None => Complex64::new(0.0, 0.0),
                };
                match lat13.wp(omega - 0.5 * self.periods.omega2) {
                    Ok(u) => u,
                    Err(Error::PoleAtLatticePoint) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Core::Critical { theta, d2 } => {
                let mut a = match v {
                    Some(v) => {
                        let s = (Complex64::new(1.0 / 3.0, 0.0) - 2.0 * v / *d2).sqrt();
                        if s.norm() == 0.0 {
                            return Err(Error::DomainFault { x: x.re });
                        }
                        s.inv().asin()
                    }
                    None => Complex64::new(0.0, 0.0),
                };
                if a.re < 0.0 {
                    a = -a;
                }
                let sn = ((a - PI / 2.0) * (PI / theta)).sin();
                if sn.norm() == 0.0 {
                    return Ok(None);
                }
                let k = PI / self.periods.omega3;
                (sn * sn).inv().scale(k * k) - k * k / 3.0
            }
        };
        if !u.is_finite() {
            return Err(Error::DomainFault { x: x.re });
        }
        if x.im == 0.0 && x.re > self.x_y1 && x.re < self.bp.x.r[1] && u.im.abs() > self.tol.realness * u.norm().max(1.0) {
            return Err(Error::BranchFault { x: x.re, imag: u.im });
        }
        Ok(Some(u))
    }

    pub fn u(&self, x: Complex64) -> Result<Complex64> {
        self.u_checked(x)?.ok_or(Error::PoleAtLatticePoint)
    }

    pub fn w(&self, x: Complex64) -> Result<Complex64> {
        if (x - self.x0).norm() <= 1e-10 * self.x0.abs().max(1.0) {
            return Err(Error::PoleAtReference);
        }
        let a = self.u_x0;
        let tail = if self.u_zero.is_finite() { a / (self.u_zero - a) } else { Complex64::new(0.0, 0.0) };
        let u = if !x.is_finite() {
            self.u_at_infinity()?
        } else if self.at_x1(x) {
            None
        } else {
            self.u_checked(x)?
        };
        let head = match u {
            Some(u) => a / (u - a),
            None => Complex64::new(0.0, 0.0),
        };
        Ok((head - tail) * self.scale)
    }

    /// True at the branch point x1, where u has its pole.
    fn at_x1(&self, x: Complex64) -> bool {
        let x1 = self.bp.x.r[0];
        (x - x1).norm() <= 1e-12 * x1.abs().max(1.0)
    }

    pub fn w_real(&self, x: f64) -> Result<f64> {
        Ok(self.w(Complex64::new(x, 0.0))?.re)
    }

    /// Distance from 0 to the curve M, from 256 samples.
    pub fn distance_to_m(&self) -> f64 {
        let m = self.kernel.curve_m(&self.bp, 256);
        m.branch0.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// (w′(0), w″(0)) by fourth-order central differences and Richardson
    /// extrapolation over step halvings.
    ///
    /// Convergence is judged relative to the size of the derivative or, when
    /// it vanishes (M through the origin makes w′(0) = 0), to the scale of w
    /// over the initial stencil.
    pub fn derivs_at_0(&self) -> Result<(f64, f64)> {
        let d_m = self.distance_to_m();
        let reach = if d_m > 1e-8 * self.x0.abs() { self.x0.abs().min(d_m) } else { self.x0.abs() };
        let h0 = 0.25 * reach;
        let w0 = self.w_real(0.0)?;
        let spread = (self.w_real(2.0 * h0)? - w0).abs() + (self.w_real(-2.0 * h0)? - w0).abs();
        let scales = [spread / (4.0 * h0), spread / (8.0 * h0 * h0)];
        let mut tables: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        let mut done = [None, None];
        let mut h = h0;
        for k in 0..12 {
            let (p1, m1) = (self.w_real(h)?, self.w_real(-h)?);
            let (p2, m2) = (self.w_real(2.0 * h)?, self.w_real(-2.0 * h)?);
            let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
            let d2 = (-p2 + 16.0 * p1 - 30.0 * w0 + 16.0 * m1 - m2) / (12.0 * h * h);
            for (q, d) in [d1, d2].into_iter().enumerate() {
                let table = &mut tables[q];
                let mut row = vec![d];
                for m in 1..=k {
                    let f = 2f64.powi(2 * m as i32 + 2);
                    let prev = table[k - 1][m - 1];
                    row.push((f * row[m - 1] - prev) / (f - 1.0));
                }
                if k >= 1 && done[q].is_none() {
                    let a = row[k];
                    let b = table[k - 1][k - 1];
                    let scale = a.abs().max(scales[q]).max(1e-300);
                    if (a - b).abs() <= 1e-8 * scale {
                        done[q] = Some(a);
                    }
                }
                table.push(row);
            }
            if done.iter().all(Option::is_some) {
                break;
            }
            h *= 0.5;
        }
        match done {
            [Some(a), Some(b)] => Ok((a, b)),
            // w loses digits on the real axis near x1, where ℘⁻¹ is evaluated
            // at a branch value; the circle keeps clear of it
            _ => self.derivs_on_circle(0.5 * reach),
        }
    }

    /// (w′(0), w″(0)) from the trapezoid rule for Cauchy's formula on |x| = r,
    /// doubling the node count until both settle.
    fn derivs_on_circle(&self, r: f64) -> Result<(f64, f64)> {
        let estimate = |n: usize| -> Result<(f64, f64)> {
            let (mut s1, mut s2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for k in 0..n {
                // offset by half a step so that no node lies on the real axis
                let z = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / n as f64);
                let w = self.w(z * r)?;
                s1 += w * z.conj();
                s2 += w * (z * z).conj();
            }
            Ok((s1.re / (n as f64 * r), 2.0 * s2.re / (n as f64 * r * r)))
        };
        let mut prev = estimate(16)?;
        let mut n = 32;
        while n <= 1024 {
            let next = estimate(n)?;
            let ok = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-10 * a.abs().max(scale);
            if ok(next.0, prev.0, next.1.abs() * r) && ok(next.1, prev.1, next.0.abs() / r) {
                return Ok(next);
            }
            prev = next;
            n *= 2;
        }
        Err(Error::DerivativeNonConvergence)
    }

    /// max over n Chebyshev samples y ∈ [y1, y2] of |w(X0(y)) − w(X1(y))|,
    /// divided by the median of |w| over the samples.
    pub fn gluing_residual(&self, n: usize) -> Result<f64> {
        let n = n.max(8);
        let (y1, y2) = (self.bp.y.r[0], self.bp.y.r[1]);
        let (mid, half) = (0.5 * (y1 + y2), 0.5 * (y2 - y1));
        let mut diffs = Vec::with_capacity(n);
        let mut mags = Vec::with_capacity(n);
        for k in 0..n {
            let y = mid - half * (PI * (k as f64 + 0.5) / n as f64).cos();
            let (a, b) = self.kernel.x_branches(Complex64::new(y, 0.0));
            let b = b.ok_or(Error::Input("x branch at infinity on M".into()))?;
            let (wa, wb) = (self.w(a)?, self.w(b)?);
            diffs.push((wa - wb).norm());
            mags.push(wa.norm());
        }
        mags.sort_by(f64::total_cmp);
        let median = mags[n / 2].max(f64::MIN_POSITIVE);
        Ok(diffs.into_iter().fold(0.0, f64::max) / median)
    }
}

/// First of the fractions 1/2, 1/3, 2/3, 1/4, 3/4 of (X(y1), x2) lying at
/// least 5% of the width away from both 0 and the pole x1 of u. An infinite
/// X(y1) is replaced by a point as far left of min(x1, 0) as x2 is right of it.
fn default_x0(lo: f64, hi: f64, x1: f64) -> f64 {
    let lo = if lo.is_finite() { lo } else { x1.min(0.0) - (hi - x1.min(0.0)) };
    let width = hi - lo;
    let ok = |x: f64| x.abs() >= 0.05 * width && (x - x1).abs() >= 0.05 * width;
    [0.5, 1.0 / 3.0, 2.0 / 3.0, 0.25, 0.75]
        .into_iter()
        .map(|f| lo + f * width)
        .find(|&x| ok(x))
        .unwrap_or(lo + 0.5 * width)
}
