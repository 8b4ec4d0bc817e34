//! Minimal t-harmonic families: the constants, the generating functions
//! H(x,0), H(0,y), H(x,y), and coefficient extraction.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluing::{GluingFn, GluingOptions};
use crate::kernel::Kernel;
use crate::model::{classify_with_t0, CriticalData, Regime, StepSet};
use crate::poly::Poly;

/// Values f(i,j) for 0 ≤ i,j ≤ N, row-major in i.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicGrid {
    n: usize,
    values: Vec<f64>,
}

impl HarmonicGrid {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; (n + 1) * (n + 1)] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(n);
        for i in 1..=n {
            for j in 1..=n {
                g.set(i, j, f(i, j));
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.n + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * (self.n + 1) + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows of the (N+1)×(N+1) matrix.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n + 1).map(|r| r.to_vec()).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Zero boundary and positive interior for 1 ≤ i,j ≤ N−1.
    pub fn check_invariants(&self) -> bool {
        let n = self.n;
        (0..=n).all(|k| self.get(k, 0) == 0.0 && self.get(0, k) == 0.0)
            && (1..n).all(|i| (1..n).all(|j| self.get(i, j) > 0.0))
    }
}

/// Position on the segment S_t = [x2, X(y2)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SegmentPoint {
    /// Absolute position p.
    P(f64),
    /// Relative position λ, p = x2 + λ(X(y2) − x2).
    Lambda(f64),
}

/// A minimal t-harmonic family normalized by f(1,1) = 1.
#[derive(Debug, Clone)]
pub struct HarmonicFamily {
    pub gluing: GluingFn,
    pub p: f64,
    pub p_prime: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
    w_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metadata {
    pub t: f64,
    pub t0: f64,
    pub p: f64,
    pub p_prime: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
    pub segment: (f64, f64),
}

/// Radii of the extraction contours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Radii {
    pub r_x: f64,
    pub r_y: f64,
}

/// Contour radii as a fraction of the radius of convergence.
const RADIUS_FRACTION: f64 = 0.75;
const SHRINK: f64 = 0.9;
const MAX_SHRINKS: usize = 20;
const ZERO_DERIVATIVE: f64 = 1e-13;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// (c_alpha, c_beta) for the family with pole at p, three cases on
/// (p11, p01).
pub fn constants(gf: &GluingFn, p: f64) -> Result<(f64, f64)> {
    let s = &gf.kernel.step;
    let (p11, p01, pm11) = (s.p(1, 1), s.p(0, 1), s.p(-1, 1));
    let wp = gf.w_real(p)?;
    let c_alpha = if p11 != 0.0 {
        // X0(0) is infinite when α̃(0) = β̃(0) = 0
        let x = gf.kernel.x0(c(0.0));
        let w0 = gf.w(if x.is_finite() { x } else { c(f64::INFINITY) })?.re;
        if (w0 - wp).abs() <= 1e-12 * wp.abs().max(1.0) {
            return Err(Error::PoleCollision);
        }
        -p11 * (w0 - wp) * wp / w0
    } else {
        let (d1, d2) = gf.derivs_at_0()?;
        if p01 != 0.0 {
            if d1.abs() < ZERO_DERIVATIVE {
                return Err(Error::ZeroDerivative { value: d1 });
            }
            -p01 * wp * wp / d1
        } else {
            if d2.abs() < ZERO_DERIVATIVE {
                return Err(Error::ZeroDerivative { value: d2 });
            }
            -2.0 * pm11 * wp * wp / d2
        }
    };
    Ok((c_alpha, p11 + c_alpha / wp))
}

impl HarmonicFamily {
    /// Family at level t with pole at the given segment point.
    pub fn new(
        step: &StepSet,
        t: f64,
        crit: &CriticalData,
        point: SegmentPoint,
        opts: &GluingOptions,
    ) -> Result<Self> {
        if classify_with_t0(crit.t0, t, opts.tol.classify) == Regime::Empty {
            return Err(Error::NoFamily { t, t0: crit.t0 });
        }
        let gf = GluingFn::new(step, t, crit, opts)?;
        Self::from_gluing(gf, point)
    }

    pub fn from_gluing(gf: GluingFn, point: SegmentPoint) -> Result<Self> {
        let (lo, hi) = gf.kernel.segment(&gf.bp);
        let p = match point {
            SegmentPoint::P(p) => p,
            SegmentPoint::Lambda(l) => {
                if !(0.0..=1.0).contains(&l) {
                    return Err(Error::OutOfSegment { p: l, lo: 0.0, hi: 1.0 });
                }
                lo + l * (hi - lo)
            }
        };
        let p_prime = gf.kernel.conjugate_point(&gf.bp, p)?;
        let (c_alpha, c_beta) = constants(&gf, p)?;
        let w_p = gf.w_real(p)?;
        Ok(Self { gluing: gf, p, p_prime, c_alpha, c_beta, w_p })
    }

    /// The unique family at t0, with its pole at the double point x2.
    pub fn critical(gf: GluingFn) -> Result<Self> {
        Self::from_gluing(gf, SegmentPoint::Lambda(0.0))
    }

    pub fn kernel(&self) -> &Kernel {
        &self.gluing.kernel
    }

    pub fn metadata(&self, t0: f64) -> Metadata {
        Metadata {
            t: self.kernel().t,
            t0,
            p: self.p,
            p_prime: self.p_prime,
            c_alpha: self.c_alpha,
            c_beta: self.c_beta,
            segment: self.kernel().segment(&self.gluing.bp),
        }
    }

    /// K(x) = L(x,0)H(x,0) = c_alpha/(w(x) − w(p)) + c_beta.
    pub fn k_of(&self, x: Complex64) -> Result<Complex64> {
        if (x - self.p).norm() <= 1e-12 * self.p.abs().max(1.0) {
            return Err(Error::PoleAtP);
        }
        let w = match self.gluing.w(x) {
            Ok(w) => w,
            // w has a pole at x0, where K takes the value c_beta
            Err(Error::PoleAtReference) => return Ok(c(self.c_beta)),
            Err(e) => return Err(e),
        };
        Ok(self.c_alpha / (w - self.w_p) + self.c_beta)
    }

    pub fn h_boundary_x(&self, x: Complex64) -> Result<Complex64> {
        let g = self.kernel().cp.gamma.eval_c(x);
        if g.norm() <= 1e-14 {
            return Err(Error::ZeroOfGamma);
        }
        Ok(self.k_of(x)? / g)
    }

    pub fn h_boundary_y(&self, y: Complex64) -> Result<Complex64> {
        let g = self.kernel().cp.gamma_t.eval_c(y);
        if g.norm() <= 1e-14 {
            return Err(Error::ZeroOfGammaTilde);
        }
        let p11 = self.kernel().step.p(1, 1);
        Ok((p11 - self.k_of(self.kernel().x0(y))?) / g)
    }

    pub fn h_full(&self, x: Complex64, y: Complex64) -> Result<Complex64> {
        let l = self.kernel().eval_l(x, y);
        let scale = 1.0 + x.norm_sqr() * y.norm_sqr();
        if l.norm() <= 1e-12 * scale {
            return Err(Error::OnKernelCurve);
        }
        Ok((self.k_of(x)? - self.k_of(self.kernel().x0(y))?) / l)
    }

    /// Default radius for the x-contour: 0.75p, pulled in below the
    /// non-removable zeros of L(x,0).
    pub fn default_rx(&self) -> f64 {
        self.torus_rx().min(0.9 * nonzero_root_modulus(&self.kernel().cp.gamma))
    }

    /// Default y-radius for the one-dimensional extraction of f(1,j).
    pub fn default_ry(&self) -> f64 {
        (RADIUS_FRACTION * self.p_prime).min(0.9 * nonzero_root_modulus(&self.kernel().cp.gamma_t))
    }

    fn torus_rx(&self) -> f64 {
        RADIUS_FRACTION * self.p
    }

    /// f(i,1), i = 1..=n, from Cauchy sums on |x| = r.
    pub fn coeffs_x(&self, n: usize, r: Option<f64>) -> Result<Vec<f64>> {
        let r0 = r.unwrap_or_else(|| self.default_rx());
        shrink_until(r0, |r| {
            accept(cauchy_1d(n, r, |x| self.h_boundary_x(x))?, "x-contour", r)
        })
    }

    /// f(1,j), j = 1..=n, from Cauchy sums on |y| = r.
    pub fn coeffs_y(&self, n: usize, r: Option<f64>) -> Result<Vec<f64>> {
        let r0 = r.unwrap_or_else(|| self.default_ry());
        shrink_until(r0, |r| {
            accept(cauchy_1d(n, r, |y| self.h_boundary_y(y))?, "y-contour", r)
        })
    }

    /// Default torus: fixed fractions of p and p′, with r_x inside the
    /// domain bounded by M. The torus may cross the kernel curve; the
    /// singularity of (K(x) − K(X0(y)))/L there is removable.
    pub fn default_radii(&self) -> Radii {
        Radii { r_x: self.torus_rx(), r_y: RADIUS_FRACTION * self.p_prime }
    }

    /// f(i,j) on 0 ≤ i,j ≤ n from double Cauchy sums on a torus, shrunk
    /// while the result is not real and positive.
    pub fn coeffs_grid(&self, n: usize) -> Result<(HarmonicGrid, Radii)> {
        let mut radii = self.default_radii();
        let mut last_err = Error::TorusOnKernel;
        for _ in 0..MAX_SHRINKS {
            match self.grid_on(n, radii) {
                Ok(g) => return Ok((g, radii)),
                Err(e @ (Error::RadiusTooLarge { .. } | Error::OnKernelCurve | Error::PoleAtP)) => {
                    last_err = e;
                    radii = Radii { r_x: radii.r_x * SHRINK, r_y: radii.r_y * SHRINK };
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err)
    }

    /// Grid extraction at fixed radii.
    pub fn grid_on(&self, n: usize, radii: Radii) -> Result<HarmonicGrid> {
        let m = nodes_for(n);
        let k = self.kernel();
        let xs: Vec<Complex64> = (0..m).map(|a| Complex64::from_polar(radii.r_x, TAU * a as f64 / m as f64)).collect();
        let ys: Vec<Complex64> = (0..m).map(|b| Complex64::from_polar(radii.r_y, TAU * b as f64 / m as f64)).collect();
        let kx: Vec<Complex64> = xs.par_iter().map(|&x| self.k_of(x)).collect::<Result<_>>()?;
        let ky: Vec<Complex64> = ys.par_iter().map(|&y| self.k_of(k.x0(y))).collect::<Result<_>>()?;
        let twiddle: Vec<Complex64> = (0..m).map(|q| Complex64::from_polar(1.0, -TAU * q as f64 / m as f64)).collect();
        // per row a: G[a][j] = Σ_b H(x_a, y_b) e^{−2πi b j / m}
        let rows: Vec<(Vec<Complex64>, f64)> = (0..m)
            .into_par_iter()
            .map(|a| {
                let mut row = vec![Complex64::new(0.0, 0.0); n];
                let mut peak = 0.0f64;
                for b in 0..m {
                    let l = k.eval_l(xs[a], ys[b]);
                    if l.norm() == 0.0 {
                        return Err(Error::OnKernelCurve);
                    }
                    let h = (kx[a] - ky[b]) / l;
                    peak = peak.max(h.norm());
                    for (j, slot) in row.iter_mut().enumerate() {
                        *slot += h * twiddle[(b * j) % m];
                    }
                }
                Ok((row, peak))
            })
            .collect::<Result<_>>()?;
        let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let mut grid = HarmonicGrid::zeros(n);
        let norm = (m * m) as f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for (a, (row, _)) in rows.iter().enumerate() {
                    s += row[j] * twiddle[(a * i) % m];
                }
                let scale = radii.r_x.powi(i as i32) * radii.r_y.powi(j as i32);
                let v = s / (norm * scale);
                if !is_real_positive(v, ROUNDOFF * peak / scale) {
                    return Err(Error::RadiusTooLarge {
                        radius: radii.r_x,
                        detail: format!("f({}, {}) = {v} is not positive and real", i + 1, j + 1),
                    });
                }
                grid.set(i + 1, j + 1, v.re);
            }
        }
        Ok(grid)
    }
}

/// Trapezoid nodes per contour: max(256, 8n).
fn nodes_for(n: usize) -> usize {
    (8 * n).max(256)
}

fn nonzero_root_modulus(p: &Poly) -> f64 {
    let degree = match p.degree(0.0) {
        Some(d) if d > 0 => d,
        _ => return f64::INFINITY,
    };
    p.roots(degree)
        .into_iter()
        .map(|z| z.norm())
        .filter(|&m| m > 1e-12)
        .fold(f64::INFINITY, f64::min)
}

/// Round-off allowance of a Cauchy sum, as a multiple of ε·max|h| / r^i.
const ROUNDOFF: f64 = 1e3 * f64::EPSILON;

/// Coefficients with their round-off floors.
struct Extracted {
    coeffs: Vec<Complex64>,
    floors: Vec<f64>,
}

fn cauchy_1d(n: usize, r: f64, h: impl Fn(Complex64) -> Result<Complex64> + Sync) -> Result<Extracted> {
    let m = nodes_for(n);
    let vals: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|a| h(Complex64::from_polar(r, TAU * a as f64 / m as f64)))
        .collect::<Result<_>>()?;
    let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let coeffs = (0..n)
        .map(|i| {
            let s: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(a, v)| v * Complex64::from_polar(1.0, -TAU * ((a * i) % m) as f64 / m as f64))
                .sum();
            s / (m as f64 * r.powi(i as i32))
        })
        .collect();
    let floors = (0..n).map(|i| ROUNDOFF * peak / r.powi(i as i32)).collect();
    Ok(Extracted { coeffs, floors })
}

/// Real and positive up to 1e-9 relative plus round-off.
fn is_real_positive(z: Complex64, floor: f64) -> bool {
    z.re > 0.0 && z.im.abs() <= 1e-9 * z.re + floor
}

fn accept(ex: Extracted, what: &str, r: f64) -> Result<Vec<f64>> {
    for (i, (z, floor)) in ex.coeffs.iter().zip(&ex.floors).enumerate() {
        if !is_real_positive(*z, *floor) {
            return Err(Error::RadiusTooLarge {
                radius: r,
                detail: format!("{what}: coefficient {} = {z} is not positive and real", i + 1),
            });
        }
    }
    Ok(ex.coeffs.iter().map(|z| z.re).collect())
}

fn shrink_until<T>(r0: f64, mut attempt: impl FnMut(f64) -> Result<T>) -> Result<T> {
    let mut r = r0;
    let mut last = None;
    for _ in 0..MAX_SHRINKS {
        match attempt(r) {
            Ok(v) => return Ok(v),
            Err(e @ (Error::RadiusTooLarge { .. } | Error::ZeroOfGamma | Error::ZeroOfGammaTilde | Error::PoleAtP)) => {
                last = Some(e);
                r *= SHRINK;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::TorusOnKernel))
}

/// The explicit minimal harmonic functions of a simple (axis-only) walk:
/// a product of an x-bracket in 1/p and a y-bracket in 1/p′, where a
/// bracket that vanishes at a segment endpoint is replaced by its
/// derivative form.
pub fn closed_form_simple(s: &StepSet, t: f64, p: f64, i: usize, j: usize) -> Result<f64> {
    if !s.is_simple() {
        return Err(Error::NotSimpleWalk);
    }
    let k = Kernel::new(*s, t)?;
    let bp = k.branch_points()?;
    let pp = k.conjugate_point(&bp, p)?;
    let (x2, x_y2) = k.segment(&bp);
    Ok(closed_form_with(s, p, pp, (x2, x_y2), i, j))
}

/// As [`closed_form_simple`], with the kernel data precomputed.
pub fn closed_form_with(s: &StepSet, p: f64, pp: f64, segment: (f64, f64), i: usize, j: usize) -> f64 {
    let (x2, x_y2) = segment;
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-300);
    let (i, j) = (i as i32, j as i32);
    let xb = if near(p, x_y2) {
        i as f64 * p.powi(-i)
    } else {
        p.powi(-i) - (s.p(-1, 0) / s.p(1, 0) * p).powi(i)
    };
    let yb = if near(p, x2) {
        j as f64 * pp.powi(-j)
    } else {
        pp.powi(-j) - (s.p(0, -1) / s.p(0, 1) * pp).powi(j)
    };
    xb * yb
}
