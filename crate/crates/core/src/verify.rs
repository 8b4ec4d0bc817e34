//! Numerical pass/fail checks over constructed objects.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluing::{GluingFn, GluingOptions};
use crate::harmonic::{HarmonicFamily, HarmonicGrid, SegmentPoint};
use crate::model::{classify_with_t0, solve_t0, CriticalData, Regime, StepSet};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance, detail: None }
    }

    /// Passes when `value > threshold` (negative controls).
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, tolerance: threshold, pass: value > threshold, detail: None }
    }

    pub fn failed(name: &str, err: &Error) -> Self {
        Self {
            name: name.into(),
            value: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
            detail: Some(err.to_string()),
        }
    }

    pub fn note(name: &str, detail: String, pass: bool) -> Self {
        Self { name: name.into(), value: f64::NAN, tolerance: f64::NAN, pass, detail: Some(detail) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn new() -> Self {
        Self { checks: Vec::new(), pass: true }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// max over 1 ≤ i,j ≤ N−1 of |Σ p_kl f(i+k,j+l) − t f(i,j)| / max(|f(i,j)|, ε).
pub fn harmonicity_residual(grid: &HarmonicGrid, s: &StepSet, t: f64) -> f64 {
    let n = grid.n();
    let mut worst = 0.0f64;
    for i in 1..n {
        for j in 1..n {
            let mut sum = 0.0;
            for ((k, l), p) in s.steps() {
                sum += p * grid.get((i as i32 + k) as usize, (j as i32 + l) as usize);
            }
            let f = grid.get(i, j);
            worst = worst.max((sum - t * f).abs() / f.abs().max(1e-300));
        }
    }
    worst
}

/// sup over `n` conjugate pairs (X0(y), X1(y)), y at the midpoints of `n`
/// equal cells of (y1, y2), of |L(x,0)H(x,0) − L(x̄,0)H(x̄,0)|, relative to
/// the largest |L(x,0)H(x,0)| over the samples.
///
/// When p = X(y2) the pole of K sits on M at the y2 end, and the difference
/// is ill-conditioned within O(1/n²) of it; equal cells keep the samples
/// O(1/n) away.
pub fn boundary_condition_residual(fam: &HarmonicFamily, n: usize) -> Result<f64> {
    let n = n.max(8);
    let k = fam.kernel();
    let (y1, y2) = (fam.gluing.bp.y.r[0], fam.gluing.bp.y.r[1]);
    let mut worst = 0.0f64;
    let mut scale = f64::MIN_POSITIVE;
    for m in 0..n {
        let y = y1 + (y2 - y1) * (m as f64 + 0.5) / n as f64;
        let (a, b) = k.x_branches(Complex64::new(y, 0.0));
        let b = b.ok_or_else(|| Error::Input("x branch at infinity on M".into()))?;
        let (ka, kb) = (fam.k_of(a)?, fam.k_of(b)?);
        worst = worst.max((ka - kb).norm());
        scale = scale.max(ka.norm()).max(kb.norm());
    }
    Ok(worst / scale)
}

/// Boundary coefficients used by the growth checks.
pub const GROWTH_TERMS: usize = 60;

/// Extrapolated limit of f(i)^{1/i}: least-squares fit of ln f(i)/i on
/// {1, ln i/i, 1/i, 1/i²} over the last (up to 20) indices from 5 on.
/// Returns (estimate, |estimate − 1/p|).
pub fn growth_check(coeffs: &[f64], p: f64) -> Result<(f64, f64)> {
    if coeffs.len() < 20 {
        return Err(Error::Input(format!("growth check needs at least 20 coefficients, got {}", coeffs.len())));
    }
    let hi = coeffs.len();
    let lo = hi.saturating_sub(20).max(5);
    let rows: Vec<usize> = (lo..=hi).collect();
    let a = DMatrix::from_fn(rows.len(), 4, |r, c| {
        let i = rows[r] as f64;
        match c {
            0 => 1.0,
            1 => i.ln() / i,
            2 => 1.0 / i,
            _ => 1.0 / (i * i),
        }
    });
    let mut b = DVector::zeros(rows.len());
    for (r, &i) in rows.iter().enumerate() {
        let f = coeffs[i - 1];
        if !(f > 0.0) {
            return Err(Error::Input(format!("coefficient {i} is not positive")));
        }
        b[r] = f.ln() / i as f64;
    }
    let fit = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Input(format!("growth fit failed: {e}")))?;
    let estimate = fit[0].exp();
    Ok((estimate, (estimate - 1.0 / p).abs()))
}

/// max relative deviation between two grids after normalizing by f(1,1).
pub fn proportionality_gap(a: &HarmonicGrid, b: &HarmonicGrid) -> f64 {
    let n = a.n().min(b.n());
    let (sa, sb) = (a.get(1, 1), b.get(1, 1));
    let mut worst = 0.0f64;
    for i in 1..=n {
        for j in 1..=n {
            let (u, v) = (a.get(i, j) / sa, b.get(i, j) / sb);
            worst = worst.max((u - v).abs() / u.abs().max(1e-300));
        }
    }
    worst
}

/// Grids at both ends of the segment at level t; at t0 they must be
/// proportional.
pub fn endpoint_grids(
    s: &StepSet,
    t: f64,
    crit: &CriticalData,
    opts: &GluingOptions,
    n: usize,
) -> Result<(HarmonicGrid, HarmonicGrid)> {
    let gf = GluingFn::new(s, t, crit, opts)?;
    let a = HarmonicFamily::from_gluing(gf.clone(), SegmentPoint::Lambda(0.0))?.coeffs_grid(n)?.0;
    let b = HarmonicFamily::from_gluing(gf, SegmentPoint::Lambda(1.0))?.coeffs_grid(n)?.0;
    Ok((a, b))
}

/// At t0 the families at p = x2 and p = X(y2) agree up to a scalar.
pub fn uniqueness_probe_at_t0(s: &StepSet, crit: &CriticalData, opts: &GluingOptions, n: usize) -> Report {
    let mut report = Report::new();
    match endpoint_grids(s, crit.t0, crit, opts, n) {
        Ok((a, b)) => report.push(Check::at_most("proportional_at_t0", proportionality_gap(&a, &b), opts.tol.proportional)),
        Err(e) => report.push(Check::failed("proportional_at_t0", &e)),
    }
    report
}

/// Runs the whole pipeline for (s, t, point, N) and collects every check.
pub fn full_report(raw: [[f64; 3]; 3], t: f64, point: SegmentPoint, n: usize, tol: &Tolerances) -> Report {
    let mut report = Report::new();
    let s = match StepSet::validate_with(raw, tol) {
        Ok(s) => {
            report.push(Check::note("validate", "ok".into(), true));
            s
        }
        Err(e) => {
            report.push(Check::failed("validate", &e));
            return report;
        }
    };
    let crit = match solve_t0(&s) {
        Ok(c) => c,
        Err(e) => {
            report.push(Check::failed("t0", &e));
            return report;
        }
    };
    report.push(Check::note("t0", format!("{:.16e}", crit.t0), true));
    let regime = classify_with_t0(crit.t0, t, tol.classify);
    if regime == Regime::Empty {
        report.push(Check::note("classify", "Empty".into(), true));
        report.push(Check::note("family", format!("refused: t = {t} is below t0 = {}", crit.t0), false));
        return report;
    }
    report.push(Check::note("classify", format!("{regime:?}"), true));
    let opts = GluingOptions { tol: *tol, ..Default::default() };
    let gf = match GluingFn::new(&s, t, &crit, &opts) {
        Ok(g) => g,
        Err(e) => {
            report.push(Check::failed("gluing", &e));
            return report;
        }
    };
    match gf.gluing_residual(64) {
        Ok(r) => report.push(Check::at_most("gluing_residual", r, tol.gluing)),
        Err(e) => report.push(Check::failed("gluing_residual", &e)),
    }
    let fam = match HarmonicFamily::from_gluing(gf, point) {
        Ok(f) => f,
        Err(e) => {
            report.push(Check::failed("family", &e));
            return report;
        }
    };
    match fam.coeffs_grid(n) {
        Ok((grid, _)) => {
            report.push(Check::note("positivity", "interior grid values positive".into(), grid.check_invariants()));
            report.push(Check::at_most("harmonicity", harmonicity_residual(&grid, &s, fam.kernel().t), tol.harmonicity));
        }
        Err(e) => report.push(Check::failed("grid", &e)),
    }
    match boundary_condition_residual(&fam, 64) {
        Ok(r) => report.push(Check::at_most("boundary_condition", r, tol.boundary)),
        Err(e) => report.push(Check::failed("boundary_condition", &e)),
    }
    let growth = |name: &str, coeffs: Result<Vec<f64>>, q: f64| match coeffs.and_then(|c| growth_check(&c, q)) {
        Ok((_, err)) => Check::at_most(name, err * q, tol.growth),
        Err(e) => Check::failed(name, &e),
    };
    report.push(growth("growth_x", fam.coeffs_x(GROWTH_TERMS, None), fam.p));
    report.push(growth("growth_y", fam.coeffs_y(GROWTH_TERMS, None), fam.p_prime));
    report
}
