//! Acceptance suite A1–A9. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on failure.

use std::time::Instant;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use qharmonic::gluing::{GluingFn, GluingOptions};
use qharmonic::harmonic::{HarmonicFamily, HarmonicGrid, SegmentPoint};
use qharmonic::kernel::Kernel;
use qharmonic::model::{classify_with_t0, level_point, solve_t0, tilt, transfer_harmonic, CriticalData, Regime, StepSet};
use qharmonic::verify::{boundary_condition_residual, growth_check, harmonicity_residual, GROWTH_TERMS};

const A1_TOL: f64 = 1e-6;
const A1_SECONDS: f64 = 30.0;
const A2_TOL: f64 = 1e-6;
const A3_SEPARABLE_TOL: f64 = 1e-10;
const A3_SIMPLE_TOL: f64 = 1e-12;
const A3_RANDOM_TOL: f64 = 1e-9;
const A4_TOL: f64 = 1e-8;
const A4_CONTROL: f64 = 1e-3;
const A5_TOL: f64 = 1e-6;
const A5_CANDIDATE_TOL: f64 = 1e-10;
const A6_GAP: f64 = 1e-3;
const A7_TOL: f64 = 1e-6;
const A8_TOL: f64 = 1e-8;
const A8_SAMPLES: usize = 64;
const A9_TOL: f64 = 1e-3;
const GRID: usize = 12;
const CLASSIFY_TOL: f64 = 1e-9;

fn walk(pairs: &[((i32, i32), f64)]) -> StepSet {
    StepSet::from_pairs(pairs).expect("valid walk")
}

fn simple() -> StepSet {
    walk(&[((1, 0), 0.25), ((-1, 0), 0.25), ((0, 1), 0.25), ((0, -1), 0.25)])
}

fn separable() -> StepSet {
    walk(&[((1, 0), 0.5), ((0, 1), 0.25), ((-1, 0), 0.125), ((0, -1), 0.125)])
}

/// Walks with diagonal steps. The last flag marks walks whose t0 and growth
/// rates are outside the reach of the construction (periodic walks).
fn walks() -> Vec<(&'static str, StepSet, bool)> {
    let e = 0.125;
    vec![
        ("eight-uniform", walk(&[((1, 1), e), ((1, 0), e), ((1, -1), e), ((0, 1), e), ((0, -1), e), ((-1, 1), e), ((-1, 0), e), ((-1, -1), e)]), false),
        (
            "eight-drifted",
            walk(&[((1, 1), 0.2), ((1, 0), 0.15), ((0, 1), 0.15), ((-1, -1), 0.1), ((-1, 0), 0.1), ((0, -1), 0.1), ((1, -1), 0.1), ((-1, 1), 0.1)]),
            false,
        ),
        ("four-step", walk(&[((1, 0), 0.3), ((0, -1), 0.3), ((-1, 1), 0.2), ((-1, -1), 0.2)]), false),
        ("five-step", walk(&[((1, 0), 0.25), ((0, 1), 0.2), ((-1, -1), 0.3), ((1, -1), 0.1), ((-1, 0), 0.15)]), false),
        ("separable", separable(), false),
        ("diagonal", walk(&[((1, 1), 0.25), ((-1, -1), 0.25), ((1, -1), 0.25), ((-1, 1), 0.25)]), true),
    ]
}

struct Line {
    id: &'static str,
    pass: bool,
    text: String,
}

fn line(id: &'static str, pass: bool, text: String) -> Line {
    Line { id, pass, text }
}

/// Largest value and where it occurred.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
    failures: Vec<String>,
}

impl Worst {
    fn record(&mut self, value: f64, tol: f64, at: &str) {
        if !(value <= tol) {
            self.failures.push(format!("{at}: {value:.2e}"));
        }
        if !(value <= self.value) {
            self.value = value;
            self.at = at.to_owned();
        }
    }

    fn error(&mut self, at: &str, e: impl std::fmt::Display) {
        self.failures.push(format!("{at}: {e}"));
    }

    fn summary(&self, what: &str, tol: f64) -> (bool, String) {
        let mut text = format!("worst {what} {:.2e} at {} (tol {tol:.0e})", self.value, self.at);
        if !self.failures.is_empty() {
            text.push_str(&format!("; failures: {}", self.failures.join(", ")));
        }
        (self.failures.is_empty(), text)
    }
}

fn a1() -> Line {
    let start = Instant::now();
    let s = simple();
    let outcome = (|| {
        let crit = solve_t0(&s)?;
        let fam = HarmonicFamily::new(&s, 1.25, &crit, SegmentPoint::P(0.5), &GluingOptions::default())?;
        fam.coeffs_grid(15)
    })();
    let secs = start.elapsed().as_secs_f64();
    let (grid, _) = match outcome {
        Ok(g) => g,
        Err(e) => return line("A1", false, format!("construction failed: {e}")),
    };
    let h = |i: usize| 2f64.powi(i as i32) - 2f64.powi(-(i as i32));
    let mut worst = 0.0f64;
    for i in 1..=15 {
        for j in 1..=15 {
            let want = h(i) * h(j) / 2.25;
            let got = grid.get(i, j) / grid.get(1, 1);
            worst = worst.max((got - want).abs() / want);
        }
    }
    let pass = worst <= A1_TOL && secs <= A1_SECONDS;
    line("A1", pass, format!("15x15 max rel err {worst:.2e} (tol {A1_TOL:.0e}), {secs:.2} s (limit {A1_SECONDS} s)"))
}

fn a3() -> Line {
    let mut notes = Vec::new();
    let mut pass = true;
    match solve_t0(&separable()) {
        Ok(c) => {
            let err = (c.t0 - 0.8535533906).abs();
            pass &= err <= A3_SEPARABLE_TOL;
            notes.push(format!("separable |t0 - 0.8535533906| {err:.1e}"));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("separable: {e}"));
        }
    }
    match solve_t0(&simple()) {
        Ok(c) => {
            let err = (c.t0 - 1.0).abs();
            pass &= err <= A3_SIMPLE_TOL;
            notes.push(format!("simple |t0 - 1| {err:.1e}"));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("simple: {e}"));
        }
    }
    let mut rng = StdRng::seed_from_u64(20);
    let (mut agree, mut total) = (0, 0);
    while total < 20 {
        let zero_drift = total % 2 == 0;
        let Some(s) = random_walk(&mut rng, zero_drift) else { continue };
        total += 1;
        let Ok(c) = solve_t0(&s) else { continue };
        let (dx, dy) = s.drift();
        let has_drift = dx.hypot(dy) > 1e-12;
        let at_one = (c.t0 - 1.0).abs() <= A3_RANDOM_TOL;
        if at_one != has_drift {
            agree += 1;
        }
    }
    pass &= agree == total;
    notes.push(format!("t0 = 1 iff zero drift on {agree}/{total} random walks"));
    line("A3", pass, notes.join("; "))
}

/// Random valid walk; zero-drift walks are built from symmetric pairs.
fn random_walk(rng: &mut StdRng, zero_drift: bool) -> Option<StepSet> {
    let mut pairs = Vec::new();
    if zero_drift {
        for (k, l) in [(1, 1), (1, 0), (1, -1), (0, 1)] {
            if rng.gen_bool(0.8) {
                let v: f64 = rng.gen_range(0.05..1.0);
                pairs.push(((k, l), v));
                pairs.push(((-k, -l), v));
            }
        }
    } else {
        for k in -1..=1 {
            for l in -1..=1 {
                if (k, l) != (0, 0) && rng.gen_bool(0.75) {
                    pairs.push(((k, l), rng.gen_range(0.05..1.0)));
                }
            }
        }
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let pairs: Vec<_> = pairs.into_iter().map(|(s, v)| (s, v / total)).collect();
    let s = StepSet::from_pairs(&pairs).ok()?;
    let (dx, dy) = s.drift();
    if !zero_drift && dx.hypot(dy) < 1e-3 {
        return None;
    }
    Some(s)
}

fn a5() -> Line {
    let s = simple();
    let c = |x: f64| Complex64::new(x, 0.0);
    let koebe = |x: Complex64| x / ((1.0 - x) * (1.0 - x));
    let outcome = (|| {
        let crit = solve_t0(&s)?;
        let gf = GluingFn::new(&s, crit.t0, &crit, &GluingOptions::default())?;
        // the candidate must glue conjugate points of M before serving as oracle
        let k = &gf.kernel;
        let (y1, y2) = (gf.bp.y.r[0], gf.bp.y.r[1]);
        let mut candidate = 0.0f64;
        for m in 0..64 {
            let y = y1 + (y2 - y1) * (m as f64 + 0.5) / 64.0;
            let (a, b) = k.x_branches(c(y));
            let b = b.expect("finite branch");
            let (ka, kb) = (koebe(a), koebe(b));
            candidate = candidate.max((ka - kb).norm() / ka.norm().max(1.0));
        }
        let cr = |v: [Complex64; 4]| (v[0] - v[2]) * (v[1] - v[3]) / ((v[0] - v[3]) * (v[1] - v[2]));
        let mut cross = 0.0f64;
        for pts in [[-0.5, -0.2, 0.1, 0.15], [0.2, 0.3, 0.6, 0.9], [-0.9, -0.3, 0.4, 0.7]] {
            let pts = pts.map(c);
            let a = cr(pts.map(|x| gf.w(x).expect("w inside the domain")));
            let b = cr(pts.map(koebe));
            cross = cross.max((a - b).norm() / b.norm().max(1.0));
        }
        let fam = HarmonicFamily::critical(gf)?;
        let (grid, _) = fam.coeffs_grid(10)?;
        let mut prop = 0.0f64;
        for i in 1..=10 {
            for j in 1..=10 {
                let want = (i * j) as f64;
                prop = prop.max((grid.get(i, j) / grid.get(1, 1) - want).abs() / want);
            }
        }
        Ok::<_, qharmonic::Error>((candidate, cross, prop))
    })();
    match outcome {
        Ok((candidate, cross, prop)) => line(
            "A5",
            candidate <= A5_CANDIDATE_TOL && cross <= A5_TOL && prop <= A5_TOL,
            format!(
                "grid vs ij {prop:.2e}, cross-ratio vs x/(1-x)^2 {cross:.2e} (tol {A5_TOL:.0e}); candidate gluing on M {candidate:.2e} (tol {A5_CANDIDATE_TOL:.0e})"
            ),
        ),
        Err(e) => line("A5", false, format!("construction failed: {e}")),
    }
}

fn a6(walks: &[(&'static str, StepSet, bool)]) -> Line {
    let mut worst = Worst::default();
    let mut regimes = Vec::new();
    for (name, s, _) in walks {
        let crit = match solve_t0(s) {
            Ok(c) => c,
            Err(e) => {
                worst.error(name, e);
                continue;
            }
        };
        match Kernel::new(*s, crit.t0 + 1e-8).and_then(|k| k.branch_points()) {
            Ok(bp) => worst.record((bp.x.r[1] - bp.x.r[2]).abs(), A6_GAP, name),
            Err(e) => worst.error(name, e),
        }
        let at = classify_with_t0(crit.t0, crit.t0, CLASSIFY_TOL);
        let below = classify_with_t0(crit.t0, 0.9 * crit.t0, CLASSIFY_TOL);
        if at != Regime::Point || below != Regime::Empty {
            regimes.push(format!("{name}: {at:?}/{below:?}"));
        }
    }
    let (mut pass, mut text) = worst.summary("|x2 - x3| at t0 + 1e-8", A6_GAP);
    if regimes.is_empty() {
        text.push_str("; Point at t0 and Empty at 0.9 t0 for every walk");
    } else {
        pass = false;
        text.push_str(&format!("; wrong regimes: {}", regimes.join(", ")));
    }
    line("A6", pass, text)
}

/// Everything measured on one (walk, t) pair of the matrix.
struct LevelResult {
    label: String,
    gluing: Result<f64, String>,
    control: Result<f64, String>,
    families: Vec<FamilyResult>,
}

struct FamilyResult {
    label: String,
    harmonicity: Result<f64, String>,
    tilt: Result<f64, String>,
    boundary: Result<f64, String>,
    growth: Option<Result<(f64, f64), String>>,
}

fn levels(crit: &CriticalData, periodic: bool) -> Vec<(&'static str, f64)> {
    let mut out = vec![("t0+0.1", crit.t0 + 0.1), ("1.1t0", 1.1 * crit.t0)];
    if !periodic {
        out.insert(0, ("t0", crit.t0));
    }
    out
}

fn run_level(name: &str, s: &StepSet, crit: &CriticalData, tname: &str, t: f64, periodic: bool) -> LevelResult {
    let label = format!("{name}@{tname}");
    let opts = GluingOptions::default();
    let gf = match GluingFn::new(s, t, crit, &opts) {
        Ok(g) => g,
        Err(e) => {
            let msg = e.to_string();
            return LevelResult { label, gluing: Err(msg.clone()), control: Err(msg), families: Vec::new() };
        }
    };
    let gluing = gf.gluing_residual(64).map_err(|e| e.to_string());
    let control = {
        let mut periods = gf.periods;
        periods.omega2 *= 1.01;
        GluingFn::from_parts(gf.kernel.clone(), gf.bp, periods, gf.theta().is_some(), &opts)
            .and_then(|bad| bad.gluing_residual(64))
            .map_err(|e| e.to_string())
    };
    let families = [0.0, 0.5, 1.0]
        .into_par_iter()
        .map(|lambda| run_family(&label, s, crit, t, &gf, lambda, periodic))
        .collect();
    LevelResult { label, gluing, control, families }
}

fn run_family(level: &str, s: &StepSet, crit: &CriticalData, t: f64, gf: &GluingFn, lambda: f64, periodic: bool) -> FamilyResult {
    let label = format!("{level} l={lambda}");
    let fam = match HarmonicFamily::from_gluing(gf.clone(), SegmentPoint::Lambda(lambda)) {
        Ok(f) => f,
        Err(e) => {
            let msg = e.to_string();
            return FamilyResult {
                label,
                harmonicity: Err(msg.clone()),
                tilt: Err(msg.clone()),
                boundary: Err(msg.clone()),
                growth: (!periodic).then(|| Err(msg)),
            };
        }
    };
    let kt = fam.kernel().t;
    let grid: Result<HarmonicGrid, String> = fam.coeffs_grid(GRID).map(|g| g.0).map_err(|e| e.to_string());
    let harmonicity = grid.clone().map(|g| harmonicity_residual(&g, s, kt));
    let tilt = grid.and_then(|g| {
        let a = level_point(s, crit, t, (1.0, 1.0)).map_err(|e| e.to_string())?;
        let tilted = tilt(s, a, kt).map_err(|e| e.to_string())?;
        let moved = transfer_harmonic(&g, a, 1).map_err(|e| e.to_string())?;
        Ok(harmonicity_residual(&moved, &tilted, 1.0))
    });
    let boundary = boundary_condition_residual(&fam, A8_SAMPLES).map_err(|e| e.to_string());
    let growth = (!periodic).then(|| {
        let gx = fam.coeffs_x(GROWTH_TERMS, None).and_then(|c| growth_check(&c, fam.p));
        let gy = fam.coeffs_y(GROWTH_TERMS, None).and_then(|c| growth_check(&c, fam.p_prime));
        match (gx, gy) {
            (Ok(x), Ok(y)) => Ok((x.1, y.1)),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        }
    });
    FamilyResult { label, harmonicity, tilt, boundary, growth }
}

fn main() {
    let start = Instant::now();
    let mut lines = vec![a1()];

    let walks = walks();
    let results: Vec<LevelResult> = walks
        .par_iter()
        .flat_map(|(name, s, periodic)| match solve_t0(s) {
            Ok(crit) => levels(&crit, *periodic)
                .into_par_iter()
                .map(|(tname, t)| run_level(name, s, &crit, tname, t, *periodic))
                .collect::<Vec<_>>(),
            Err(e) => vec![LevelResult {
                label: name.to_string(),
                gluing: Err(e.to_string()),
                control: Err(e.to_string()),
                families: Vec::new(),
            }],
        })
        .collect();

    let fams = || results.iter().flat_map(|r| r.families.iter());
    let n_fams = fams().count();
    let tally = |field: fn(&FamilyResult) -> Option<&Result<f64, String>>, tol: f64| {
        let mut w = Worst::default();
        for f in fams() {
            match field(f) {
                Some(Ok(v)) => w.record(*v, tol, &f.label),
                Some(Err(e)) => w.error(&f.label, e),
                None => {}
            }
        }
        for r in results.iter().filter(|r| r.families.is_empty()) {
            w.error(&r.label, "no families");
        }
        w
    };

    let (pass, text) = tally(|f| Some(&f.harmonicity), A2_TOL).summary("harmonicity", A2_TOL);
    lines.push(line("A2", pass, format!("{n_fams} families on {GRID}x{GRID}: {text}; periodic diagonal walk run off t0 only")));
    lines.push(a3());

    let mut glue = Worst::default();
    let mut control = Worst { value: f64::INFINITY, ..Default::default() };
    for r in &results {
        match &r.gluing {
            Ok(v) => glue.record(*v, A4_TOL, &r.label),
            Err(e) => glue.error(&r.label, e),
        }
        match &r.control {
            Ok(v) => {
                if !(*v > A4_CONTROL) {
                    control.failures.push(format!("{}: {v:.2e}", r.label));
                }
                if *v < control.value {
                    control.value = *v;
                    control.at = r.label.clone();
                }
            }
            Err(e) => control.error(&r.label, e),
        }
    }
    let (gp, gt) = glue.summary("gluing residual", A4_TOL);
    let cp = control.failures.is_empty();
    let ct = format!(
        "smallest residual with omega2 x 1.01 {:.2e} at {} (must exceed {A4_CONTROL:.0e}){}",
        control.value,
        control.at,
        if cp { String::new() } else { format!("; failures: {}", control.failures.join(", ")) }
    );
    lines.push(line("A4", gp && cp, format!("{} gluing functions: {gt}; {ct}", results.len())));
    lines.push(a5());
    lines.push(a6(&walks));

    let (pass, text) = tally(|f| Some(&f.tilt), A7_TOL).summary("tilted 1-harmonicity", A7_TOL);
    lines.push(line("A7", pass, text));
    let (pass, text) = tally(|f| Some(&f.boundary), A8_TOL).summary("boundary residual", A8_TOL);
    lines.push(line("A8", pass, format!("{A8_SAMPLES} pairs: {text}")));

    let mut growth = Worst::default();
    for f in fams() {
        match &f.growth {
            Some(Ok((gx, gy))) => {
                growth.record(*gx, A9_TOL, &format!("{} (x)", f.label));
                growth.record(*gy, A9_TOL, &format!("{} (y)", f.label));
            }
            Some(Err(e)) => growth.error(&f.label, e),
            None => {}
        }
    }
    let (pass, text) = growth.summary("|estimate - 1/p|", A9_TOL);
    lines.push(line("A9", pass, format!("{text}; periodic diagonal walk excluded")));

    let mut failed = 0;
    for l in &lines {
        println!("{} {} {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.text);
        failed += usize::from(!l.pass);
    }
    println!("acceptance: {}/{} passed in {:.1} s", lines.len() - failed, lines.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
