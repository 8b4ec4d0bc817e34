//! Command-line front end.
//!
//! Every subcommand reads a model file, runs one library stage and prints
//! JSON (or CSV for grids and curves). Exit codes: 0 ok, 2 a check failed,
//! 3 input or numerical error, 64 usage error, 66 unreadable file.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::Error;
use crate::gluing::{GluingFn, GluingOptions};
use crate::harmonic::{closed_form_simple, HarmonicFamily, HarmonicGrid, SegmentPoint};
use crate::kernel::{Kernel, Roots4};
use crate::model::{classify_with_t0, level_point, solve_t0, tilt, ModelFile, Regime, StepSet};
use crate::tol::Tolerances;
use crate::verify::full_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_FILE: i32 = 66;

/// t-harmonic functions of small-step walks killed at the boundary of the quarter plane
#[derive(Debug, Parser)]
#[command(name = "qharmonic", version)]
pub struct Cli {
    /// Model file: {"weights": [[p(-1,1), p(0,1), p(1,1)], [p(-1,0), 0, p(1,0)], [p(-1,-1), p(0,-1), p(1,-1)]]}
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write output here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for coefficient extraction (results do not depend on it)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "M")]
    M,
    #[value(name = "L")]
    L,
}

#[derive(Debug, Clone, Copy, Args)]
#[group(required = true, multiple = false)]
pub struct PointArgs {
    /// Absolute pole position on the segment [x2, X(y2)]
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<f64>,
    /// Relative pole position, p = x2 + lambda (X(y2) - x2)
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl PointArgs {
    fn point(&self) -> SegmentPoint {
        match (self.p, self.lambda) {
            (Some(p), _) => SegmentPoint::P(p),
            (None, Some(l)) => SegmentPoint::Lambda(l),
            (None, None) => unreachable!("clap enforces the group"),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the weights and report the drift
    Validate,
    /// Minimum of the Laplace transform and its minimizer
    T0,
    /// Regime of t relative to t0
    Classify {
        #[arg(long)]
        t: f64,
    },
    /// Roots of the two discriminants
    BranchPoints {
        #[arg(long)]
        t: f64,
    },
    /// Sample the curve M = X([y1, y2]) or L = Y([x1, x2])
    Curve {
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// The segment [x2, X(y2)] of admissible poles
    Segment {
        #[arg(long)]
        t: f64,
    },
    /// Periods and parameters of the gluing function
    Gluing {
        #[arg(long)]
        t: f64,
        /// Also compute the gluing residual on M and fail if it is too large
        #[arg(long)]
        check: bool,
    },
    /// Grid of f(i,j), 0 ≤ i,j ≤ N, of the family normalized by f(1,1) = 1
    Harmonic {
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        grid: u32,
    },
    /// Explicit grid for a simple (axis-only) walk, normalized by f(1,1) = 1
    ClosedForm {
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        grid: u32,
    },
    /// Tilt vector on the level set phi = t and the tilted walk
    Tilt {
        #[arg(long)]
        t: f64,
        /// Direction from the minimizer, as dx,dy
        #[arg(long, allow_hyphen_values = true, default_value = "1,0")]
        dir: String,
    },
    /// Run every check on one family
    Verify {
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        grid: u32,
    },
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    File(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::File(_) => EXIT_FILE,
            Failure::Lib(_) => EXIT_ERROR,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::File(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(Vec<u8>, i32), Failure>;

/// Writes floats with 17 significant digits so values round-trip exactly.
#[derive(Debug, Default)]
struct ExactFloats {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt17(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// 17 significant digits in scientific notation; valid as a JSON number.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, ExactFloats::default());
    value.serialize(&mut ser).expect("serializing to memory");
    buf.push(b'\n');
    buf
}

/// Complex numbers as [re, im]; non-finite parts become null.
#[derive(Serialize)]
struct C([Option<f64>; 2]);

impl From<Complex64> for C {
    fn from(z: Complex64) -> Self {
        let f = |v: f64| v.is_finite().then_some(v);
        C([f(z.re), f(z.im)])
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn roots(r: &Roots4) -> [Option<f64>; 4] {
    r.r.map(finite)
}

/// Converts the file layout (rows l = 1, 0, −1; columns k = −1, 0, 1) to `raw[k + 1][l + 1]`.
fn raw_weights(file: &ModelFile) -> [[f64; 3]; 3] {
    let mut raw = [[0.0; 3]; 3];
    for (row, l) in [2usize, 1, 0].into_iter().enumerate() {
        for k in 0..3 {
            raw[k][l] = file.weights[row][k];
        }
    }
    raw
}

fn grid_csv(grid: &HarmonicGrid) -> Vec<u8> {
    let mut out = String::from("i,j,f\n");
    for (i, row) in grid.rows().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out.push_str(&format!("{i},{j},{}\n", fmt17(*v)));
        }
    }
    out.into_bytes()
}

fn parse_dir(s: &str) -> std::result::Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("--dir expects dx,dy, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

fn csv_unsupported(cmd: &str) -> Failure {
    Failure::Usage(format!("--format csv is available for harmonic, closed-form and curve, not {cmd}"))
}

fn execute(cli: &Cli, tol: &Tolerances) -> Outcome {
    let path = cli.model.as_ref().ok_or_else(|| Failure::Usage("--model is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::File(format!("{}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Lib(Error::Input(format!("{}: {e}", path.display()))))?;
    let raw = raw_weights(&file);
    let csv = cli.format == Format::Csv;
    let opts = GluingOptions { tol: *tol, ..Default::default() };

    if let Command::Verify { t, point, grid } = &cli.command {
        if csv {
            return Err(csv_unsupported("verify"));
        }
        let report = full_report(raw, *t, point.point(), *grid as usize, tol);
        let code = if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED };
        return Ok((to_json(&report), code));
    }

    let s = StepSet::validate_with(raw, tol)?;
    if csv && !matches!(cli.command, Command::Harmonic { .. } | Command::ClosedForm { .. } | Command::Curve { .. }) {
        return Err(csv_unsupported(command_name(&cli.command)));
    }

    let out = match &cli.command {
        Command::Validate => {
            #[derive(Serialize)]
            struct Out {
                valid: bool,
                weights: [[f64; 3]; 3],
                drift: (f64, f64),
                simple: bool,
            }
            to_json(&Out { valid: true, weights: s.to_model().weights, drift: s.drift(), simple: s.is_simple() })
        }
        Command::T0 => {
            #[derive(Serialize)]
            struct Out {
                t0: f64,
                a_star: [f64; 2],
            }
            let crit = solve_t0(&s)?;
            to_json(&Out { t0: crit.t0, a_star: [crit.a_star.a1, crit.a_star.a2] })
        }
        Command::Classify { t } => {
            #[derive(Serialize)]
            struct Out {
                t: f64,
                t0: f64,
                regime: Regime,
            }
            if !(*t > 0.0) {
                return Err(Error::NonPositiveT { t: *t }.into());
            }
            let crit = solve_t0(&s)?;
            to_json(&Out { t: *t, t0: crit.t0, regime: classify_with_t0(crit.t0, *t, tol.classify) })
        }
        Command::BranchPoints { t } => {
            #[derive(Serialize)]
            struct Out {
                t: f64,
                x: [Option<f64>; 4],
                y: [Option<f64>; 4],
            }
            let bp = Kernel::new(s, *t)?.branch_points()?;
            to_json(&Out { t: *t, x: roots(&bp.x), y: roots(&bp.y) })
        }
        Command::Curve { t, which, samples } => {
            let k = Kernel::new(s, *t)?;
            let bp = k.branch_points()?;
            let curve = match which {
                Which::M => k.curve_m(&bp, *samples),
                Which::L => k.curve_l(&bp, *samples),
            };
            if csv {
                let mut out = String::from("param,re0,im0,re1,im1\n");
                for ((s, a), b) in curve.param.iter().zip(&curve.branch0).zip(&curve.branch1) {
                    out.push_str(&format!("{},{},{},{},{}\n", fmt17(*s), fmt17(a.re), fmt17(a.im), fmt17(b.re), fmt17(b.im)));
                }
                out.into_bytes()
            } else {
                #[derive(Serialize)]
                struct Out {
                    t: f64,
                    which: &'static str,
                    param: Vec<f64>,
                    branch0: Vec<C>,
                    branch1: Vec<C>,
                }
                to_json(&Out {
                    t: *t,
                    which: if *which == Which::M { "M" } else { "L" },
                    param: curve.param,
                    branch0: curve.branch0.into_iter().map(C::from).collect(),
                    branch1: curve.branch1.into_iter().map(C::from).collect(),
                })
            }
        }
        Command::Segment { t } => {
            #[derive(Serialize)]
            struct Out {
                t: f64,
                t0: f64,
                regime: Regime,
                x2: f64,
                x_y2: f64,
                segment: (f64, f64),
            }
            let crit = solve_t0(&s)?;
            let regime = classify_with_t0(crit.t0, *t, tol.classify);
            if regime == Regime::Empty {
                return Err(Error::NoFamily { t: *t, t0: crit.t0 }.into());
            }
            let (x2, x_y2) = Kernel::new(s, *t)?.segment_s()?;
            to_json(&Out { t: *t, t0: crit.t0, regime, x2, x_y2, segment: (x2.min(x_y2), x2.max(x_y2)) })
        }
        Command::Gluing { t, check } => {
            #[derive(Serialize)]
            struct Periods {
                omega1: C,
                omega2: f64,
                omega3: f64,
            }
            #[derive(Serialize)]
            struct Out {
                t: f64,
                mode: crate::gluing::Mode,
                periods: Periods,
                theta: Option<f64>,
                x0: f64,
                x_y1: f64,
                x_y2: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                residual: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                pass: Option<bool>,
            }
            let crit = solve_t0(&s)?;
            if classify_with_t0(crit.t0, *t, tol.classify) == Regime::Empty {
                return Err(Error::NoFamily { t: *t, t0: crit.t0 }.into());
            }
            let gf = GluingFn::new(&s, *t, &crit, &opts)?;
            let residual = if *check { Some(gf.gluing_residual(64)?) } else { None };
            let pass = residual.map(|r| r <= tol.gluing);
            let out = Out {
                t: *t,
                mode: gf.mode,
                periods: Periods {
                    omega1: gf.periods.omega1.into(),
                    omega2: gf.periods.omega2,
                    omega3: gf.periods.omega3,
                },
                theta: gf.theta(),
                x0: gf.x0,
                x_y1: gf.x_y1,
                x_y2: gf.x_y2,
                residual,
                pass,
            };
            let code = if pass == Some(false) { EXIT_CHECK_FAILED } else { EXIT_OK };
            return Ok((to_json(&out), code));
        }
        Command::Harmonic { t, point, grid } => {
            #[derive(Serialize)]
            struct Out {
                metadata: crate::harmonic::Metadata,
                radii: crate::harmonic::Radii,
                n: usize,
                grid: Vec<Vec<f64>>,
            }
            let crit = solve_t0(&s)?;
            let fam = HarmonicFamily::new(&s, *t, &crit, point.point(), &opts)?;
            let (g, radii) = fam.coeffs_grid(*grid as usize)?;
            if csv {
                grid_csv(&g)
            } else {
                to_json(&Out { metadata: fam.metadata(crit.t0), radii, n: g.n(), grid: g.rows() })
            }
        }
        Command::ClosedForm { t, p, grid } => {
            #[derive(Serialize)]
            struct Out {
                t: f64,
                p: f64,
                n: usize,
                grid: Vec<Vec<f64>>,
            }
            let n = *grid as usize;
            let f11 = closed_form_simple(&s, *t, *p, 1, 1)?;
            let mut g = HarmonicGrid::zeros(n);
            for i in 1..=n {
                for j in 1..=n {
                    g.set(i, j, closed_form_simple(&s, *t, *p, i, j)? / f11);
                }
            }
            if csv {
                grid_csv(&g)
            } else {
                to_json(&Out { t: *t, p: *p, n, grid: g.rows() })
            }
        }
        Command::Tilt { t, dir } => {
            #[derive(Serialize)]
            struct Out {
                t: f64,
                a: [f64; 2],
                weights: [[f64; 3]; 3],
                drift: (f64, f64),
            }
            let d = parse_dir(dir)?;
            let crit = solve_t0(&s)?;
            let a = level_point(&s, &crit, *t, d)?;
            let tilted = tilt(&s, a, *t)?;
            to_json(&Out { t: *t, a: [a.a1, a.a2], weights: tilted.to_model().weights, drift: tilted.drift() })
        }
        Command::Verify { .. } => unreachable!("handled above"),
    };
    Ok((out, EXIT_OK))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::T0 => "t0",
        Command::Classify { .. } => "classify",
        Command::BranchPoints { .. } => "branch-points",
        Command::Curve { .. } => "curve",
        Command::Segment { .. } => "segment",
        Command::Gluing { .. } => "gluing",
        Command::Harmonic { .. } => "harmonic",
        Command::ClosedForm { .. } => "closed-form",
        Command::Tilt { .. } => "tilt",
        Command::Verify { .. } => "verify",
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `stdout` (or `--output`) and diagnostics to `stderr`.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let tol = match Tolerances::from_env() {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&cli, &tol)),
            Err(e) => Err(Failure::Usage(format!("--threads: {e}"))),
        },
        None => execute(&cli, &tol),
    };
    match result {
        Ok((bytes, code)) => {
            let written = match &cli.output {
                Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display())),
                None => stdout.write_all(&bytes).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => code,
                Err(m) => {
                    let _ = writeln!(stderr, "error: {m}");
                    EXIT_FILE
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}
