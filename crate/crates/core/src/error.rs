use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the stage that raises them; the CLI maps the
/// whole enum onto exit code 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // step-set validation
    #[error("weight p[{k},{l}] = {value} is negative")]
    NegativeWeight { k: i32, l: i32, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    SumNotOne { sum: f64 },
    #[error("center weight p[0,0] = {value} must be zero")]
    CenterNonzero { value: f64 },
    #[error("three consecutive zero weights in the clockwise list starting at p[{k},{l}]")]
    ThreeConsecutiveZeros { k: i32, l: i32 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    // model
    #[error("Newton iteration for t0 did not converge after {iterations} steps (|grad| = {gradient})")]
    NoConvergence { iterations: usize, gradient: f64 },
    #[error("|phi(a) - t| = {mismatch} exceeds the level tolerance")]
    LevelMismatch { mismatch: f64 },
    #[error("exponent {exponent} overflows at grid corner")]
    Overflow { exponent: f64 },
    #[error("t = {t} must be positive")]
    NonPositiveT { t: f64 },
    #[error("t = {t} lies below t0 = {t0}")]
    BelowCritical { t: f64, t0: f64 },

    // kernel
    #[error("branch points violate the expected ordering: {0}")]
    OrderingViolation(String),
    #[error("p = {p} lies outside the segment [{lo}, {hi}]")]
    OutOfSegment { p: f64, lo: f64, hi: f64 },

    // elliptic
    #[error("quadrature for {integral} did not settle: {detail}")]
    QuadratureDisagreement { integral: &'static str, detail: String },
    #[error("integrand sign condition violated on {0}")]
    NegativeIntegrand(&'static str),
    #[error("degenerate lattice (|q| = {q})")]
    DegenerateLattice { q: f64 },
    #[error("z lies on a lattice point")]
    PoleAtLatticePoint,
    #[error("Carlson RF did not converge")]
    NonConvergence,
    #[error("inverse Weierstrass round trip failed (relative error {error})")]
    RoundTripFailure { error: f64 },

    // gluing
    #[error("x coincides with the finite branch point x4")]
    PoleAtX4,
    #[error("u is not real on the real segment at x = {x} (imaginary part {imag})")]
    BranchFault { x: f64, imag: f64 },
    #[error("arcsin argument left its principal domain at x = {x}")]
    DomainFault { x: f64 },
    #[error("arccos argument {value} out of range")]
    OutOfRange { value: f64 },
    #[error("x coincides with the reference pole x0")]
    PoleAtReference,
    #[error("Richardson extrapolation of derivatives at 0 did not settle")]
    DerivativeNonConvergence,

    // harmonic
    #[error("derivative of w at 0 vanishes ({value})")]
    ZeroDerivative { value: f64 },
    #[error("w(p) collides with w(X0(0))")]
    PoleCollision,
    #[error("x coincides with the pole p")]
    PoleAtP,
    #[error("L(x,0) vanishes at the evaluation point")]
    ZeroOfGamma,
    #[error("L(0,y) vanishes at the evaluation point")]
    ZeroOfGammaTilde,
    #[error("(x, y) lies on the kernel curve")]
    OnKernelCurve,
    #[error("extraction radius {radius} too large: {detail}")]
    RadiusTooLarge { radius: f64, detail: String },
    #[error("no admissible torus radii found")]
    TorusOnKernel,
    #[error("step set is not a simple (axis-only) walk")]
    NotSimpleWalk,
    #[error("a family requires t >= t0 (t = {t}, t0 = {t0})")]
    NoFamily { t: f64, t0: f64 },

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
