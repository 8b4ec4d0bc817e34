//! Discrete t-harmonic functions of small-step random walks killed at the
//! boundary of the quarter plane.
//!
//! The pipeline runs `model` (step set, t0, tilting) → `kernel` (branch
//! points, branches, the segment of poles) → `elliptic` (periods and
//! Weierstrass functions) → `gluing` (the conformal gluing function w) →
//! `harmonic` (generating functions and grid values) → `verify`.

pub mod cli;
pub mod elliptic;
pub mod error;
pub mod gluing;
pub mod harmonic;
pub mod kernel;
pub mod model;
pub mod poly;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
pub use gluing::GluingFn;
pub use harmonic::{HarmonicFamily, HarmonicGrid};
pub use kernel::{BranchPoints, Kernel};
pub use model::{CriticalData, Regime, StepSet, TiltVector};
pub use tol::Tolerances;

pub use num_complex::Complex64;
