//! Period integrals, Weierstrass ℘ and its inverse.

pub mod carlson;
pub mod periods;
pub mod quadrature;
pub mod weierstrass;

pub use carlson::carlson_rf;
pub use periods::{period_integrals, PeriodTriple};
pub use weierstrass::Lattice;

/// Lattice invariants and e-values for the lattice generated by `ga`, `gb`.
pub fn invariants_from_lattice(
    ga: num_complex::Complex64,
    gb: num_complex::Complex64,
) -> crate::Result<Lattice> {
    Lattice::new(ga, gb)
}
