//! Shared fixtures for the criterion benchmarks.

use dtn_helmholtz::basis::{BasisSpec, Parity};
use dtn_helmholtz::geometry::CompositeDomain;

/// Reference geometry `a = 1`, `b = 1.5`.
pub fn reference_domain() -> CompositeDomain {
    CompositeDomain::default()
}

pub fn square_basis(parity: Parity, size: usize) -> BasisSpec {
    BasisSpec::new(parity, size, size)
}
