//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use ultrapos_core::operators::{build_clamped_bilaplacian, build_delta_perturbation, build_robin_laplacian};
use ultrapos_core::positivity::spectral_bound;
use ultrapos_core::{DiscreteOperator, GridSpace, PerturbationFamily, Result, C64};

/// Neumann heat generator on (-π, π) with n interior nodes.
pub fn heat_generator(n: usize) -> Result<DiscreteOperator> {
    Ok(build_robin_laplacian(&GridSpace::new(-PI, PI, n)?, |_| 1.0, 0.0, 0.0)?.negated())
}

pub fn clamped_generator(n: usize) -> Result<DiscreteOperator> {
    Ok(build_clamped_bilaplacian(&GridSpace::interior(-PI, PI, n)?)?.negated())
}

/// Heat generator plus a point evaluation at the origin.
pub fn delta_family(n: usize) -> Result<PerturbationFamily> {
    let a = heat_generator(n)?;
    let b = build_delta_perturbation(&a.space, 0.0, 1.0)?;
    PerturbationFamily::new(a, b)
}

/// Circle around the top of the spectrum, as the spectral stages use it.
pub fn ground_circle(a: &DiscreteOperator) -> Result<(C64, f64)> {
    Ok((C64::new(spectral_bound(a)?, 0.0), 0.1))
}
