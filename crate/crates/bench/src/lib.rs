//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use signorini::manufactured::example1;
use signorini::{make_structured_mesh, Domain, ManufacturedSolution, Mesh};

/// Structured unit-square mesh with `n` cells per side and the Example 1 data.
pub fn example1_fixture(n: usize) -> (Arc<Mesh>, ManufacturedSolution) {
    let mesh = make_structured_mesh(Domain::UnitSquare, n).expect("n is positive");
    let ms = example1().expect("spline coefficients solve");
    (Arc::new(mesh), ms)
}
