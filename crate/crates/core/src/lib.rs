//! Adaptive P1 finite elements for the scalar Signorini problem
//!
//! ```text
//! -Δu + u = f in Ω,   u ≥ 0,  ∇u·n ≥ 0,  u ∇u·n = 0 on ∂Ω
//! ```
//!
//! with an `L^p` residual error estimator, bound-preserving interpolation,
//! contact-set diagnostics and Dörfler-driven newest-vertex bisection.

pub mod adapt;
pub mod config;
pub mod contact;
pub mod error;
pub mod estimator;
pub mod export;
pub mod fespace;
pub mod interpolant;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use adapt::{
    doerfler_mark, run_adaptive, run_adaptive_with, AdaptiveTrace, CycleRecord, Outcome,
};
pub use config::{parse_config, RunConfig, Strategy};
pub use contact::{critical_point_drift, extract_contact, ContactReport};
pub use error::{Error, Result};
pub use estimator::{element_indicators, global_estimate, BoundaryFlux, IndicatorField};
pub use export::Exporter;
pub use fespace::{assemble, FeFunction, SystemOperator};
pub use interpolant::{bilateral, lagrange, mirrored_bilateral, one_sided, SampleSet};
pub use manufactured::{ExampleName, ManufacturedSolution};
pub use mesh::{make_structured_mesh, Domain, MarkSet, Mesh, Point};
pub use solver::{kkt_check, oracle_enumerate, solve_vi, SolverConfig, ViSolution};
