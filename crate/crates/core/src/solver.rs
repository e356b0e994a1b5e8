//! Discrete Signorini problem: find `U >= 0` on the boundary with
//! `a(U, V - U) >= l(V - U)` for every admissible `V`.
//!
//! Algebraically this is the complementarity system
//!
//! ```text
//! (A U - F)_i = 0                       interior rows
//! U_i >= 0, lambda_i >= 0, U_i lambda_i = 0   boundary rows, lambda = A U - F
//! ```
//!
//! where `lambda_i` is the discrete normal flux at boundary vertex `i`. It is
//! solved with a primal-dual active-set iteration whose inner solves use
//! Jacobi-preconditioned CG on the rows outside the active set.

use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::{FeFunction, SystemOperator};
use crate::mesh::Mesh;
use crate::sparse::{norm2, pcg_masked};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Shift `c` in the active-set rule `U_i - c lambda_i < 0`.
    pub pdas_shift: f64,
    pub max_outer: usize,
    /// Relative residual for the inner CG solves.
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pdas_shift: 1.0,
            max_outer: 100,
            linear_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pdas_shift > 0.0 && self.pdas_shift.is_finite()) {
            return Err(Error::config("solver.pdas_shift", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::config("solver.max_outer", "must be positive"));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::config("solver.linear_tol", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ViSolution {
    pub u: FeFunction,
    /// Per-vertex flag; only boundary vertices can be active.
    pub active: Vec<bool>,
    /// `(A U - F)_i` on boundary vertices, zero on interior vertices.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `1/2 a(U, U) - l(U)` for every iterate, with a flag telling whether the
    /// iterate satisfied `U >= 0` on the boundary.
    pub energies: Vec<(f64, bool)>,
}

impl ViSolution {
    /// Active boundary vertices in increasing index order.
    pub fn active_set(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.u.mesh()
    }
}

fn boundary_mask(mesh: &Mesh) -> Vec<bool> {
    (0..mesh.num_vertices())
        .map(|v| mesh.is_boundary_vertex(v))
        .collect()
}

fn multipliers(sys: &SystemOperator, u: &[f64], boundary: &[bool]) -> Vec<f64> {
    let mut r = sys.residual(u);
    for (ri, &b) in r.iter_mut().zip(boundary) {
        if !b {
            *ri = 0.0;
        }
    }
    r
}

/// Solves the discrete variational inequality starting from an empty active set.
pub fn solve_vi(sys: &SystemOperator, mesh: &Arc<Mesh>, cfg: &SolverConfig) -> Result<ViSolution> {
    let none = vec![false; mesh.num_vertices()];
    solve_vi_from(sys, mesh, cfg, &none, None)
}

/// Primal-dual active-set iteration from a given initial active set and
/// optional initial guess for the inner CG solves.
///
/// Hitting `max_outer` is not an error: the last iterate is returned with
/// `converged == false`.
pub fn solve_vi_from(
    sys: &SystemOperator,
    mesh: &Arc<Mesh>,
    cfg: &SolverConfig,
    initial_active: &[bool],
    initial_guess: Option<&[f64]>,
) -> Result<ViSolution> {
    cfg.validate()?;
    let n = mesh.num_vertices();
    assert_eq!(sys.load.len(), n, "operator assembled on a different mesh");
    let boundary = boundary_mask(mesh);
    let mut active: Vec<bool> = initial_active
        .iter()
        .zip(&boundary)
        .map(|(&a, &b)| a && b)
        .collect();
    let mut u = initial_guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);

    let load_norm = norm2(&sys.load);
    let max_cg = 20 * n + 200;
    let mut energies = Vec::new();
    let mut lambda;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        iterations += 1;
        for (ui, &a) in u.iter_mut().zip(&active) {
            if a {
                *ui = 0.0;
            }
        }
        let free: Vec<bool> = active.iter().map(|a| !a).collect();
        pcg_masked(
            &sys.matrix,
            &sys.load,
            &mut u,
            &free,
            cfg.linear_tol,
            max_cg,
        )?;
        lambda = multipliers(sys, &u, &boundary);

        let feasible = u.iter().zip(&boundary).all(|(&ui, &b)| !b || ui >= 0.0);
        energies.push((sys.energy(&u), feasible));

        // Rounding-level band around zero so that exact zeros from the solve
        // do not flip the set back and forth.
        let u_scale = u
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let tol_u = 1e-12 * u_scale;
        let tol_lambda = 1e-12 * load_norm;
        let next: Vec<bool> = (0..n)
            .map(|i| {
                boundary[i] && {
                    let indicator = u[i] - cfg.pdas_shift * lambda[i];
                    if active[i] {
                        indicator < cfg.pdas_shift * tol_lambda
                    } else {
                        indicator < -tol_u
                    }
                }
            })
            .collect();

        let changed = next.iter().zip(&active).filter(|(a, b)| a != b).count();
        debug!("pdas iteration {iterations}: {changed} changes");
        if changed == 0 {
            converged = true;
            break;
        }
        if iterations >= cfg.max_outer {
            break;
        }
        active = next;
    }

    Ok(ViSolution {
        u: FeFunction::new(mesh.clone(), u),
        active,
        multipliers: lambda,
        iterations,
        converged,
        energies,
    })
}

/// Largest violations of the optimality conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    /// `max |(A U - F)_i|` over interior vertices.
    pub stationarity: f64,
    /// `max(-U_i, 0)` over boundary vertices.
    pub primal: f64,
    /// `max(-lambda_i, 0)` over boundary vertices.
    pub dual: f64,
    /// `max |U_i lambda_i|` over boundary vertices.
    pub complementarity: f64,
    /// Euclidean norm of the load vector, the scale for the tolerances.
    pub load_norm: f64,
}

impl KktReport {
    /// Stationarity and dual feasibility relative to `||F||`,
    /// complementarity relative to `||F||^2`, primal feasibility absolute.
    pub fn passes(&self, tol: f64) -> bool {
        let f = self.load_norm.max(f64::MIN_POSITIVE);
        self.stationarity <= tol * f
            && self.primal <= tol
            && self.dual <= tol * f
            && self.complementarity <= tol * f * f
    }
}

/// Recomputes the multipliers from `U` and reports the four violations.
pub fn kkt_check(sol: &ViSolution, sys: &SystemOperator) -> KktReport {
    let mesh = sol.mesh();
    let u = sol.u.coefficients();
    let r = sys.residual(u);
    let mut report = KktReport {
        stationarity: 0.0,
        primal: 0.0,
        dual: 0.0,
        complementarity: 0.0,
        load_norm: norm2(&sys.load),
    };
    for i in 0..u.len() {
        if mesh.is_boundary_vertex(i) {
            report.primal = report.primal.max(-u[i]);
            report.dual = report.dual.max(-r[i]);
            report.complementarity = report.complementarity.max((u[i] * r[i]).abs());
        } else {
            report.stationarity = report.stationarity.max(r[i].abs());
        }
    }
    report
}

pub const ORACLE_MAX_BOUNDARY: usize = 14;

/// Brute-force reference: tries every subset `S` of boundary vertices, solves
/// the equality-constrained problem `U = 0` on `S` with a dense Cholesky
/// factorization, and returns the first subset whose solution has the right
/// signs (`U >= 0` off `S`, `lambda >= 0` on `S`).
pub fn oracle_enumerate(sys: &SystemOperator, mesh: &Arc<Mesh>) -> Result<ViSolution> {
    let bnd: Vec<usize> = mesh.boundary_vertices().collect();
    if bnd.len() > ORACLE_MAX_BOUNDARY {
        return Err(Error::OracleTooLarge {
            boundary: bnd.len(),
            limit: ORACLE_MAX_BOUNDARY,
        });
    }
    let n = mesh.num_vertices();
    let dense = DMatrix::from_row_slice(n, n, &sys.matrix.to_dense());
    let load_norm = norm2(&sys.load);
    let boundary = boundary_mask(mesh);

    for subset in 0u32..(1 << bnd.len()) {
        let mut active = vec![false; n];
        for (k, &v) in bnd.iter().enumerate() {
            active[v] = subset & (1 << k) != 0;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let mut u = vec![0.0; n];
        if !free.is_empty() {
            let a_ff = DMatrix::from_fn(free.len(), free.len(), |r, c| dense[(free[r], free[c])]);
            let f_f = DVector::from_iterator(free.len(), free.iter().map(|&i| sys.load[i]));
            let chol = a_ff
                .cholesky()
                .ok_or(Error::SingularSystem("oracle reduced system"))?;
            let sol = chol.solve(&f_f);
            for (k, &i) in free.iter().enumerate() {
                u[i] = sol[k];
            }
        }
        let lambda = multipliers(sys, &u, &boundary);
        let u_scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let ok = bnd.iter().all(|&i| {
            if active[i] {
                lambda[i] >= -1e-12 * load_norm
            } else {
                u[i] >= -1e-12 * u_scale
            }
        });
        if ok {
            return Ok(ViSolution {
                u: FeFunction::new(mesh.clone(), u.clone()),
                active,
                multipliers: lambda,
                iterations: subset as usize + 1,
                converged: true,
                energies: vec![(sys.energy(&u), true)],
            });
        }
    }
    Err(Error::SolverDiverged {
        iterations: 1 << bnd.len(),
    })
}
