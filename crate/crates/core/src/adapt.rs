//! Dörfler marking and the solve, estimate, mark, refine loop.

use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};

use crate::config::{RunConfig, Strategy};
use crate::contact::{critical_point_drift, extract_contact, ContactReport};
use crate::error::Result;
use crate::estimator::{element_indicators, IndicatorField};
use crate::fespace::assemble;
use crate::manufactured::{example, signed_lp_errors, ManufacturedSolution};
use crate::mesh::{bisect_refine, make_structured_mesh, MarkSet, Mesh};
use crate::solver::{solve_vi_from, ViSolution};

/// Greedy Dörfler marking on `eta_K^p + eta_J^p / 2`.
///
/// Elements are taken in descending order of their value, ties by ascending
/// index, until the marked sum reaches `beta` times the total. With
/// `beta >= 1` every element with a positive value is marked.
pub fn doerfler_mark(ind: &IndicatorField, beta: f64) -> MarkSet {
    let values = ind.element_values();
    let mut order: Vec<usize> = (0..values.len()).filter(|&t| values[t] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    if beta >= 1.0 {
        return order.into_iter().collect();
    }
    let total: f64 = order.iter().map(|&t| values[t]).sum();
    let target = beta * total;
    let mut marked = MarkSet::new();
    let mut sum = 0.0;
    for t in order {
        if sum >= target {
            break;
        }
        sum += values[t];
        marked.insert(t);
    }
    marked
}

/// Quantities recorded for one cycle of an adaptive run.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub dofs: usize,
    pub h_max: f64,
    pub estimate: f64,
    pub err_pos: Option<f64>,
    pub err_neg: Option<f64>,
    pub err_total: Option<f64>,
    pub effectivity: Option<f64>,
    pub n_h: usize,
    pub condition_ah: bool,
    pub critical_points: Vec<f64>,
    /// Distance of the computed critical points from the exact ones, when known.
    pub drift: Option<f64>,
    pub pdas_iterations: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed,
    SolverDiverged { cycle: usize, iterations: usize },
}

#[derive(Clone, Debug)]
pub struct AdaptiveTrace {
    pub cycles: Vec<CycleRecord>,
    pub outcome: Outcome,
}

/// Everything computed in one cycle, handed to the per-cycle observer.
pub struct CycleView<'a> {
    pub record: &'a CycleRecord,
    pub solution: &'a ViSolution,
    pub indicators: &'a IndicatorField,
    pub contact: &'a ContactReport,
}

/// Runs the adaptive loop for the example named in `cfg`.
pub fn run_adaptive(cfg: &RunConfig) -> Result<AdaptiveTrace> {
    run_adaptive_with(cfg, |_| Ok(()))
}

/// Runs the adaptive loop, calling `observe` after every cycle.
pub fn run_adaptive_with<F>(cfg: &RunConfig, observe: F) -> Result<AdaptiveTrace>
where
    F: FnMut(&CycleView<'_>) -> Result<()>,
{
    cfg.validate()?;
    let ms = example(cfg.example, cfg.example2_literal_sign)?;
    let mesh = Arc::new(make_structured_mesh(ms.domain, cfg.coarse_n)?);
    run_on_mesh(cfg, &ms, mesh, observe)
}

/// Runs the adaptive loop for a given problem and initial mesh.
pub fn run_on_mesh<F>(
    cfg: &RunConfig,
    ms: &ManufacturedSolution,
    initial: Arc<Mesh>,
    mut observe: F,
) -> Result<AdaptiveTrace>
where
    F: FnMut(&CycleView<'_>) -> Result<()>,
{
    cfg.validate()?;
    if cfg.p <= 4.0 {
        warn!(
            "estimator exponent p = {} is outside (4, inf); the upper bound does not cover it",
            cfg.p
        );
    }
    let f = |x: &_| (ms.f)(x);
    let exact_points = ms
        .exact_contact
        .as_ref()
        .map(|c| c.critical_points.as_slice());

    let mut mesh = initial;
    let mut active = vec![false; mesh.num_vertices()];
    let mut guess = vec![0.0; mesh.num_vertices()];
    let mut cycles = Vec::new();

    for cycle in 0..cfg.max_cycles {
        if mesh.num_vertices() > cfg.max_dofs {
            break;
        }
        let start = Instant::now();
        let sys = assemble(&mesh, f)?;
        let sol = solve_vi_from(&sys, &mesh, &cfg.solver, &active, Some(&guess))?;
        if !sol.converged {
            return Ok(AdaptiveTrace {
                cycles,
                outcome: Outcome::SolverDiverged {
                    cycle,
                    iterations: sol.iterations,
                },
            });
        }
        let indicators = element_indicators(&sol, f, cfg.p, cfg.boundary_flux())?;
        let contact = extract_contact(&sol, mesh.boundary());
        let errors = match ms.u {
            Some(_) => Some(signed_lp_errors(&sol.u, ms, cfg.p)?),
            None => None,
        };
        let estimate = indicators.global;
        let record = CycleRecord {
            cycle,
            dofs: mesh.num_vertices(),
            h_max: mesh.h_max(),
            estimate,
            err_pos: errors.map(|e| e.pos),
            err_neg: errors.map(|e| e.neg),
            err_total: errors.map(|e| e.total),
            effectivity: errors.and_then(|e| (e.total > 0.0).then(|| estimate / e.total)),
            n_h: contact.n_h,
            condition_ah: contact.condition_ah,
            critical_points: contact.critical_points.clone(),
            drift: exact_points.map(|pts| critical_point_drift(&contact, pts).distance),
            pdas_iterations: sol.iterations,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        info!(
            "cycle {cycle}: dofs {} estimate {estimate:.6e} error {:?} N_h {}",
            record.dofs, record.err_total, record.n_h
        );
        observe(&CycleView {
            record: &record,
            solution: &sol,
            indicators: &indicators,
            contact: &contact,
        })?;
        cycles.push(record);

        if cycle + 1 == cfg.max_cycles {
            break;
        }
        // Two bisection sweeps per cycle: every marked element is split into
        // (at least) four children, the simplex analog of quadrisection.
        let mut marks = match cfg.strategy {
            Strategy::Uniform => MarkSet::all(&mesh),
            Strategy::Doerfler => doerfler_mark(&indicators, cfg.beta),
        };
        let mut u = sol.u.coefficients().to_vec();
        let mut contact_flags = sol.active.clone();
        for sweep in 0..2 {
            let refinement = bisect_refine(&mesh, &marks);
            u = refinement.prolongate(&u);
            // A new vertex starts active when both endpoints of its edge were.
            let inherited: Vec<bool> = refinement
                .new_vertices
                .iter()
                .map(|&[a, b]| contact_flags[a] && contact_flags[b])
                .collect();
            contact_flags.extend(inherited);
            if sweep == 0 {
                marks = refinement
                    .parent
                    .iter()
                    .enumerate()
                    .filter(|&(_, &parent)| marks.contains(parent))
                    .map(|(child, _)| child)
                    .collect();
            }
            mesh = Arc::new(refinement.mesh);
        }
        active = contact_flags
            .iter()
            .enumerate()
            .map(|(v, &c)| c && mesh.is_boundary_vertex(v))
            .collect();
        guess = u;
    }

    Ok(AdaptiveTrace {
        cycles,
        outcome: Outcome::Completed,
    })
}
