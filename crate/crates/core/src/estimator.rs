//! Residual `L^p` error indicators.
//!
//! For each element `K` with diameter `h`:
//!
//! ```text
//! eta_K = h^2         || -Laplace(U) + U - f ||_{L^p(K)}
//! eta_J = h^{1 + 1/p} ( sum_{e in dK} || [grad U] ||^p_{L^p(e)} )^{1/p}
//! ```
//!
//! and the global estimate is `( sum_K eta_K^p + eta_J^p / 2 )^{1/p}`. The
//! exponent `1 + 1/p` is `2 - 1/q` for the conjugate exponent `q`.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::{lp_norm_per_element, FeFunction};
use crate::mesh::{Mesh, Point};
use crate::quadrature::gauss_legendre5;
use crate::solver::ViSolution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementIndicator {
    pub eta_k: f64,
    pub eta_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub p: f64,
    pub per_element: Vec<ElementIndicator>,
    /// `sum_K eta_K^p + eta_J^p / 2`
    pub global_p_power: f64,
    pub global: f64,
}

impl IndicatorField {
    /// `eta_K^p + eta_J^p / 2` per element, the quantity used for marking.
    pub fn element_values(&self) -> Vec<f64> {
        self.per_element
            .iter()
            .map(|e| e.eta_k.powf(self.p) + 0.5 * e.eta_j.powf(self.p))
            .collect()
    }
}

/// Treatment of boundary edges in the jump term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFlux {
    /// `grad U . n` on boundary edges that are not entirely in contact.
    #[default]
    NonContact,
    /// `grad U . n` on every boundary edge.
    Always,
}

/// `Laplace(U)` on element `t`; identically zero for piecewise linears.
fn element_laplacian(_u: &FeFunction, _t: usize) -> f64 {
    0.0
}

/// Indicators for a solution of the discrete problem.
pub fn element_indicators(
    sol: &ViSolution,
    f: impl Fn(&Point) -> f64 + Sync,
    p: f64,
    boundary_flux: BoundaryFlux,
) -> Result<IndicatorField> {
    indicators_for(&sol.u, &sol.active, f, p, boundary_flux)
}

/// Indicators for any P1 function with a given contact flag per vertex.
pub fn indicators_for(
    u: &FeFunction,
    contact: &[bool],
    f: impl Fn(&Point) -> f64 + Sync,
    p: f64,
    boundary_flux: BoundaryFlux,
) -> Result<IndicatorField> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::DegenerateInput(format!(
            "estimator exponent must be finite and greater than 1, got {p}"
        )));
    }
    if p <= 4.0 {
        debug!("estimator exponent p = {p} is outside (4, inf); the bound is not covered there");
    }
    let mesh: &Mesh = u.mesh();

    let residual = lp_norm_per_element(
        mesh,
        |t, bary, x| -element_laplacian(u, t) + u.eval_local(t, bary) - f(x),
        p,
    )?;

    let gradients: Vec<_> = (0..mesh.num_triangles()).map(|t| u.gradient(t)).collect();
    let gauss = gauss_legendre5();
    let edge_power: Vec<f64> = mesh
        .edges()
        .par_iter()
        .map(|edge| {
            let normal = outward_normal_of(mesh, edge.owners.0, edge.vertices);
            let jump = match edge.owners.1 {
                Some(other) => (gradients[edge.owners.0] - gradients[other]).dot(&normal),
                None => {
                    let in_contact = contact[edge.vertices[0]] && contact[edge.vertices[1]];
                    if boundary_flux == BoundaryFlux::NonContact && in_contact {
                        0.0
                    } else {
                        gradients[edge.owners.0].dot(&normal)
                    }
                }
            };
            let len =
                (mesh.vertices()[edge.vertices[0]] - mesh.vertices()[edge.vertices[1]]).norm();
            gauss
                .iter()
                .map(|&(_, w)| w * len * jump.abs().powf(p))
                .sum()
        })
        .collect();

    let per_element: Vec<ElementIndicator> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let h = mesh.diameter(t);
            let edges = mesh.triangle_edges(t);
            let jump_sum: f64 = edges.iter().map(|&e| edge_power[e]).sum();
            ElementIndicator {
                eta_k: h * h * residual[t],
                eta_j: h.powf(1.0 + 1.0 / p) * jump_sum.powf(1.0 / p),
            }
        })
        .collect();

    if per_element
        .iter()
        .any(|e| !(e.eta_k.is_finite() && e.eta_j.is_finite()))
    {
        return Err(Error::NonFiniteData {
            context: "error indicators",
        });
    }
    Ok(finish(p, per_element))
}

fn finish(p: f64, per_element: Vec<ElementIndicator>) -> IndicatorField {
    let global_p_power: f64 = per_element
        .iter()
        .map(|e| e.eta_k.powf(p) + 0.5 * e.eta_j.powf(p))
        .sum();
    let scale = per_element
        .iter()
        .fold(0.0f64, |m, e| m.max(e.eta_k).max(e.eta_j));
    let global = if scale == 0.0 || global_p_power.is_normal() {
        global_p_power.powf(1.0 / p)
    } else {
        // Underflow: rescale by the largest indicator before summing.
        let s: f64 = per_element
            .iter()
            .map(|e| (e.eta_k / scale).powf(p) + 0.5 * (e.eta_j / scale).powf(p))
            .sum();
        scale * s.powf(1.0 / p)
    };
    IndicatorField {
        p,
        per_element,
        global_p_power,
        global,
    }
}

/// Builds an indicator field from given values; mainly for testing marking.
pub fn from_indicators(p: f64, per_element: Vec<ElementIndicator>) -> IndicatorField {
    finish(p, per_element)
}

/// `(sum_K eta_K^p + eta_J^p / 2)^{1/p}`
pub fn global_estimate(ind: &IndicatorField) -> f64 {
    ind.global
}

fn outward_normal_of(mesh: &Mesh, t: usize, [a, b]: [usize; 2]) -> nalgebra::Vector2<f64> {
    let tri = mesh.triangles()[t];
    let pos_a = tri.iter().position(|&v| v == a).unwrap();
    let (from, to) = if tri[(pos_a + 1) % 3] == b {
        (a, b)
    } else {
        (b, a)
    };
    let d = mesh.vertices()[to] - mesh.vertices()[from];
    nalgebra::Vector2::new(d.y, -d.x) / d.norm()
}
