//! Discrete contact set, critical points and the a posteriori check of the
//! contact-set regularity condition on the boundary walk.

use crate::mesh::BoundaryVertex;
use crate::solver::ViSolution;

/// Nodal values below this magnitude count as zero in the cross-check
/// against the active set.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ContactReport {
    /// Boundary vertices in contact, in walk order.
    pub contact_vertices: Vec<usize>,
    /// Maximal runs of consecutive contact vertices along each boundary loop.
    pub components: Vec<Vec<usize>>,
    /// Arc-length coordinates of the midpoints of boundary edges whose
    /// endpoints differ in contact status.
    pub critical_points: Vec<f64>,
    pub n_h: usize,
    /// Contact vertices whose two boundary neighbours are both out of contact.
    pub singleton_violations: Vec<usize>,
    /// Corner vertices in contact with exactly one neighbour out of contact.
    pub corner_violations: Vec<usize>,
    /// Active vertices with `|U_i| > ZERO_TOL`; non-empty means the solver
    /// drifted from exact zeros.
    pub zero_mismatches: Vec<usize>,
    pub condition_ah: bool,
}

/// Builds the contact report from the solver's active set.
pub fn extract_contact(sol: &ViSolution, walk: &[BoundaryVertex]) -> ContactReport {
    let mesh = sol.mesh();
    let u = sol.u.coefficients();
    let in_contact = |v: usize| sol.active[v];

    let mut report = ContactReport {
        contact_vertices: Vec::new(),
        components: Vec::new(),
        critical_points: Vec::new(),
        n_h: 0,
        singleton_violations: Vec::new(),
        corner_violations: Vec::new(),
        zero_mismatches: Vec::new(),
        condition_ah: true,
    };

    let mut start = 0;
    while start < walk.len() {
        let mut end = start;
        while end < walk.len() && walk[end].component == walk[start].component {
            end += 1;
        }
        let lp = &walk[start..end];
        let len = lp.len();
        let status: Vec<bool> = lp.iter().map(|b| in_contact(b.vertex)).collect();
        let first = mesh.vertices()[lp[0].vertex];
        let last = mesh.vertices()[lp[len - 1].vertex];
        let perimeter = lp[len - 1].arc + (first - last).norm();

        for (k, b) in lp.iter().enumerate() {
            let prev = status[(k + len - 1) % len];
            let next = status[(k + 1) % len];
            if status[k] {
                report.contact_vertices.push(b.vertex);
                if u[b.vertex].abs() > ZERO_TOL {
                    report.zero_mismatches.push(b.vertex);
                }
                if !prev && !next {
                    report.singleton_violations.push(b.vertex);
                }
                if b.corner && prev != next {
                    report.corner_violations.push(b.vertex);
                }
            }
            if status[k] != next {
                let arc_next = if k + 1 == len {
                    perimeter
                } else {
                    lp[k + 1].arc
                };
                report.critical_points.push(0.5 * (b.arc + arc_next));
            }
        }

        if status.iter().all(|&s| s) {
            report
                .components
                .push(lp.iter().map(|b| b.vertex).collect());
        } else if status.iter().any(|&s| s) {
            // Start each run right after a non-contact vertex so runs that
            // wrap around the loop start stay in one piece.
            let offset = status.iter().position(|&s| !s).unwrap();
            let mut run = Vec::new();
            for i in 1..=len {
                let k = (offset + i) % len;
                if status[k] {
                    run.push(lp[k].vertex);
                } else if !run.is_empty() {
                    report.components.push(std::mem::take(&mut run));
                }
            }
            if !run.is_empty() {
                report.components.push(run);
            }
        }
        start = end;
    }

    report.n_h = report.critical_points.len();
    report.condition_ah = report.singleton_violations.is_empty()
        && report.corner_violations.is_empty()
        && report.components.iter().all(|c| c.len() >= 2);
    report
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drift {
    /// Largest distance between matched critical points, `+inf` on mismatch.
    pub distance: f64,
    pub count_mismatch: bool,
}

/// Largest arc-length distance between computed and exact critical points,
/// matched in sorted order.
pub fn critical_point_drift(report: &ContactReport, exact_points: &[f64]) -> Drift {
    if report.critical_points.len() != exact_points.len() {
        return Drift {
            distance: f64::INFINITY,
            count_mismatch: true,
        };
    }
    let mut a = report.critical_points.clone();
    let mut b = exact_points.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let distance = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Drift {
        distance,
        count_mismatch: false,
    }
}
