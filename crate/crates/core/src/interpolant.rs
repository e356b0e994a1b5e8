//! Lagrange, one-sided and bilateral bound-preserving interpolation.
//!
//! The one-sided interpolant lowers the Lagrange interpolant by the largest
//! overshoot `Iz - z` on each vertex patch, so it stays below `z`. The
//! bilateral interpolant additionally zeroes every node whose patch carries a
//! negative one-sided value, which keeps it between `0` and `z`. The patch
//! maximum is taken over a finite [`SampleSet`], and the best samples of each
//! element are then refined by a compass search inside the element.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fespace::FeFunction;
use crate::mesh::{Mesh, Point};
use crate::quadrature::triangle_degree8;

/// Lower bound below which `z` counts as negative in the bilateral check.
pub const NEGATIVE_TOL: f64 = 1e-12;

/// One-sided nodal values within this multiple of `max |z(x_i)|` below zero
/// are roundoff and count as zero in the bilateral check.
pub const ROUNDOFF_BAND: f64 = 1e-14;

/// Barycentric sample points shared by every element.
///
/// The reference element is split into `m * m` congruent sub-triangles. The
/// set holds the lattice of spacing `1 / (2m)`, which contains every
/// sub-triangle vertex and edge midpoint, plus the degree-8 quadrature points
/// of each sub-triangle.
#[derive(Clone, Debug)]
pub struct SampleSet {
    density: usize,
    points: Vec<[f64; 3]>,
}

impl Default for SampleSet {
    fn default() -> Self {
        Self::new(2)
    }
}

impl SampleSet {
    /// # Panics
    /// Panics if `density` is zero.
    pub fn new(density: usize) -> Self {
        assert!(density > 0, "sample density must be positive");
        let m = density;
        let fine = 2 * m;
        let mut points = Vec::new();
        for i in 0..=fine {
            for j in 0..=fine - i {
                let (a, b) = (i as f64 / fine as f64, j as f64 / fine as f64);
                points.push([1.0 - a - b, a, b]);
            }
        }
        let h = 1.0 / m as f64;
        let mut sub = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m - i {
                let (a, b) = (i as f64 * h, j as f64 * h);
                sub.push([(a, b), (a + h, b), (a, b + h)]);
                if i + j + 2 <= m {
                    sub.push([(a + h, b), (a + h, b + h), (a, b + h)]);
                }
            }
        }
        for corners in &sub {
            for q in &triangle_degree8().points {
                let a = q[0] * corners[0].0 + q[1] * corners[1].0 + q[2] * corners[2].0;
                let b = q[0] * corners[0].1 + q[1] * corners[1].1 + q[2] * corners[2].1;
                points.push([1.0 - a - b, a, b]);
            }
        }
        Self { density: m, points }
    }

    pub fn density(&self) -> usize {
        self.density
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies `visit(t, bary, x)` to every sample of every element.
    pub fn for_each<F>(&self, mesh: &Mesh, mut visit: F)
    where
        F: FnMut(usize, [f64; 3], &Point),
    {
        for t in 0..mesh.num_triangles() {
            for &bary in &self.points {
                visit(t, bary, &mesh.map_to_physical(t, bary));
            }
        }
    }
}

fn nodal_values(z: &(impl Fn(&Point) -> f64 + Sync), mesh: &Mesh) -> Result<Vec<f64>> {
    let values: Vec<f64> = mesh.vertices().par_iter().map(z).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData {
            context: "interpolated function at a vertex",
        });
    }
    Ok(values)
}

/// Nodal interpolant `I z`.
pub fn lagrange(z: impl Fn(&Point) -> f64 + Sync, mesh: &Arc<Mesh>) -> Result<FeFunction> {
    Ok(FeFunction::new(mesh.clone(), nodal_values(&z, mesh)?))
}

struct ElementSamples {
    /// Largest `I z - z` over the element samples.
    overshoot: f64,
    /// Smallest sampled value of `z`.
    min_value: f64,
}

/// Number of best samples per element from which the overshoot is polished.
const POLISH_STARTS: usize = 3;
/// Final barycentric step of the compass search.
const POLISH_MIN_STEP: f64 = 1e-9;

/// Compass search for a local maximum of `g` over the reference simplex,
/// moving along the edge directions `e_i - e_j` and halving the step when no
/// move improves.
fn polish_max(g: &impl Fn([f64; 3]) -> f64, start: [f64; 3], value: f64, step: f64) -> f64 {
    let mut best = (start, value);
    let mut h = step;
    while h > POLISH_MIN_STEP {
        let mut moved = false;
        for (i, j) in [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
            let d = h.min(best.0[j]);
            if d <= 0.0 {
                continue;
            }
            let mut b = best.0;
            b[i] += d;
            b[j] -= d;
            let v = g(b);
            if v > best.1 {
                best = (b, v);
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best.1
}

fn sample_elements(
    z: &(impl Fn(&Point) -> f64 + Sync),
    mesh: &Mesh,
    nodal: &[f64],
    samples: &SampleSet,
) -> Result<Vec<ElementSamples>> {
    let spacing = 0.5 / samples.density() as f64;
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles()[t];
            let gap = |bary: [f64; 3]| -> f64 {
                let iz: f64 = (0..3).map(|k| bary[k] * nodal[tri[k]]).sum();
                iz - z(&mesh.map_to_physical(t, bary))
            };
            let mut sampled = Vec::with_capacity(samples.len());
            let mut min_value = f64::INFINITY;
            for &bary in samples.points() {
                let value = z(&mesh.map_to_physical(t, bary));
                if !value.is_finite() {
                    return Err(Error::NonFiniteData {
                        context: "interpolated function at a sample point",
                    });
                }
                let iz: f64 = (0..3).map(|k| bary[k] * nodal[tri[k]]).sum();
                sampled.push((iz - value, bary));
                min_value = min_value.min(value);
            }
            sampled.sort_by(|a, b| b.0.total_cmp(&a.0));
            let overshoot = sampled
                .iter()
                .take(POLISH_STARTS)
                .map(|&(v, bary)| polish_max(&gap, bary, v, spacing).max(v))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(ElementSamples {
                overshoot,
                min_value,
            })
        })
        .collect()
}

fn one_sided_nodal(nodal: &[f64], mesh: &Mesh, elements: &[ElementSamples]) -> Vec<f64> {
    (0..mesh.num_vertices())
        .map(|i| {
            let r = mesh
                .vertex_patch(i)
                .iter()
                .map(|&t| elements[t].overshoot)
                .fold(0.0, f64::max);
            nodal[i] - r
        })
        .collect()
}

/// One-sided interpolant `Π z = I z - R` with `Π z <= z` at every sample.
pub fn one_sided(
    z: impl Fn(&Point) -> f64 + Sync,
    mesh: &Arc<Mesh>,
    samples: &SampleSet,
) -> Result<FeFunction> {
    let nodal = nodal_values(&z, mesh)?;
    let elements = sample_elements(&z, mesh, &nodal, samples)?;
    Ok(FeFunction::new(
        mesh.clone(),
        one_sided_nodal(&nodal, mesh, &elements),
    ))
}

/// Bilateral interpolant with `0 <= Π̌ z <= z` at every sample.
pub fn bilateral(
    z: impl Fn(&Point) -> f64 + Sync,
    mesh: &Arc<Mesh>,
    samples: &SampleSet,
) -> Result<FeFunction> {
    let nodal = nodal_values(&z, mesh)?;
    let elements = sample_elements(&z, mesh, &nodal, samples)?;
    let lowest = elements
        .iter()
        .map(|e| e.min_value)
        .fold(f64::INFINITY, f64::min);
    if lowest < -NEGATIVE_TOL {
        return Err(Error::NegativeInput { value: lowest });
    }
    let pi = one_sided_nodal(&nodal, mesh, &elements);
    let scale = nodal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = -ROUNDOFF_BAND * scale;
    let values = (0..mesh.num_vertices())
        .map(|i| {
            let negative_nearby = mesh
                .vertex_patch(i)
                .iter()
                .flat_map(|&t| mesh.triangles()[t])
                .any(|v| pi[v] < floor);
            if negative_nearby {
                0.0
            } else {
                pi[i].max(0.0)
            }
        })
        .collect();
    Ok(FeFunction::new(mesh.clone(), values))
}

/// `-Π̌(-z)` for nonpositive `z`, so that `z <= result <= 0` at every sample.
pub fn mirrored_bilateral(
    z: impl Fn(&Point) -> f64 + Sync,
    mesh: &Arc<Mesh>,
    samples: &SampleSet,
) -> Result<FeFunction> {
    match bilateral(|x: &Point| -z(x), mesh, samples) {
        Ok(b) => {
            let values = b.coefficients().iter().map(|v| -v).collect();
            Ok(FeFunction::new(mesh.clone(), values))
        }
        Err(Error::NegativeInput { value }) => Err(Error::PositiveInput { value: -value }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::lp_norm;
    use crate::manufactured::eoc;
    use crate::mesh::{make_structured_mesh, refine_uniform, Domain};

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(make_structured_mesh(Domain::UnitSquare, n).unwrap())
    }

    /// Smallest `z - v` over the samples.
    fn min_gap(z: impl Fn(&Point) -> f64, v: &FeFunction, samples: &SampleSet) -> f64 {
        let mut gap = f64::INFINITY;
        samples.for_each(v.mesh(), |t, bary, x| {
            gap = gap.min(z(x) - v.eval_local(t, bary));
        });
        gap
    }

    #[test]
    fn sample_set_contains_vertices_and_midpoints() {
        for m in 1..4 {
            let s = SampleSet::new(m);
            let has = |p: [f64; 3]| {
                s.points()
                    .iter()
                    .any(|q| (0..3).all(|k| (p[k] - q[k]).abs() < 1e-14))
            };
            assert!(has([1.0, 0.0, 0.0]) && has([0.0, 1.0, 0.0]) && has([0.0, 0.0, 1.0]));
            assert!(has([0.5, 0.5, 0.0]) && has([0.0, 0.5, 0.5]) && has([0.5, 0.0, 0.5]));
            let lattice = (2 * m + 1) * (2 * m + 2) / 2;
            assert_eq!(s.len(), lattice + m * m * 16);
            for p in s.points() {
                assert!(p.iter().all(|&c| c > -1e-14));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_functions_are_reproduced() {
        let mesh = square(3);
        let s = SampleSet::default();
        let z = |x: &Point| 0.3 + 2.0 * x.x - x.y;
        for u in [
            lagrange(z, &mesh).unwrap(),
            one_sided(z, &mesh, &s).unwrap(),
        ] {
            for (p, c) in mesh.vertices().iter().zip(u.coefficients()) {
                assert!((z(p) - c).abs() < 1e-14);
            }
            let q = Point::new(0.37, 0.81);
            assert!((u.evaluate(&q).unwrap() - z(&q)).abs() < 1e-14);
        }
    }

    #[test]
    fn lagrange_nodal_values() {
        let mesh = square(2);
        let u = lagrange(|x: &Point| x.x * x.x + x.y * x.y, &mesh).unwrap();
        for (p, c) in mesh.vertices().iter().zip(u.coefficients()) {
            assert_eq!(*c, p.coords.norm_squared());
        }
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let mesh = square(2);
        let s = SampleSet::default();
        assert!(matches!(
            lagrange(|_: &Point| f64::NAN, &mesh),
            Err(Error::NonFiniteData { .. })
        ));
        let spike = |x: &Point| {
            if x.x > 0.1 && x.x < 0.2 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        assert!(matches!(
            one_sided(spike, &mesh, &s),
            Err(Error::NonFiniteData { .. })
        ));
    }

    #[test]
    fn parabola_is_lowered_by_the_midpoint_gap() {
        // On a structured mesh every patch holds an element whose x-range is h,
        // and the chord of x^2 over an interval of length h sits h^2/4 above it.
        let n = 4;
        let h = 1.0 / n as f64;
        let mesh = square(n);
        let pi = one_sided(|x: &Point| x.x * x.x, &mesh, &SampleSet::default()).unwrap();
        for (p, c) in mesh.vertices().iter().zip(pi.coefficients()) {
            assert!((c - (p.x * p.x - h * h / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn one_sided_is_nonlinear() {
        let mesh = square(4);
        let s = SampleSet::default();
        let u = |x: &Point| x.x * x.x;
        let v = |x: &Point| -x.x * x.x + x.x;
        let sum = one_sided(|x: &Point| u(x) + v(x), &mesh, &s).unwrap();
        let pu = one_sided(u, &mesh, &s).unwrap();
        let pv = one_sided(v, &mesh, &s).unwrap();
        let defect = sum
            .coefficients()
            .iter()
            .zip(pu.coefficients().iter().zip(pv.coefficients()))
            .map(|(a, (b, c))| (a - b - c).abs())
            .fold(0.0, f64::max);
        assert!(defect > 1e-3, "defect {defect}");
    }

    #[test]
    fn constant_is_kept_by_bilateral() {
        let mesh = square(3);
        let b = bilateral(|_: &Point| 1.0, &mesh, &SampleSet::default()).unwrap();
        assert!(b.coefficients().iter().all(|&c| (c - 1.0).abs() < 1e-14));
    }

    #[test]
    fn aligned_kink_is_interpolated_exactly() {
        let mesh = square(4);
        let z = |x: &Point| (x.x - 0.5).max(0.0);
        let b = bilateral(z, &mesh, &SampleSet::default()).unwrap();
        for (p, c) in mesh.vertices().iter().zip(b.coefficients()) {
            assert!((c - z(p)).abs() < 1e-14, "{p:?} {c}");
        }
    }

    #[test]
    fn kink_inside_elements_zeroes_its_neighbourhood() {
        // Kink at x = 3/8, the midpoint of the column [1/4, 1/2].
        // Overshoot there is z(1/2)/2 = 1/16, so Π = -1/16 at x = 1/4 and
        // Π = 1/16 at x = 1/2; both columns are zeroed, x >= 3/4 is untouched.
        let mesh = square(4);
        let z = |x: &Point| (x.x - 0.375).max(0.0);
        let s = SampleSet::default();
        let pi = one_sided(z, &mesh, &s).unwrap();
        let b = bilateral(z, &mesh, &s).unwrap();
        for (i, p) in mesh.vertices().iter().enumerate() {
            let expected_pi = match (p.x * 4.0).round() as usize {
                1 => -0.0625,
                2 => 0.0625,
                _ => z(p),
            };
            assert!((pi.coefficients()[i] - expected_pi).abs() < 1e-15, "{p:?}");
            let expected_b = if p.x < 0.6 { 0.0 } else { z(p) };
            assert!((b.coefficients()[i] - expected_b).abs() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn bilateral_bounds_at_a_denser_sample() {
        let mesh = square(5);
        let construct = SampleSet::new(2);
        let check = SampleSet::new(4);
        let fields: [fn(&Point) -> f64; 3] = [
            |x| (std::f64::consts::PI * x.x).sin() * (std::f64::consts::PI * x.y).sin(),
            |x| (x.x - 0.5).powi(2) + (x.y - 0.4).powi(2),
            |x| (x.x + x.y - 0.7).max(0.0).powf(1.5),
        ];
        for z in fields {
            let b = bilateral(z, &mesh, &construct).unwrap();
            let pi = one_sided(z, &mesh, &construct).unwrap();
            assert!(b.coefficients().iter().all(|&c| c >= 0.0));
            assert!(min_gap(z, &b, &check) >= -1e-12);
            assert!(min_gap(z, &pi, &check) >= -1e-12);
        }
    }

    #[test]
    fn negative_input_is_rejected() {
        let mesh = square(2);
        let s = SampleSet::default();
        let r = bilateral(|x: &Point| x.x - 0.5, &mesh, &s);
        assert!(matches!(r, Err(Error::NegativeInput { value }) if value < 0.0));
        assert!(bilateral(|_: &Point| -1e-13, &mesh, &s).is_ok());
    }

    #[test]
    fn mirrored_bilateral_examples() {
        let mesh = square(3);
        let s = SampleSet::default();
        let m = mirrored_bilateral(|_: &Point| -1.0, &mesh, &s).unwrap();
        assert!(m.coefficients().iter().all(|&c| (c + 1.0).abs() < 1e-14));
        let sq = |x: &Point| x.x * x.x;
        let m = mirrored_bilateral(|x: &Point| -sq(x), &mesh, &s).unwrap();
        let b = bilateral(sq, &mesh, &s).unwrap();
        for (a, c) in m.coefficients().iter().zip(b.coefficients()) {
            assert_eq!(*a, -c);
        }
        assert!(matches!(
            mirrored_bilateral(|x: &Point| x.y - 0.5, &mesh, &s),
            Err(Error::PositiveInput { value }) if value > 0.0
        ));
    }

    #[test]
    fn lagrange_converges_at_second_order() {
        let z = |x: &Point| (std::f64::consts::PI * x.x).sin() * (std::f64::consts::PI * x.y).sin();
        let mut mesh = square(4);
        let mut data = Vec::new();
        for _ in 0..3 {
            let iz = lagrange(z, &mesh).unwrap();
            let err = lp_norm(&mesh, |t, bary, x| z(x) - iz.eval_local(t, bary), 1.3).unwrap();
            data.push((mesh.h_max(), err));
            mesh = Arc::new(refine_uniform(&mesh));
        }
        let table = eoc(&data).unwrap();
        for r in table.pairwise {
            assert!((r - 2.0).abs() < 0.1, "rate {r}");
        }
    }
}
