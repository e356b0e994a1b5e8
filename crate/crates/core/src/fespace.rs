//! Continuous piecewise-linear finite elements on triangles.

use std::sync::Arc;

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{triangle_degree4, triangle_degree8};
use crate::sparse::CsrMatrix;

/// Nodal coefficient vector over the P1 basis of a mesh.
#[derive(Clone, Debug)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: Arc<Mesh>, coefficients: Vec<f64>) -> Self {
        assert_eq!(
            coefficients.len(),
            mesh.num_vertices(),
            "one coefficient per vertex"
        );
        Self { mesh, coefficients }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_vertices();
        Self::new(mesh, vec![0.0; n])
    }

    /// Nodal interpolation of `f` without validation; see
    /// [`crate::interpolant::lagrange`] for the checked version.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&Point) -> f64) -> Self {
        let coefficients = mesh.vertices().iter().map(f).collect();
        Self::new(mesh, coefficients)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Value on element `t` at barycentric coordinates `bary`.
    pub fn eval_local(&self, t: usize, bary: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles()[t];
        (0..3).map(|k| bary[k] * self.coefficients[tri[k]]).sum()
    }

    /// Constant gradient on element `t`.
    pub fn gradient(&self, t: usize) -> Vector2<f64> {
        let grads = basis_gradients(&self.mesh, t);
        let tri = self.mesh.triangles()[t];
        (0..3).map(|k| grads[k] * self.coefficients[tri[k]]).sum()
    }

    /// Point evaluation. Points within `1e-12` (barycentric) of the mesh are accepted.
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        let (t, bary) = self
            .mesh
            .locate(x, 1e-12)
            .ok_or(Error::PointOutsideDomain { x: x.x, y: x.y })?;
        Ok(self.eval_local(t, bary))
    }
}

/// Gradients of the three barycentric basis functions on element `t`.
pub fn basis_gradients(mesh: &Mesh, t: usize) -> [Vector2<f64>; 3] {
    let p = mesh.corners(t);
    let two_area = 2.0 * mesh.area(t);
    std::array::from_fn(|k| {
        let e = p[(k + 2) % 3] - p[(k + 1) % 3];
        Vector2::new(-e.y, e.x) / two_area
    })
}

/// Sparse matrix of `a(u, v) = (grad u, grad v) + (u, v)` and load `(f, v)`.
#[derive(Clone, Debug)]
pub struct SystemOperator {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
}

impl SystemOperator {
    /// `1/2 a(u, u) - l(u)`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let au = self.matrix.mul_vec(u);
        0.5 * crate::sparse::dot(u, &au) - crate::sparse::dot(&self.load, u)
    }

    /// `A u - F`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(u);
        for (ri, fi) in r.iter_mut().zip(&self.load) {
            *ri -= fi;
        }
        r
    }
}

/// Element stiffness plus mass matrix.
pub fn local_matrix(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let area = mesh.area(t);
    let g = basis_gradients(mesh, t);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mass = if i == j { area / 6.0 } else { area / 12.0 };
            area * g[i].dot(&g[j]) + mass
        })
    })
}

fn local_load(mesh: &Mesh, t: usize, f: &(impl Fn(&Point) -> f64 + Sync)) -> Result<[f64; 3]> {
    let area = mesh.area(t);
    let mut out = [0.0; 3];
    for (bary, w) in triangle_degree4().iter() {
        let fx = f(&mesh.map_to_physical(t, bary));
        if !fx.is_finite() {
            return Err(Error::NonFiniteData {
                context: "right-hand side at a quadrature point",
            });
        }
        for k in 0..3 {
            out[k] += w * area * fx * bary[k];
        }
    }
    Ok(out)
}

/// Assembles the operator and the load vector with the degree-4 rule.
///
/// Element contributions are computed in parallel and scattered in element
/// order, so the result is identical for any number of threads.
pub fn assemble(mesh: &Mesh, f: impl Fn(&Point) -> f64 + Sync) -> Result<SystemOperator> {
    let locals: Vec<([[f64; 3]; 3], [f64; 3])> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| Ok((local_matrix(mesh, t), local_load(mesh, t, &f)?)))
        .collect::<Result<_>>()?;

    let mut matrix = CsrMatrix::with_mesh_pattern(mesh);
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, (m, l)) in locals.iter().enumerate() {
        let tri = mesh.triangles()[t];
        for i in 0..3 {
            load[tri[i]] += l[i];
            for j in 0..3 {
                matrix.add(tri[i], tri[j], m[i][j]);
            }
        }
    }
    Ok(SystemOperator { matrix, load })
}

/// Scaled p-th power sums so large exponents do not underflow.
#[derive(Clone, Copy, Debug)]
struct PowerSum {
    scale: f64,
    sum: f64,
}

impl PowerSum {
    fn from_values(values: &[(f64, f64)], p: f64) -> Self {
        let scale = values.iter().fold(0.0f64, |m, &(v, _)| m.max(v.abs()));
        if scale == 0.0 {
            return Self { scale, sum: 0.0 };
        }
        let sum = values
            .iter()
            .map(|&(v, w)| w * (v.abs() / scale).powf(p))
            .sum();
        Self { scale, sum }
    }

    fn combine(parts: &[PowerSum], p: f64) -> Self {
        let scale = parts.iter().fold(0.0f64, |m, s| m.max(s.scale));
        if scale == 0.0 {
            return Self { scale, sum: 0.0 };
        }
        let sum = parts
            .iter()
            .filter(|s| s.scale > 0.0)
            .map(|s| s.sum * (s.scale / scale).powf(p))
            .sum();
        Self { scale, sum }
    }

    fn root(&self, p: f64) -> f64 {
        self.scale * self.sum.powf(1.0 / p)
    }
}

fn element_power_sums<G>(mesh: &Mesh, g: &G, p: f64) -> Result<Vec<PowerSum>>
where
    G: Fn(usize, [f64; 3], &Point) -> f64 + Sync,
{
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::DegenerateInput(format!(
            "L^p exponent must be finite and at least 1, got {p}"
        )));
    }
    let rule = triangle_degree8();
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let area = mesh.area(t);
            let values: Vec<(f64, f64)> = rule
                .iter()
                .map(|(bary, w)| (g(t, bary, &mesh.map_to_physical(t, bary)), w * area))
                .collect();
            if values.iter().any(|(v, _)| !v.is_finite()) {
                return Err(Error::NonFiniteData {
                    context: "integrand of an L^p norm",
                });
            }
            Ok(PowerSum::from_values(&values, p))
        })
        .collect()
}

/// Elementwise `||g||_{L^p(K)}` with the degree-8 rule. The integrand receives
/// the element index, the barycentric and the physical coordinates.
pub fn lp_norm_per_element<G>(mesh: &Mesh, g: G, p: f64) -> Result<Vec<f64>>
where
    G: Fn(usize, [f64; 3], &Point) -> f64 + Sync,
{
    Ok(element_power_sums(mesh, &g, p)?
        .iter()
        .map(|s| s.root(p))
        .collect())
}

/// Global `||g||_{L^p}` with the degree-8 rule.
pub fn lp_norm<G>(mesh: &Mesh, g: G, p: f64) -> Result<f64>
where
    G: Fn(usize, [f64; 3], &Point) -> f64 + Sync,
{
    let parts = element_power_sums(mesh, &g, p)?;
    Ok(PowerSum::combine(&parts, p).root(p))
}

/// Global `||g||_{L^p}` of a plain function of position.
pub fn lp_norm_fn(mesh: &Mesh, g: impl Fn(&Point) -> f64 + Sync, p: f64) -> Result<f64> {
    lp_norm(mesh, |_, _, x| g(x), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_structured_mesh, Domain};

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(make_structured_mesh(Domain::UnitSquare, n).unwrap())
    }

    #[test]
    fn unit_load_sums_to_area() {
        let sys = assemble(&square(1), |_| 1.0).unwrap();
        assert!((sys.load.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_rows_on_single_triangle() {
        let verts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        let mesh = Mesh::from_parts(None, verts, vec![[0, 1, 2]]).unwrap();
        let m = local_matrix(&mesh, 0);
        let g = basis_gradients(&mesh, 0);
        for i in 0..3 {
            let stiff_row: f64 = (0..3).map(|j| 0.5 * g[i].dot(&g[j])).sum();
            assert!(stiff_row.abs() < 1e-15);
            let row: f64 = m[i].iter().sum();
            assert!((row - 0.5 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_triangle_matrix_by_hand() {
        // Vertices (0,0), (1,0), (0,1), (1,1); the diagonal runs (1,0)-(0,1).
        // Stiffness: each right triangle contributes 1/2 [[2,-1,-1],[-1,1,0],[-1,0,1]]
        // with the right angle first. Mass: area/12 (1 + delta_ij), area = 1/2.
        let s = [
            [1.0, -0.5, -0.5, 0.0],
            [-0.5, 1.0, 0.0, -0.5],
            [-0.5, 0.0, 1.0, -0.5],
            [0.0, -0.5, -0.5, 1.0],
        ];
        let m = [
            [2.0, 1.0, 1.0, 0.0],
            [1.0, 4.0, 2.0, 1.0],
            [1.0, 2.0, 4.0, 1.0],
            [0.0, 1.0, 1.0, 2.0],
        ];
        let mesh = square(1);
        let sys = assemble(&mesh, |_| 0.0).unwrap();
        let idx = |x: f64, y: f64| {
            mesh.vertices()
                .iter()
                .position(|p| p.x == x && p.y == y)
                .unwrap()
        };
        let order = [idx(0.0, 0.0), idx(1.0, 0.0), idx(0.0, 1.0), idx(1.0, 1.0)];
        for i in 0..4 {
            for j in 0..4 {
                let expected = s[i][j] + m[i][j] / 24.0;
                let got = sys.matrix.get(order[i], order[j]);
                assert!(
                    (got - expected).abs() < 1e-15,
                    "({i},{j}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn matrix_symmetric_and_row_sums() {
        let mesh = square(5);
        let sys = assemble(&mesh, |_| 1.0).unwrap();
        assert!(sys.matrix.symmetry_defect() < 1e-13);
        // Row sums of A equal the integrals of the hat functions, which is the
        // load for f = 1.
        for i in 0..mesh.num_vertices() {
            let row: f64 = sys.matrix.row(i).map(|(_, v)| v).sum();
            assert!((row - sys.load[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_forcing_rejected() {
        let err = assemble(&square(2), |p| if p.x > 0.5 { f64::NAN } else { 0.0 });
        assert!(matches!(err, Err(Error::NonFiniteData { .. })));
    }

    #[test]
    fn evaluation_reproduces_linears() {
        let mesh = square(3);
        let ones = FeFunction::from_fn(mesh.clone(), |_| 1.0);
        assert_eq!(ones.evaluate(&Point::new(0.37, 0.81)).unwrap(), 1.0);
        let u = FeFunction::from_fn(mesh.clone(), |p| p.x + p.y);
        for &(a, b) in &[
            (0.1, 0.2),
            (0.5, 0.5),
            (0.99, 0.01),
            (1.0, 1.0),
            (0.333, 0.0),
        ] {
            let v = u.evaluate(&Point::new(a, b)).unwrap();
            assert!((v - (a + b)).abs() < 1e-14);
        }
        for (i, p) in mesh.vertices().iter().enumerate() {
            assert_eq!(u.evaluate(p).unwrap(), u.coefficients()[i]);
        }
        assert!(matches!(
            u.evaluate(&Point::new(1.5, 0.5)),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn gradient_of_linear() {
        let mesh = square(2);
        let u = FeFunction::from_fn(mesh.clone(), |p| 3.0 * p.x - 2.0 * p.y);
        for t in 0..mesh.num_triangles() {
            let g = u.gradient(t);
            assert!((g.x - 3.0).abs() < 1e-13 && (g.y + 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let mesh = square(4);
        for p in [1.0, 2.0, 4.0, 32.0] {
            let v = lp_norm_fn(&mesh, |_| -2.5, p).unwrap();
            assert!((v - 2.5).abs() < 1e-13);
        }
        let l2 = lp_norm_fn(&mesh, |x| x.x, 2.0).unwrap();
        assert!((l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let l4 = lp_norm_fn(&mesh, |x| x.x, 4.0).unwrap();
        assert!((l4 - 0.2f64.powf(0.25)).abs() < 1e-14);
        let per = lp_norm_per_element(&mesh, |_, _, _| 1.0, 2.0).unwrap();
        for (t, v) in per.iter().enumerate() {
            assert!((v - mesh.area(t).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn lp_norm_homogeneous() {
        let mesh = square(3);
        let g = |x: &Point| (3.0 * x.x).sin() + x.y * x.y;
        for p in [1.3, 4.0, 32.0] {
            let base = lp_norm_fn(&mesh, g, p).unwrap();
            let scaled = lp_norm_fn(&mesh, |x| -7.0 * g(x), p).unwrap();
            assert!((scaled - 7.0 * base).abs() <= 1e-13 * scaled);
        }
    }

    #[test]
    fn dirichlet_solve_reproduces_linear_solution() {
        // -Laplace(u) + u = u for linear u; fixing the boundary to u leaves the
        // interior rows with no boundary flux term.
        let mesh = square(6);
        let exact = |p: &Point| 0.3 + 2.0 * p.x - 1.5 * p.y;
        let sys = assemble(&mesh, exact).unwrap();
        let free: Vec<bool> = (0..mesh.num_vertices())
            .map(|v| !mesh.is_boundary_vertex(v))
            .collect();
        let mut u: Vec<f64> = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(v, p)| if free[v] { 0.0 } else { exact(p) })
            .collect();
        crate::sparse::pcg_masked(&sys.matrix, &sys.load, &mut u, &free, 1e-14, 1000).unwrap();
        for (p, v) in mesh.vertices().iter().zip(&u) {
            assert!((exact(p) - v).abs() < 1e-10);
        }
    }

    #[test]
    fn neumann_solve_reproduces_constant() {
        let mesh = square(5);
        let sys = assemble(&mesh, |_| 1.0).unwrap();
        let mut u = vec![0.0; mesh.num_vertices()];
        let free = vec![true; u.len()];
        crate::sparse::pcg_masked(&sys.matrix, &sys.load, &mut u, &free, 1e-14, 1000).unwrap();
        assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }
}
