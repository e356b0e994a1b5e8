//! Compressed sparse row storage and Jacobi-preconditioned conjugate gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Rows below this size are multiplied sequentially.
const PARALLEL_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the P1 sparsity pattern of `mesh`: the diagonal plus
    /// one entry per edge in each direction. Columns are sorted within rows.
    pub fn with_mesh_pattern(mesh: &Mesh) -> Self {
        let n = mesh.num_vertices();
        let mut counts = vec![1usize; n];
        for e in mesh.edges() {
            counts[e.vertices[0]] += 1;
            counts[e.vertices[1]] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0; nnz];
        let mut fill: Vec<usize> = row_ptr[..n].to_vec();
        for (i, slot) in fill.iter_mut().enumerate() {
            col_idx[*slot] = i;
            *slot += 1;
        }
        for e in mesh.edges() {
            let [a, b] = e.vertices;
            col_idx[fill[a]] = b;
            fill[a] += 1;
            col_idx[fill[b]] = a;
            fill[b] += 1;
        }
        for i in 0..n {
            col_idx[row_ptr[i]..row_ptr[i + 1]].sort_unstable();
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Builds a matrix from a dense row-major array, dropping exact zeros.
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != 0.0 || i == j {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.values[k] * x[self.col_idx[k]];
        }
        s
    }

    /// `y = A x`. Rows are computed independently, so the result does not
    /// depend on the number of worker threads.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A_FF x_F = b_F` over the free indices with Jacobi-preconditioned
/// CG, where entries with `free[i] == false` keep their value in `x`.
/// `x` is used as the initial guess.
pub fn pcg_masked(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    free: &[bool],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let n = a.n();
    let mask = |v: &mut [f64]| {
        for (vi, &f) in v.iter_mut().zip(free) {
            if !f {
                *vi = 0.0;
            }
        }
    };

    let mut r = a.mul_vec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    mask(&mut r);

    let mut b_free = b.to_vec();
    mask(&mut b_free);
    let reference = norm2(&b_free).max(f64::MIN_POSITIVE);

    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .zip(free)
        .map(|(&d, &f)| if f && d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    if free.iter().zip(a.diagonal()).any(|(&f, d)| f && d <= 0.0) {
        return Err(Error::LinearSolveFailure(
            "non-positive diagonal entry on a free row".into(),
        ));
    }

    let mut rel = norm2(&r) / reference;
    if rel <= rel_tol {
        return Ok(CgStats {
            iterations: 0,
            relative_residual: rel,
        });
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        mask(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::LinearSolveFailure(format!(
                "matrix is not positive definite on the free set (p^T A p = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / reference;
        if rel <= rel_tol {
            return Ok(CgStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolveFailure(format!(
        "no convergence after {max_iter} iterations (relative residual {rel:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 2.0;
            if i > 0 {
                d[i * n + i - 1] = -1.0;
            }
            if i + 1 < n {
                d[i * n + i + 1] = -1.0;
            }
        }
        CsrMatrix::from_dense(n, &d)
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let a = laplacian_1d(50);
        let exact: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&exact);
        let mut x = vec![0.0; 50];
        let stats = pcg_masked(&a, &b, &mut x, &[true; 50], 1e-14, 500).unwrap();
        assert!(stats.iterations <= 50);
        for (xi, ei) in x.iter().zip(&exact) {
            assert!((xi - ei).abs() < 1e-10);
        }
    }

    #[test]
    fn masked_entries_stay_fixed() {
        let a = laplacian_1d(10);
        let b = vec![1.0; 10];
        let mut free = [true; 10];
        free[0] = false;
        free[9] = false;
        let mut x = vec![0.0; 10];
        pcg_masked(&a, &b, &mut x, &free, 1e-14, 100).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[9], 0.0);
        let r = a.mul_vec(&x);
        for i in 1..9 {
            assert!((r[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let a = laplacian_1d(200);
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        let err = pcg_masked(&a, &b, &mut x, &[true; 200], 1e-14, 3);
        assert!(matches!(err, Err(Error::LinearSolveFailure(_))));
    }
}
