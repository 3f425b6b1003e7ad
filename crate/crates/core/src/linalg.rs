//! Linear solvers for the symmetric positive definite Helmholtz operator.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Reverse Cuthill–McKee ordering of a symmetric sparsity pattern.
///
/// Returns `order` with `order[k]` = original index placed at position `k`.
pub fn reverse_cuthill_mckee(matrix: &CsrMatrix<f64>) -> Vec<usize> {
    let n = matrix.nrows();
    let degree: Vec<usize> = (0..n).map(|i| matrix.row(i).nnz()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = matrix
                .row(v)
                .col_indices()
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Sparse Cholesky factorization under a bandwidth-reducing permutation.
pub struct SparseCholesky {
    order: Vec<usize>,
    factor: CscCholesky<f64>,
}

impl SparseCholesky {
    pub fn new(matrix: &CsrMatrix<f64>) -> Result<Self> {
        let order = reverse_cuthill_mckee(matrix);
        let mut position = vec![0usize; order.len()];
        for (k, &i) in order.iter().enumerate() {
            position[i] = k;
        }
        let n = matrix.nrows();
        let mut coo = CooMatrix::new(n, n);
        for (i, j, &v) in matrix.triplet_iter() {
            coo.push(position[i], position[j], v);
        }
        let csc = CscMatrix::from(&coo);
        let factor = CscCholesky::factor(&csc).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { order, factor })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = b.len();
        let mut permuted = DMatrix::from_iterator(n, 1, self.order.iter().map(|&i| b[i]));
        self.factor.solve_mut(&mut permuted);
        let mut x = DVector::zeros(n);
        for (k, &i) in self.order.iter().enumerate() {
            x[i] = permuted[(k, 0)];
        }
        x
    }
}

pub fn spmv(matrix: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(matrix.nrows());
    for (i, row) in matrix.row_iter().enumerate() {
        y[i] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, &v)| v * x[j])
            .sum();
    }
    y
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops when `|b - A x| <= tol |b|`.
pub fn conjugate_gradient(
    matrix: &CsrMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iterations: usize,
) -> Result<(DVector<f64>, CgStats)> {
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let d = matrix.row(i).get_entry(i).map(|e| e.into_value()).unwrap_or(0.0);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        }),
    );
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=max_iterations {
        let ap = spmv(matrix, &p);
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rel = r.norm() / b_norm;
        if rel <= tol {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        z = r.component_mul(&inv_diag);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p = &z + beta * &p;
    }
    Err(Error::SolverDivergence {
        iterations: max_iterations,
        residual: r.norm() / b_norm,
    })
}

/// Dense Cholesky, used as a reference for small meshes.
pub fn dense_cholesky(matrix: &CsrMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = matrix.nrows();
    let mut dense = DMatrix::zeros(n, n);
    for (i, j, &v) in matrix.triplet_iter() {
        dense[(i, j)] += v;
    }
    nalgebra::Cholesky::new(dense).ok_or_else(|| Error::Factorization("dense matrix is not positive definite".into()))
}
