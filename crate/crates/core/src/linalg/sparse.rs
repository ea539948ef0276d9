//! Small helpers around `nalgebra_sparse::CsrMatrix`.

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

/// `y = A x`.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(a.nrows(), y.len());
    for (r, row) in a.row_iter().enumerate() {
        let mut s = 0.0;
        for (c, v) in row.col_indices().iter().zip(row.values()) {
            s += v * x[*c];
        }
        y[r] = s;
    }
}

pub fn mul(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    spmv(a, x, &mut y);
    y
}

/// `y = Aᵀ x`.
pub fn mul_transpose(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.ncols()];
    for (r, row) in a.row_iter().enumerate() {
        let xr = x[r];
        if xr == 0.0 {
            continue;
        }
        for (c, v) in row.col_indices().iter().zip(row.values()) {
            y[*c] += v * xr;
        }
    }
    y
}

pub fn dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.triplet_iter() {
        d[(r, c)] += *v;
    }
    d
}

/// Sparse copy of a dense matrix, dropping exact zeros.
pub fn from_dense(d: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(d.nrows(), d.ncols());
    for r in 0..d.nrows() {
        for c in 0..d.ncols() {
            if d[(r, c)] != 0.0 {
                coo.push(r, c, d[(r, c)]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
