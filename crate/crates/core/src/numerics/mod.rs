//! Shared numerical kernels.

mod cg;
mod eigen;
mod ortho;
mod rng;
mod sparse;

pub use cg::{cg_solve, CgOptions, CgSolution};
pub use eigen::{dense_sym_eigs, lanczos_sym_eigs, sym_eigs, tridiagonal_eigen, SymEigen};
pub use ortho::{orthonormal_columns, orthonormalize};
pub use rng::SeededRng;
pub use sparse::CsrMatrix;

use ndarray::Array2;

/// Row-major dense real matrix.
pub type DenseMatrix = Array2<f64>;

/// A symmetric linear map `v -> A v`.
///
/// Implementors must satisfy `<Av, w> = <v, Aw>`; nothing checks this at runtime.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;

    /// Writes `A v` into `out`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

impl SymmetricOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

impl SymmetricOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.matvec(v, out);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
