use super::{DenseMatrix, SeededRng};
use crate::error::invalid;
use crate::{Error, Result};
use ndarray::Array2;

/// A random `ambient x intrinsic` matrix with orthonormal columns.
///
/// Householder QR of an i.i.d. Gaussian matrix with the signs of `R`'s diagonal
/// absorbed into `Q`, which makes the distribution invariant under right
/// multiplication by orthogonal matrices. Entries are drawn row by row.
pub fn orthonormal_columns(rng: &mut SeededRng, ambient: usize, intrinsic: usize) -> Result<DenseMatrix> {
    if intrinsic == 0 || intrinsic > ambient {
        return Err(invalid(format!(
            "cannot build {intrinsic} orthonormal columns in dimension {ambient}"
        )));
    }
    let g = nalgebra::DMatrix::from_row_iterator(ambient, intrinsic, (0..ambient * intrinsic).map(|_| rng.gaussian()));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    Ok(Array2::from_shape_fn((ambient, intrinsic), |(i, j)| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    }))
}

/// Orthonormal basis of the column span (modified Gram–Schmidt, applied twice).
///
/// Errors when the columns are numerically rank deficient.
pub fn orthonormalize(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, k) = m.dim();
    let mut q = m.clone();
    for j in 0..k {
        let original = m.column(j).dot(&m.column(j)).sqrt();
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let nj = q.column(j).dot(&q.column(j)).sqrt();
        if !(nj > 1e-12 * original.max(f64::MIN_POSITIVE)) || n == 0 {
            return Err(Error::DegenerateInput(format!(
                "column {j} is linearly dependent on earlier columns"
            )));
        }
        q.column_mut(j).mapv_inplace(|x| x / nj);
    }
    Ok(q)
}
