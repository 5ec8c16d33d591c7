use crate::error::invalid;
use crate::graphs::RowStochasticGraph;
use crate::numerics::DenseMatrix;
use crate::Result;

/// `W_bar^t X`, applied one step at a time.
pub fn magic_denoise(w: &RowStochasticGraph, x: &DenseMatrix, t: usize) -> Result<DenseMatrix> {
    if x.nrows() != w.n() {
        return Err(invalid(format!("data has {} rows, graph {} nodes", x.nrows(), w.n())));
    }
    let mut cur = x.clone();
    let mut next = DenseMatrix::zeros(x.dim());
    for _ in 0..t {
        for (i, cols, vals) in w.matrix().rows() {
            let mut row = next.row_mut(i);
            row.fill(0.0);
            for (&j, &wij) in cols.iter().zip(vals) {
                row.scaled_add(wij, &cur.row(j));
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}
