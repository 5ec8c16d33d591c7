//! Learning with local and global consistency.
//!
//! Minimizes `sum_ij W_ij ||Q_i - Q_j||^2 + mu sum_i ||Q_i - P_i||^2`, whose
//! stationarity condition is `(L + mu I) Q = mu P` with `S = W + W^T` and
//! `L = diag(S 1) - S`.

use ndarray::Array2;

use crate::error::invalid;
use crate::graphs::RowStochasticGraph;
use crate::numerics::{cg_solve, CgOptions, CsrMatrix, DenseMatrix, SymmetricOperator};
use crate::{Error, Result};

/// One-hot rows for the labelled nodes, zero rows elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    p: DenseMatrix,
    labeled: Vec<usize>,
}

impl LabelMatrix {
    /// `labeled[k]` carries class `classes_of[k]`.
    pub fn new(n: usize, num_classes: usize, labeled: &[usize], classes_of: &[usize]) -> Result<Self> {
        if labeled.len() != classes_of.len() {
            return Err(invalid("one class per labelled node is required"));
        }
        if num_classes == 0 {
            return Err(invalid("at least one class is required"));
        }
        let mut p = Array2::zeros((n, num_classes));
        for (&i, &c) in labeled.iter().zip(classes_of) {
            if i >= n || c >= num_classes {
                return Err(invalid(format!("label ({i}, class {c}) out of range")));
            }
            if p.row(i).sum() != 0.0 {
                return Err(invalid(format!("node {i} labelled twice")));
            }
            p[[i, c]] = 1.0;
        }
        let mut labeled = labeled.to_vec();
        labeled.sort_unstable();
        Ok(Self { p, labeled })
    }

    /// Reveals `truth[i]` for every `i` in `labeled`.
    pub fn from_truth(truth: &[usize], num_classes: usize, labeled: &[usize]) -> Result<Self> {
        let classes: Vec<usize> = labeled
            .iter()
            .map(|&i| {
                truth
                    .get(i)
                    .copied()
                    .ok_or_else(|| invalid(format!("node {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Self::new(truth.len(), num_classes, labeled, &classes)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn num_classes(&self) -> usize {
        self.p.ncols()
    }
}

/// Class scores `Q`, one row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct Likelihood {
    pub q: DenseMatrix,
}

/// Row-argmax labels and the rows where the maximum was not unique.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub ties: Vec<usize>,
}

/// `L + mu I` with `L` the Laplacian of `S = W + W^T`. Loops cancel in `L`,
/// so they are left out of both the diagonal and the off-diagonal part.
struct RegularizedLaplacian {
    s: CsrMatrix,
    diagonal: Vec<f64>,
}

impl RegularizedLaplacian {
    fn new(w: &RowStochasticGraph, mu: f64) -> Self {
        let n = w.n();
        let full = w.matrix().add(&w.matrix().transpose());
        let mut triplets = Vec::with_capacity(full.nnz());
        let mut diagonal = vec![mu; n];
        for (i, cols, vals) in full.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                if i != j {
                    triplets.push((i, j, v));
                    diagonal[i] += v;
                }
            }
        }
        Self {
            s: CsrMatrix::from_triplets(n, n, &triplets),
            diagonal,
        }
    }
}

impl SymmetricOperator for RegularizedLaplacian {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.s.matvec(v, out);
        for i in 0..v.len() {
            out[i] = self.diagonal[i] * v[i] - out[i];
        }
    }
}

fn check_inputs(w: &RowStochasticGraph, p: &LabelMatrix, mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    if w.n() != p.matrix().nrows() {
        return Err(invalid(format!(
            "graph has {} nodes, labels {}",
            w.n(),
            p.matrix().nrows()
        )));
    }
    Ok(())
}

/// Solves `(L + mu I) Q = mu P` column by column with Jacobi-preconditioned CG.
pub fn llgc_solve(w: &RowStochasticGraph, p: &LabelMatrix, mu: f64) -> Result<Likelihood> {
    check_inputs(w, p, mu)?;
    let op = RegularizedLaplacian::new(w, mu);
    let opts = CgOptions {
        tol: 1e-10,
        max_iter: None,
        jacobi: Some(op.diagonal.clone()),
    };
    let (n, c) = p.matrix().dim();
    let mut q = Array2::zeros((n, c));
    for k in 0..c {
        let rhs: Vec<f64> = p.matrix().column(k).iter().map(|v| mu * v).collect();
        if rhs.iter().all(|&v| v == 0.0) {
            continue;
        }
        let sol = cg_solve(&op, &rhs, &opts)?;
        q.column_mut(k).assign(&ndarray::Array1::from(sol.x));
    }
    Ok(Likelihood { q })
}

/// `sum_ij W_ij ||Q_i - Q_j||^2 + mu sum_i ||Q_i - P_i||^2`.
pub fn llgc_objective(w: &RowStochasticGraph, p: &LabelMatrix, q: &DenseMatrix, mu: f64) -> f64 {
    let mut smooth = 0.0;
    for (i, cols, vals) in w.matrix().rows() {
        for (&j, &wij) in cols.iter().zip(vals) {
            let d = &q.row(i) - &q.row(j);
            smooth += wij * d.dot(&d);
        }
    }
    let fit = q - p.matrix();
    smooth + mu * fit.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`llgc_objective`]: `2 L Q + 2 mu (Q - P)`.
pub fn llgc_gradient(w: &RowStochasticGraph, p: &LabelMatrix, q: &DenseMatrix, mu: f64) -> Result<DenseMatrix> {
    check_inputs(w, p, mu)?;
    let op = RegularizedLaplacian::new(w, mu);
    let (n, c) = q.dim();
    let mut grad = Array2::zeros((n, c));
    let mut out = vec![0.0; n];
    for k in 0..c {
        let col: Vec<f64> = q.column(k).to_vec();
        op.apply(&col, &mut out);
        for i in 0..n {
            grad[[i, k]] = 2.0 * (out[i] - mu * p.matrix()[[i, k]]);
        }
    }
    Ok(grad)
}

/// `||grad|| / ||grad at Q = 0||`, i.e. the gradient norm relative to `2 mu ||P||`.
pub fn llgc_stationarity(w: &RowStochasticGraph, p: &LabelMatrix, q: &DenseMatrix, mu: f64) -> Result<f64> {
    let grad = llgc_gradient(w, p, q, mu)?;
    let norm = |m: &DenseMatrix| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = 2.0 * mu * norm(p.matrix());
    Ok(if scale > 0.0 { norm(&grad) / scale } else { norm(&grad) })
}

/// Row argmax; ties go to the smallest class index and are reported.
pub fn predict(q: &Likelihood) -> Prediction {
    let mut labels = Vec::with_capacity(q.q.nrows());
    let mut ties = Vec::new();
    for (i, row) in q.q.rows().into_iter().enumerate() {
        let mut best = 0;
        let mut tied = false;
        for (k, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = k;
                tied = false;
            } else if v == row[best] {
                tied = true;
            }
        }
        labels.push(best);
        if tied {
            ties.push(i);
        }
    }
    Prediction { labels, ties }
}

/// Fraction of `pred == truth` over indices not in `exclude`.
pub fn accuracy(pred: &[usize], truth: &[usize], exclude: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(invalid(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut skip = vec![false; pred.len()];
    for &i in exclude {
        if let Some(s) = skip.get_mut(i) {
            *s = true;
        }
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for i in (0..pred.len()).filter(|&i| !skip[i]) {
        total += 1;
        hits += usize::from(pred[i] == truth[i]);
    }
    if total == 0 {
        return Err(Error::DegenerateInput("no points left to evaluate accuracy on".into()));
    }
    Ok(hits as f64 / total as f64)
}
