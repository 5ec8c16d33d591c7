//! Euclidean projection onto `Pi` by Dykstra's alternating projections.

use super::{check_epsilon, CostMatrix, Regularizer, TransportPlan};
use crate::error::invalid;
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 5_000_000;

/// Projects `-c/eps` onto `Pi`, the quadratic-OT optimum by a route independent
/// of the dual solver.
///
/// Alternates between the affine set `{pi = pi^T, pi 1 = 1}` (closed form)
/// and the cone `{pi >= 0}` (clipping, plus `pi_ii = 0` when self mass is
/// forbidden), with Dykstra corrections, until no entry moves by more than `tol`
/// and the row sums are within `tol` of one. The iterate can sit still for many
/// sweeps while the corrections drift, so movement alone is not enough.
pub fn projection_oracle(c: &CostMatrix, eps: f64, tol: f64) -> Result<TransportPlan> {
    check_epsilon(eps)?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let n = c.n();
    let mut x: DenseMatrix = c.matrix().mapv(|v| -v / eps);
    let mut p = DenseMatrix::zeros((n, n));
    let mut q = DenseMatrix::zeros((n, n));
    for _ in 0..MAX_SWEEPS {
        let y = project_affine(&(&x + &p));
        p = &x + &p - &y;
        let mut next = &y + &q;
        for ((i, j), v) in next.indexed_iter_mut() {
            if *v < 0.0 || (i == j && !c.self_mass_allowed()) {
                *v = 0.0;
            }
        }
        q = &y + &q - &next;
        let movement = (&next - &x).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        x = next;
        let residual = x
            .rows()
            .into_iter()
            .fold(0.0f64, |m, row| m.max((row.sum() - 1.0).abs()));
        if movement <= tol && residual <= tol {
            return Ok(TransportPlan::dense(x, Regularizer::Quadratic, eps));
        }
    }
    Err(Error::NotConverged {
        solver: "Dykstra projection",
        iterations: MAX_SWEEPS,
        residual: f64::NAN,
    })
}

/// Orthogonal projection onto `{X = X^T, X 1 = 1}`:
/// symmetrize, then subtract `a 1^T + 1 a^T` with
/// `a = (r - (sum r)/(2n) 1) / n`, `r = S 1 - 1`.
fn project_affine(x: &DenseMatrix) -> DenseMatrix {
    let n = x.nrows();
    let nf = n as f64;
    let s = (x + &x.t()) * 0.5;
    let r: Vec<f64> = s.rows().into_iter().map(|row| row.sum() - 1.0).collect();
    let rsum: f64 = r.iter().sum();
    let a: Vec<f64> = r.iter().map(|ri| (ri - rsum / (2.0 * nf)) / nf).collect();
    let mut out = s;
    for ((i, j), v) in out.indexed_iter_mut() {
        *v -= a[i] + a[j];
    }
    out
}
