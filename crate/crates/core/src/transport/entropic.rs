//! Entropic symmetric OT: `pi_ij = exp((u_i + u_j - c_ij) / eps)`.
//!
//! The symmetric Sinkhorn map `F(u)_i = -eps log sum_j exp((u_j - c_ij)/eps)`
//! has Jacobian `-pi` at the fixed point, so the plain iteration oscillates
//! along the constant direction. The damped update `u <- (u + F(u)) / 2` has
//! Jacobian `(I - pi)/2` and converges.

use super::{check_epsilon, CostMatrix, DualPotentials, Regularizer, TransportPlan};
use crate::error::invalid;
use crate::{Error, Result};
use ndarray::Array2;

#[derive(Clone, Debug)]
pub struct EntropicSolution {
    pub plan: TransportPlan,
    pub duals: DualPotentials,
    pub iterations: usize,
    pub marginal_residual: f64,
}

/// Log-domain damped symmetric Sinkhorn. Stops when `||pi 1 - 1||_inf <= tol`.
pub fn solve_entropic(c: &CostMatrix, eps: f64, tol: f64, max_iter: usize) -> Result<EntropicSolution> {
    check_epsilon(eps)?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let n = c.n();
    let mut u = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = soft_min(&u, c, i, eps);
        }
        // row sums of the current plan: exp((u_i - F_i) / eps)
        residual = u
            .iter()
            .zip(&f)
            .map(|(ui, fi)| (((ui - fi) / eps).exp() - 1.0).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            let duals = DualPotentials::new(u)?;
            let plan = plan_from_entropic_duals(&duals, c, eps);
            let marginal_residual = plan.marginal_residual();
            return Ok(EntropicSolution {
                plan,
                duals,
                iterations: it,
                marginal_residual,
            });
        }
        if it == max_iter {
            break;
        }
        for (ui, fi) in u.iter_mut().zip(&f) {
            *ui = 0.5 * (*ui + fi);
        }
    }
    Err(Error::NotConverged {
        solver: "symmetric Sinkhorn",
        iterations: max_iter,
        residual,
    })
}

/// `-eps log sum_j exp((u_j - c_ij) / eps)` over admissible `j`.
fn soft_min(u: &[f64], c: &CostMatrix, i: usize, eps: f64) -> f64 {
    let row = c.row(i);
    let skip_self = !c.self_mass_allowed();
    let mut m = f64::NEG_INFINITY;
    for (j, (&uj, &cij)) in u.iter().zip(row).enumerate() {
        if skip_self && j == i {
            continue;
        }
        m = m.max(uj - cij);
    }
    let mut s = 0.0;
    for (j, (&uj, &cij)) in u.iter().zip(row).enumerate() {
        if skip_self && j == i {
            continue;
        }
        s += ((uj - cij - m) / eps).exp();
    }
    -(m + eps * s.ln())
}

/// Dense plan from entropic potentials; the lower triangle mirrors the upper.
pub(crate) fn plan_from_entropic_duals(u: &DualPotentials, c: &CostMatrix, eps: f64) -> TransportPlan {
    let u = u.as_slice();
    let n = u.len();
    let mut pi = Array2::zeros((n, n));
    for i in 0..n {
        let row = c.row(i);
        for j in i..n {
            if i == j && !c.self_mass_allowed() {
                continue;
            }
            let v = ((u[i] + u[j] - row[j]) / eps).exp();
            pi[[i, j]] = v;
            pi[[j, i]] = v;
        }
    }
    TransportPlan::dense(pi, Regularizer::Entropic, eps)
}
