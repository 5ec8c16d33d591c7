//! Symmetric regularized optimal transport over
//! `Pi = { pi >= 0, pi = pi^T, pi 1 = 1 }`.
//!
//! * [`solve_qot`]: quadratic regularizer `(eps/2) sum pi_ij^2`, solved in the
//!   dual by a semi-smooth Newton method. The optimal plan has the hinge form
//!   `pi_ij = max(0, u_i + u_j - c_ij) / eps` and is exactly sparse.
//! * [`solve_entropic`]: entropic regularizer, solved by a damped symmetric
//!   fixed point in the log domain. The plan is dense and strictly positive.
//! * [`projection_oracle`]: Dykstra's alternating projections computing the
//!   Euclidean projection of `-c/eps` onto `Pi`, which is the quadratic
//!   solution by another route. Meant for small test instances.

mod entropic;
mod projection;
mod quadratic;

pub use entropic::{solve_entropic, EntropicSolution};
pub use projection::projection_oracle;
pub use quadratic::{
    dual_gradient, dual_objective, plan_from_duals, primal_objective, solve_qot, QotConfig, QotSolution,
    SolveDiagnostics,
};

use crate::error::invalid;
use crate::numerics::{CsrMatrix, DenseMatrix};
use crate::Result;

/// Symmetric, nonnegative transport costs.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    c: DenseMatrix,
    exponent: f64,
    self_mass_allowed: bool,
}

impl CostMatrix {
    /// Validates `c`: square, finite, nonnegative, exactly symmetric, zero diagonal.
    pub fn new(c: DenseMatrix) -> Result<Self> {
        Self::with_exponent(c, 2.0)
    }

    /// As [`new`](Self::new), recording the distance exponent the costs were built with.
    pub fn with_exponent(c: DenseMatrix, exponent: f64) -> Result<Self> {
        let n = c.nrows();
        if n == 0 || c.ncols() != n {
            return Err(invalid(format!(
                "cost matrix must be square and non-empty, got {:?}",
                c.dim()
            )));
        }
        for i in 0..n {
            if c[[i, i]] != 0.0 {
                return Err(invalid(format!(
                    "cost diagonal must be zero (c[{i},{i}] = {})",
                    c[[i, i]]
                )));
            }
            for j in 0..n {
                let v = c[[i, j]];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!("cost c[{i},{j}] = {v} is not finite and nonnegative")));
                }
                if v != c[[j, i]] {
                    return Err(invalid(format!("cost matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            c,
            exponent,
            self_mass_allowed: true,
        })
    }

    /// Treats the diagonal as infinite cost: points may not keep their own mass.
    pub fn forbid_self_mass(mut self) -> Self {
        self.self_mass_allowed = false;
        self
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[[i, j]]
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn self_mass_allowed(&self) -> bool {
        self.self_mass_allowed
    }

    /// `alpha * c`, same flags.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("cost scale must be positive, got {alpha}")));
        }
        Ok(Self {
            c: &self.c * alpha,
            ..self.clone()
        })
    }

    /// Row `i` as a contiguous slice.
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        self.c.row(i).to_slice().expect("cost matrix is in standard layout")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    Quadratic,
    Entropic,
}

#[derive(Clone, Debug, PartialEq)]
enum PlanStorage {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

/// A symmetric coupling with (approximately) unit row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    storage: PlanStorage,
    regularizer: Regularizer,
    epsilon: f64,
}

impl TransportPlan {
    pub(crate) fn sparse(pi: CsrMatrix, regularizer: Regularizer, epsilon: f64) -> Self {
        Self {
            storage: PlanStorage::Sparse(pi),
            regularizer,
            epsilon,
        }
    }

    pub(crate) fn dense(pi: DenseMatrix, regularizer: Regularizer, epsilon: f64) -> Self {
        Self {
            storage: PlanStorage::Dense(pi),
            regularizer,
            epsilon,
        }
    }

    /// Wraps an arbitrary square matrix, e.g. a hand-built coupling.
    pub fn from_dense(pi: DenseMatrix, regularizer: Regularizer, epsilon: f64) -> Result<Self> {
        if pi.nrows() != pi.ncols() || pi.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("plan must be square with finite nonnegative entries"));
        }
        Ok(Self::dense(pi, regularizer, epsilon))
    }

    pub fn n(&self) -> usize {
        match &self.storage {
            PlanStorage::Dense(m) => m.nrows(),
            PlanStorage::Sparse(m) => m.nrows(),
        }
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            PlanStorage::Dense(m) => m[[i, j]],
            PlanStorage::Sparse(m) => m.get(i, j),
        }
    }

    /// Visits every stored entry `(i, j, pi_ij)` with `pi_ij > 0`.
    pub fn for_each_positive(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            PlanStorage::Dense(m) => {
                for ((i, j), &v) in m.indexed_iter() {
                    if v > 0.0 {
                        f(i, j, v);
                    }
                }
            }
            PlanStorage::Sparse(m) => {
                for (i, cols, vals) in m.rows() {
                    for (&j, &v) in cols.iter().zip(vals) {
                        if v > 0.0 {
                            f(i, j, v);
                        }
                    }
                }
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match &self.storage {
            PlanStorage::Dense(m) => m.rows().into_iter().map(|r| r.sum()).collect(),
            PlanStorage::Sparse(m) => m.row_sums(),
        }
    }

    /// `||pi 1 - 1||_inf`
    pub fn marginal_residual(&self) -> f64 {
        self.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Number of strictly positive entries.
    pub fn nnz(&self) -> usize {
        let mut k = 0;
        self.for_each_positive(|_, _, _| k += 1);
        k
    }

    /// Number of strictly positive off-diagonal entries.
    pub fn offdiag_nnz(&self) -> usize {
        let mut k = 0;
        self.for_each_positive(|i, j, _| k += usize::from(i != j));
        k
    }

    pub fn min_entry(&self) -> f64 {
        self.to_dense().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.storage {
            PlanStorage::Dense(m) => m.clone(),
            PlanStorage::Sparse(m) => m.to_dense(),
        }
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        let mut ok = true;
        self.for_each_positive(|i, j, v| ok &= self.get(j, i) == v);
        ok
    }
}

/// Dual potentials `u`, one per point.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials(Vec<f64>);

impl DualPotentials {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.iter().any(|x| !x.is_finite()) {
            return Err(invalid("dual potentials must be finite"));
        }
        Ok(Self(u))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("regularization epsilon must be positive, got {eps}")));
    }
    Ok(())
}
