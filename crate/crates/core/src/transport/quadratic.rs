//! Quadratically regularized symmetric OT via semi-smooth Newton on the dual.
//!
//! With `Omega(pi) = 1/2 sum pi_ij^2` the (negated) Lagrangian dual is
//!
//! ```text
//! Phi(u) = 1/(2 eps) sum_ij max(0, u_i + u_j - c_ij)^2 - 2 sum_i u_i
//! ```
//!
//! which is convex and piecewise quadratic with `grad Phi = 2 (pi(u) 1 - 1)`
//! and generalized Hessian `(2/eps) (sigma + diag(sigma 1))`, where `sigma`
//! is the indicator of `u_i + u_j - c_ij >= 0`. Each Newton step solves
//! `(sigma + diag(sigma 1) + delta I) du = -eps (pi 1 - 1)` by conjugate
//! gradients and backtracks until `Phi(u + t du) < Phi(u) + t theta <grad, du>`.

use serde::{Deserialize, Serialize};

use super::{check_epsilon, CostMatrix, DualPotentials, Regularizer, TransportPlan};
use crate::error::invalid;
use crate::numerics::{cg_solve, dot, CgOptions, CsrMatrix, SymmetricOperator};
use crate::{Error, Result};

/// Semi-smooth Newton settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QotConfig {
    pub epsilon: f64,
    /// Ridge added to the Newton system.
    pub delta: f64,
    /// Armijo sufficient-decrease fraction.
    pub theta: f64,
    /// Backtracking factor.
    pub kappa: f64,
    /// Stop when `||pi 1 - 1||_inf` falls to this level.
    pub marginal_tol: f64,
    pub max_newton: usize,
    pub max_backtracks: usize,
    pub cg_tol: f64,
    /// `None` means ten times the problem size.
    pub cg_max_iter: Option<usize>,
}

impl QotConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta: 1e-5,
            theta: 0.1,
            kappa: 0.5,
            marginal_tol: 1e-8,
            max_newton: 200,
            max_backtracks: 50,
            cg_tol: 1e-10,
            cg_max_iter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.theta) || !unit(self.kappa) {
            return Err(invalid(format!(
                "Armijo parameters must lie in (0, 1), got theta={}, kappa={}",
                self.theta, self.kappa
            )));
        }
        if !(self.delta > 0.0) || !(self.marginal_tol > 0.0) || !(self.cg_tol > 0.0) {
            return Err(invalid("delta, marginal_tol and cg_tol must be positive"));
        }
        Ok(())
    }
}

/// Trace of a Newton solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Accepted Newton steps.
    pub iterations: usize,
    /// `||pi 1 - 1||_inf` at the last iterate.
    pub marginal_residual: f64,
    /// `primal(pi(u)) + Phi(u)` at the last iterate.
    pub duality_gap: f64,
    /// `Phi` at the initial point and after every accepted step. Successive
    /// values are accumulated from exactly evaluated differences, so they are
    /// free of the cancellation that plagues recomputing `Phi` near the optimum.
    pub objective_values: Vec<f64>,
    /// Accepted step length `t` per iteration.
    pub step_sizes: Vec<f64>,
    /// `<grad Phi(u), du>` per iteration.
    pub directional_derivatives: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    /// Size of the active set `sigma` per iteration.
    pub active_counts: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct QotSolution {
    pub plan: TransportPlan,
    pub duals: DualPotentials,
    pub diagnostics: SolveDiagnostics,
}

#[inline]
fn admissible(c: &CostMatrix, i: usize, j: usize) -> bool {
    c.self_mass_allowed() || i != j
}

fn dual_value(u: &[f64], c: &CostMatrix, eps: f64) -> f64 {
    let n = u.len();
    let mut sq = 0.0;
    for i in 0..n {
        let row = c.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            let p = u[i] + u[j] - row[j];
            if p > 0.0 && admissible(c, i, j) {
                acc += p * p;
            }
        }
        sq += acc;
    }
    sq / (2.0 * eps) - 2.0 * u.iter().sum::<f64>()
}

/// `Phi(u + t du) - Phi(u)`, summed termwise as `(h_new - h_old)(h_new + h_old)`.
fn dual_change(u: &[f64], du: &[f64], t: f64, c: &CostMatrix, eps: f64) -> f64 {
    let n = u.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = c.row(i);
        let mut acc = 0.0;
        // upper triangle doubled, diagonal once
        let start = if c.self_mass_allowed() { i } else { i + 1 };
        for j in start..n {
            let p_old = u[i] + u[j] - row[j];
            let p_new = p_old + t * (du[i] + du[j]);
            let h_old = p_old.max(0.0);
            let h_new = p_new.max(0.0);
            if h_old > 0.0 || h_new > 0.0 {
                let term = (h_new - h_old) * (h_new + h_old);
                acc += if j == i { term } else { 2.0 * term };
            }
        }
        total += acc;
    }
    total / (2.0 * eps) - 2.0 * t * du.iter().sum::<f64>()
}

/// `Phi(u) = 1/(2 eps) sum_ij max(0, u_i + u_j - c_ij)^2 - 2 sum_i u_i`.
pub fn dual_objective(u: &DualPotentials, c: &CostMatrix, eps: f64) -> f64 {
    dual_value(u.as_slice(), c, eps)
}

/// `grad Phi(u) = 2 (pi(u) 1 - 1)`.
pub fn dual_gradient(u: &DualPotentials, c: &CostMatrix, eps: f64) -> Vec<f64> {
    let u = u.as_slice();
    let n = u.len();
    (0..n)
        .map(|i| {
            let row = c.row(i);
            let s: f64 = (0..n)
                .filter(|&j| admissible(c, i, j))
                .map(|j| (u[i] + u[j] - row[j]).max(0.0))
                .sum();
            2.0 * (s / eps - 1.0)
        })
        .collect()
}

/// `pi_ij = max(0, u_i + u_j - c_ij) / eps`, stored sparsely.
pub fn plan_from_duals(u: &DualPotentials, c: &CostMatrix, eps: f64) -> TransportPlan {
    let u = u.as_slice();
    let n = u.len();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    indptr.push(0);
    for i in 0..n {
        let row = c.row(i);
        for j in 0..n {
            let p = u[i] + u[j] - row[j];
            if p > 0.0 && admissible(c, i, j) {
                indices.push(j);
                data.push(p / eps);
            }
        }
        indptr.push(indices.len());
    }
    TransportPlan::sparse(
        CsrMatrix::from_raw(n, n, indptr, indices, data),
        Regularizer::Quadratic,
        eps,
    )
}

/// `<c, pi> + (eps/2) ||pi||^2`
pub fn primal_objective(plan: &TransportPlan, c: &CostMatrix, eps: f64) -> f64 {
    let mut linear = 0.0;
    let mut quad = 0.0;
    plan.for_each_positive(|i, j, v| {
        linear += c.get(i, j) * v;
        quad += v * v;
    });
    linear + 0.5 * eps * quad
}

/// Active set `sigma` with the Newton operator `sigma + diag(sigma 1) + delta I`.
struct NewtonSystem {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    degree: Vec<f64>,
    self_active: Vec<bool>,
    delta: f64,
    /// `sum_j max(0, P_ij)` per row.
    hinge_sums: Vec<f64>,
}

impl NewtonSystem {
    fn build(u: &[f64], c: &CostMatrix, delta: f64) -> Self {
        let n = u.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut degree = Vec::with_capacity(n);
        let mut self_active = Vec::with_capacity(n);
        let mut hinge_sums = Vec::with_capacity(n);
        indptr.push(0);
        for i in 0..n {
            let row = c.row(i);
            let start = indices.len();
            let mut sum = 0.0;
            let mut diag = false;
            for j in 0..n {
                let p = u[i] + u[j] - row[j];
                if p >= 0.0 && admissible(c, i, j) {
                    indices.push(j as u32);
                    sum += p;
                    diag |= i == j;
                }
            }
            degree.push((indices.len() - start) as f64);
            self_active.push(diag);
            hinge_sums.push(sum);
            indptr.push(indices.len());
        }
        Self {
            indptr,
            indices,
            degree,
            self_active,
            delta,
            hinge_sums,
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.degree
            .iter()
            .zip(&self.self_active)
            .map(|(d, &s)| d + self.delta + if s { 1.0 } else { 0.0 })
            .collect()
    }

    fn active_count(&self) -> usize {
        self.indices.len()
    }
}

impl SymmetricOperator for NewtonSystem {
    fn dim(&self) -> usize {
        self.degree.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..v.len() {
            let cols = &self.indices[self.indptr[i]..self.indptr[i + 1]];
            let s: f64 = cols.iter().map(|&j| v[j as usize]).sum();
            out[i] = s + (self.degree[i] + self.delta) * v[i];
        }
    }
}

/// Solves `min_{pi in Pi} <c, pi> + (eps/2) ||pi||^2` from the start `u = 1`.
pub fn solve_qot(c: &CostMatrix, cfg: &QotConfig) -> Result<QotSolution> {
    cfg.validate()?;
    let n = c.n();
    let eps = cfg.epsilon;
    let mut u = vec![1.0; n];
    let mut diag = SolveDiagnostics::default();
    let mut phi = dual_value(&u, c, eps);
    diag.objective_values.push(phi);
    let cg_opts = |jacobi| CgOptions {
        tol: cfg.cg_tol,
        max_iter: cfg.cg_max_iter,
        jacobi: Some(jacobi),
    };

    loop {
        let system = NewtonSystem::build(&u, c, cfg.delta);
        let excess: Vec<f64> = system.hinge_sums.iter().map(|s| s / eps - 1.0).collect();
        let residual = excess.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        diag.marginal_residual = residual;
        if residual <= cfg.marginal_tol {
            break;
        }
        if diag.iterations >= cfg.max_newton {
            return Err(Error::NewtonNotConverged {
                diagnostics: Box::new(diag),
            });
        }

        let rhs: Vec<f64> = excess.iter().map(|e| -eps * e).collect();
        let step = cg_solve(&system, &rhs, &cg_opts(system.diagonal()))?;
        let du = step.x;
        let grad: Vec<f64> = excess.iter().map(|e| 2.0 * e).collect();
        let slope = dot(&grad, &du);
        diag.active_counts.push(system.active_count());
        diag.cg_iterations.push(step.iterations);
        if !(slope < 0.0) {
            return Err(Error::LineSearchFailed {
                backtracks: 0,
                diagnostics: Box::new(diag),
            });
        }

        let mut t = 1.0;
        let mut backtracks = 0;
        let change = loop {
            let change = dual_change(&u, &du, t, c, eps);
            if change < t * cfg.theta * slope {
                break change;
            }
            backtracks += 1;
            if backtracks > cfg.max_backtracks {
                return Err(Error::LineSearchFailed {
                    backtracks: cfg.max_backtracks,
                    diagnostics: Box::new(diag),
                });
            }
            t *= cfg.kappa;
        };

        for (ui, di) in u.iter_mut().zip(&du) {
            *ui += t * di;
        }
        phi += change;
        diag.iterations += 1;
        diag.objective_values.push(phi);
        diag.step_sizes.push(t);
        diag.directional_derivatives.push(slope);
    }

    let duals = DualPotentials::new(u)?;
    let plan = plan_from_duals(&duals, c, eps);
    diag.duality_gap = primal_objective(&plan, c, eps) + dual_objective(&duals, c, eps);
    Ok(QotSolution {
        plan,
        duals,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use ndarray::{arr2, Array2};

    fn random_cost(rng: &mut SeededRng, n: usize) -> CostMatrix {
        let pts = Array2::from_shape_fn((n, 3), |_| rng.gaussian());
        let mut c = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let d = &pts.row(i) - &pts.row(j);
                c[[i, j]] = d.dot(&d);
            }
        }
        CostMatrix::new(c).unwrap()
    }

    #[test]
    fn zero_duals_give_zero_objective_and_plan() {
        let mut rng = SeededRng::new(0);
        let c = random_cost(&mut rng, 5);
        let u = DualPotentials::new(vec![0.0; 5]).unwrap();
        assert_eq!(dual_objective(&u, &c, 0.7), 0.0);
        assert_eq!(plan_from_duals(&u, &c, 0.7).nnz(), 0);
    }

    #[test]
    fn single_point_closed_form() {
        // Phi(u) = 2u^2/eps - 2u, minimized at eps/2 with value -eps/2
        let c = CostMatrix::new(arr2(&[[0.0]])).unwrap();
        let eps = 0.8;
        let u = DualPotentials::new(vec![0.3]).unwrap();
        assert!((dual_objective(&u, &c, eps) - (2.0 * 0.09 / eps - 0.6)).abs() < 1e-15);
        let sol = solve_qot(&c, &QotConfig::new(eps)).unwrap();
        assert!((sol.duals.as_slice()[0] - eps / 2.0).abs() < 1e-9);
        assert!((dual_objective(&sol.duals, &c, eps) + eps / 2.0).abs() < 1e-9);
        assert!((sol.plan.get(0, 0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn plan_formula_plug_in() {
        let c = CostMatrix::new(arr2(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let u = DualPotentials::new(vec![1.0, 1.0]).unwrap();
        let plan = plan_from_duals(&u, &c, 2.0);
        assert_eq!(plan.get(0, 1), 0.5);
        assert_eq!(plan.get(0, 0), 1.0);
        let u = DualPotentials::new(vec![0.2, 0.3]).unwrap();
        let plan = plan_from_duals(&u, &c, 2.0);
        assert_eq!(plan.get(0, 1), 0.0);
    }

    #[test]
    fn two_point_analytic_solution() {
        let c = CostMatrix::new(arr2(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let sol = solve_qot(&c, &QotConfig::new(2.0)).unwrap();
        let pi = sol.plan.to_dense();
        let expected = arr2(&[[0.75, 0.25], [0.25, 0.75]]);
        assert!((&pi - &expected).iter().all(|x| x.abs() < 1e-8), "{pi}");
    }

    #[test]
    fn zero_cost_gives_uniform_plan() {
        for n in [1, 2, 5, 9] {
            let c = CostMatrix::new(Array2::zeros((n, n))).unwrap();
            let sol = solve_qot(&c, &QotConfig::new(0.3)).unwrap();
            let pi = sol.plan.to_dense();
            assert!(pi.iter().all(|&x| (x - 1.0 / n as f64).abs() < 1e-8));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(12);
        for n in 3..8 {
            let c = random_cost(&mut rng, n);
            let eps = 0.5;
            let u: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 2.0)).collect();
            let grad = dual_gradient(&DualPotentials::new(u.clone()).unwrap(), &c, eps);
            let h = 1e-6;
            for k in 0..n {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (dual_value(&up, &c, eps) - dual_value(&dn, &c, eps)) / (2.0 * h);
                assert!(
                    (fd - grad[k]).abs() <= 1e-5 * grad[k].abs().max(1.0),
                    "{fd} vs {}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn dual_change_matches_direct_difference() {
        let mut rng = SeededRng::new(3);
        let c = random_cost(&mut rng, 6);
        let u: Vec<f64> = (0..6).map(|_| rng.uniform_in(0.0, 2.0)).collect();
        let du: Vec<f64> = (0..6).map(|_| rng.gaussian()).collect();
        for t in [1.0, 0.5, 1e-3] {
            let moved: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
            let direct = dual_value(&moved, &c, 0.4) - dual_value(&u, &c, 0.4);
            assert!((direct - dual_change(&u, &du, t, &c, 0.4)).abs() < 1e-12);
        }
        let masked = c.clone().forbid_self_mass();
        let moved: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        let direct = dual_value(&moved, &masked, 0.4) - dual_value(&u, &masked, 0.4);
        assert!((direct - dual_change(&u, &du, 1.0, &masked, 0.4)).abs() < 1e-12);
    }

    #[test]
    fn newton_operator_is_symmetric() {
        let mut rng = SeededRng::new(7);
        let c = random_cost(&mut rng, 20);
        let u: Vec<f64> = (0..20).map(|_| rng.uniform_in(0.0, 4.0)).collect();
        let sys = NewtonSystem::build(&u, &c, 1e-5);
        for _ in 0..5 {
            let v = rng.gaussian_vec(20);
            let w = rng.gaussian_vec(20);
            let mut av = vec![0.0; 20];
            let mut aw = vec![0.0; 20];
            sys.apply(&v, &mut av);
            sys.apply(&w, &mut aw);
            let (a, b) = (dot(&av, &w), dot(&v, &aw));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
        }
    }

    #[test]
    fn self_mass_forbidden_two_points() {
        let c = CostMatrix::new(arr2(&[[0.0, 1.0], [1.0, 0.0]]))
            .unwrap()
            .forbid_self_mass();
        let sol = solve_qot(&c, &QotConfig::new(0.5)).unwrap();
        let pi = sol.plan.to_dense();
        assert!((&pi - &arr2(&[[0.0, 1.0], [1.0, 0.0]])).iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = CostMatrix::new(arr2(&[[0.0]])).unwrap();
        let mut cfg = QotConfig::new(1.0);
        cfg.theta = 1.0;
        assert!(solve_qot(&c, &cfg).is_err());
        assert!(solve_qot(&c, &QotConfig::new(-1.0)).is_err());
    }

    #[test]
    fn newton_cap_reports_diagnostics() {
        let mut rng = SeededRng::new(1);
        let c = random_cost(&mut rng, 10);
        let mut cfg = QotConfig::new(0.1);
        cfg.max_newton = 1;
        match solve_qot(&c, &cfg) {
            Err(Error::NewtonNotConverged { diagnostics }) => {
                assert_eq!(diagnostics.iterations, 1);
                assert!(diagnostics.marginal_residual > cfg.marginal_tol);
            }
            other => panic!("{other:?}"),
        }
    }
}
