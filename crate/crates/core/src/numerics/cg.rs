use super::{axpy, dot, norm, SymmetricOperator};
use crate::{Error, Result};

/// Conjugate-gradient settings.
#[derive(Clone, Debug)]
pub struct CgOptions {
    /// Relative residual target `||Ax - b|| <= tol * ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * n`.
    pub max_iter: Option<usize>,
    /// Optional Jacobi preconditioner: the diagonal of `A`.
    pub jacobi: Option<Vec<f64>>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            jacobi: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `||Ax - b|| / ||b||`.
    pub residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x = 0`.
pub fn cg_solve<A: SymmetricOperator + ?Sized>(a: &A, b: &[f64], opts: &CgOptions) -> Result<CgSolution> {
    cg_observed(a, b, opts, &mut |_| {})
}

/// [`cg_solve`] that hands every iterate to `observe`.
fn cg_observed<A: SymmetricOperator + ?Sized>(
    a: &A,
    b: &[f64],
    opts: &CgOptions,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(crate::error::invalid(format!(
            "right-hand side has length {} but operator has dimension {n}",
            b.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(crate::error::invalid("cg tolerance must be positive"));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let precondition = |r: &[f64], z: &mut [f64]| match &opts.jacobi {
        Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((zi, ri), di)| *zi = ri / di),
        None => z.copy_from_slice(r),
    };

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = opts.tol * bnorm;
    let mut rnorm = bnorm;
    for it in 0..max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        observe(&x);
        rnorm = norm(&r);
        if rnorm <= target {
            return Ok(CgSolution {
                x,
                iterations: it + 1,
                residual: rnorm / bnorm,
            });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}
