//! Symmetric eigensolvers returning the algebraically largest eigenpairs.

use super::{dot, norm, DenseMatrix, SeededRng, SymmetricOperator};
use crate::error::invalid;
use crate::{Error, Result};
use ndarray::Array2;

/// Leading eigenpairs, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `n x m`, orthonormal columns matching `values`.
    pub vectors: DenseMatrix,
}

/// Operators up to this size are solved densely by [`sym_eigs`].
const DENSE_LIMIT: usize = 200;

/// The `m` largest eigenpairs of a symmetric operator.
///
/// Small operators are materialized and decomposed densely; larger ones go
/// through Lanczos with full reorthogonalization, which falls back to the
/// full Krylov space (and is then exact) when the leading cluster is slow to
/// resolve.
pub fn sym_eigs<A: SymmetricOperator + ?Sized>(a: &A, m: usize) -> Result<SymEigen> {
    if a.dim() <= DENSE_LIMIT {
        dense_sym_eigs(a, m)
    } else {
        lanczos_sym_eigs(a, m, 1e-10)
    }
}

fn check_m(n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(invalid(format!(
            "requested {m} eigenpairs of a {n}-dimensional operator"
        )));
    }
    Ok(())
}

/// Dense decomposition of the materialized operator.
pub fn dense_sym_eigs<A: SymmetricOperator + ?Sized>(a: &A, m: usize) -> Result<SymEigen> {
    let n = a.dim();
    check_m(n, m)?;
    let mut full = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        a.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            full[(i, j)] = col[i];
        }
    }
    let full = (&full + full.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(full);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order[..m].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((n, m), |(r, c)| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-type shifts.
///
/// `diag` has length `k`, `offdiag` length `k - 1`. Only the eigenvector rows
/// listed in `rows` are accumulated, so asking for the last row alone costs
/// `O(k^2)`. Returns unsorted eigenvalues and a `rows.len() x k` matrix whose
/// column `j` holds the requested components of eigenvector `j`.
pub fn tridiagonal_eigen(diag: &[f64], offdiag: &[f64], rows: &[usize]) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = diag.len();
    assert_eq!(offdiag.len() + 1, n.max(1));
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(offdiag);
    let mut z = Array2::from_shape_fn((rows.len(), n), |(r, c)| if rows[r] == c { 1.0 } else { 0.0 });

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::EigenNotConverged(format!(
                        "tridiagonal QL stalled at index {l} of {n}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for mut row in z.rows_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, z))
}

/// Lanczos with full (twice-applied classical Gram–Schmidt) reorthogonalization.
///
/// Converged when every one of the top `m` Ritz pairs has residual
/// `|beta_k s_{k,i}| <= tol * ||A||`, with `||A||` estimated from the Ritz values.
/// The start vector is drawn from a fixed seed so results are reproducible.
pub fn lanczos_sym_eigs<A: SymmetricOperator + ?Sized>(a: &A, m: usize, tol: f64) -> Result<SymEigen> {
    let n = a.dim();
    check_m(n, m)?;
    let mut rng = SeededRng::new(0x1a2c_2054);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity((4 * m + 40).min(n));
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = random_unit(&mut rng, n, &basis);
    let mut w = vec![0.0; n];
    let mut anorm: f64 = 0.0;
    let check_every = 5;

    loop {
        a.apply(&q, &mut w);
        let alpha = dot(&q, &w);
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= alpha * qi;
        }
        if let (Some(&b), Some(prev)) = (betas.last(), basis.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= b * pi;
            }
        }
        basis.push(std::mem::take(&mut q));
        alphas.push(alpha);
        reorthogonalize(&mut w, &basis);
        reorthogonalize(&mut w, &basis);
        let beta = norm(&w);
        anorm = anorm.max(alpha.abs() + beta + betas.last().copied().unwrap_or(0.0));
        let k = basis.len();
        let breakdown = beta <= 1e-12 * anorm.max(f64::MIN_POSITIVE);

        // A breakdown only shows the start vector's Krylov space is invariant;
        // eigenvalues of higher multiplicity may still be missing, so keep going.
        if k >= m && (k == n || (!breakdown && k.is_multiple_of(check_every))) {
            let (vals, last) = tridiagonal_eigen(&alphas, &betas, &[k - 1])?;
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
            let scale = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(anorm * 1e-3);
            let converged = k == n || order[..m].iter().all(|&i| (beta * last[[0, i]]).abs() <= tol * scale);
            if converged {
                return finish(&alphas, &betas, &basis, m, n);
            }
        }

        if breakdown {
            // invariant subspace found; continue in its orthogonal complement
            betas.push(0.0);
            q = random_unit(&mut rng, n, &basis);
        } else {
            betas.push(beta);
            q = w.iter().map(|x| x / beta).collect();
        }
    }
}

fn finish(alphas: &[f64], betas: &[f64], basis: &[Vec<f64>], m: usize, n: usize) -> Result<SymEigen> {
    let k = basis.len();
    let all: Vec<usize> = (0..k).collect();
    let (vals, z) = tridiagonal_eigen(alphas, &betas[..k - 1], &all)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let mut vectors = Array2::zeros((n, m));
    for (c, &idx) in order[..m].iter().enumerate() {
        let mut col = vectors.column_mut(c);
        for (j, v) in basis.iter().enumerate() {
            let coef = z[[j, idx]];
            for (x, vi) in col.iter_mut().zip(v) {
                *x += coef * vi;
            }
        }
    }
    Ok(SymEigen {
        values: order[..m].iter().map(|&i| vals[i]).collect(),
        vectors,
    })
}

fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    let coefs: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
    for (c, v) in coefs.iter().zip(basis) {
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= c * vi;
        }
    }
}

fn random_unit(rng: &mut SeededRng, n: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v = rng.gaussian_vec(n);
        reorthogonalize(&mut v, basis);
        reorthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            return v.iter().map(|x| x / nv).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::CsrMatrix;

    fn residual_ok<A: SymmetricOperator>(a: &A, eig: &SymEigen, tol: f64) {
        let n = a.dim();
        let mut av = vec![0.0; n];
        for (c, &lambda) in eig.values.iter().enumerate() {
            let v: Vec<f64> = eig.vectors.column(c).to_vec();
            a.apply(&v, &mut av);
            let r: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - lambda * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r <= tol, "pair {c}: residual {r}");
        }
        let gram = eig.vectors.t().dot(&eig.vectors);
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - e).abs() < 1e-10, "gram[{i},{j}] = {}", gram[[i, j]]);
            }
        }
    }

    #[test]
    fn identity_eigenvalues() {
        let a: DenseMatrix = Array2::eye(4);
        let eig = sym_eigs(&a, 2).unwrap();
        assert_eq!(eig.values.len(), 2);
        for v in eig.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_sorted_descending() {
        let a: DenseMatrix = Array2::from_diag(&ndarray::arr1(&[3.0, 1.0, 2.0]));
        let eig = sym_eigs(&a, 3).unwrap();
        for (v, e) in eig.values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let a: DenseMatrix = ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        let eig = sym_eigs(&a, 2).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.vectors.column(0);
        let v1 = eig.vectors.column(1);
        assert!((v0[0].abs() - s).abs() < 1e-12 && (v0[0] - v0[1]).abs() < 1e-12);
        assert!((v1[0].abs() - s).abs() < 1e-12 && (v1[0] + v1[1]).abs() < 1e-12);
    }

    #[test]
    fn m_larger_than_n_is_rejected() {
        let a: DenseMatrix = Array2::eye(3);
        assert!(matches!(sym_eigs(&a, 4), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            lanczos_sym_eigs(&a, 4, 1e-10),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [2.0, -1.0, 0.5, 3.0, 1.5];
        let off = [0.7, -0.3, 1.1, 0.2];
        let rows: Vec<usize> = (0..5).collect();
        let (vals, z) = tridiagonal_eigen(&diag, &off, &rows).unwrap();
        let mut t = Array2::<f64>::zeros((5, 5));
        for i in 0..5 {
            t[[i, i]] = diag[i];
            if i < 4 {
                t[[i, i + 1]] = off[i];
                t[[i + 1, i]] = off[i];
            }
        }
        for (j, &lambda) in vals.iter().enumerate() {
            let v = z.column(j).to_owned();
            let r = t.dot(&v) - &v * lambda;
            assert!(r.iter().all(|x| x.abs() < 1e-12));
        }
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let dense = dense_sym_eigs(&t, 5).unwrap();
        for (a, b) in sorted.iter().zip(&dense.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense_on_random_sparse_matrix() {
        let mut rng = SeededRng::new(21);
        let n = 300;
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, rng.gaussian()));
            for _ in 0..4 {
                let j = rng.index(n);
                let v = rng.gaussian();
                triplets.push((i, j, v));
                triplets.push((j, i, v));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &triplets);
        let lz = lanczos_sym_eigs(&a, 8, 1e-11).unwrap();
        let de = dense_sym_eigs(&a, 8).unwrap();
        for (x, y) in lz.values.iter().zip(&de.values) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        residual_ok(&a, &lz, 1e-8);
    }

    #[test]
    fn lanczos_handles_exact_invariant_subspace() {
        // diagonal matrix with few distinct values: Krylov space collapses early
        let n = 250;
        let diag: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
        let a: DenseMatrix = Array2::from_diag(&ndarray::Array1::from(diag));
        let eig = lanczos_sym_eigs(&a, 3, 1e-10).unwrap();
        for v in &eig.values {
            assert!((v - 4.0).abs() < 1e-10);
        }
        residual_ok(&a, &eig, 1e-8);
    }
}
