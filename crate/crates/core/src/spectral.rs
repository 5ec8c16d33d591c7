//! Eigenmap embeddings and principal-angle comparison of eigenspaces.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::datasets::PointCloud;
use crate::error::invalid;
use crate::graphs::{knn_gaussian, WeightedGraph};
use crate::numerics::{orthonormalize, sym_eigs, DenseMatrix};
use crate::{Error, Result};

/// Neighbour count of the clean-data reference graph.
pub const REFERENCE_K: usize = 10;
/// Kernel bandwidth of the clean-data reference graph.
pub const REFERENCE_EPSILON: f64 = 0.025;

/// Coordinates from the non-trivial leading eigenvectors of `W_bar`.
#[derive(Clone, Debug)]
pub struct Embedding {
    /// `n x l`, column `k` is `v_{k+2}`.
    pub coords: DenseMatrix,
    /// Matching eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Orthonormal basis of the span of the coordinates.
    pub fn subspace(&self) -> Result<Subspace> {
        Subspace::spanned_by(&self.coords)
    }

    /// CSV with header `v2,...,v{l+1}`, one row per node.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.dim()).map(|k| format!("v{}", k + 2)).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.coords.rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A subspace given by an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DenseMatrix,
}

impl Subspace {
    /// Accepts `basis` if its columns are orthonormal to `1e-10`.
    pub fn new(basis: DenseMatrix) -> Result<Self> {
        let gram = basis.t().dot(&basis);
        let off = gram
            .indexed_iter()
            .map(|((i, j), &g)| (g - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if basis.ncols() == 0 || off > 1e-10 {
            return Err(invalid(format!(
                "basis columns are not orthonormal (deviation {off:.2e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes the columns of `m`.
    pub fn spanned_by(m: &DenseMatrix) -> Result<Self> {
        if m.ncols() == 0 {
            return Err(invalid("a subspace needs at least one column"));
        }
        Ok(Self {
            basis: orthonormalize(m)?,
        })
    }

    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Eigenmap of a connected graph: eigenvectors `v_2..v_{l+1}` of `W_bar = D^{-1} W`,
/// obtained from the symmetric `D^{-1/2} W D^{-1/2}` and mapped back by `D^{-1/2}`.
///
/// Each column is scaled to unit Euclidean norm and signed so that its first
/// entry of largest magnitude is positive.
pub fn eigenmap(g: &WeightedGraph, l: usize) -> Result<Embedding> {
    let n = g.n();
    if l == 0 || l + 1 > n {
        return Err(invalid(format!(
            "embedding dimension must lie in 1..={}, got {l}",
            n.saturating_sub(1)
        )));
    }
    let (_, components) = g.components();
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    let adj = g.adjacency();
    let inv_sqrt: Vec<f64> = adj.row_sums().iter().map(|d| 1.0 / d.sqrt()).collect();
    let sym = adj.scale(&inv_sqrt, &inv_sqrt);
    let eig = sym_eigs(&sym, l + 1)?;
    let mut coords = Array2::zeros((n, l));
    for k in 0..l {
        let mut col: Vec<f64> = (0..n).map(|i| eig.vectors[[i, k + 1]] * inv_sqrt[i]).collect();
        let scale = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        col.iter_mut().for_each(|v| *v *= sign / scale);
        coords.column_mut(k).assign(&ndarray::Array1::from(col));
    }
    Ok(Embedding {
        coords,
        eigenvalues: eig.values[1..].to_vec(),
    })
}

/// Principal angles in radians, ascending, `min(dim A, dim B)` of them.
///
/// Cosines come from the singular values of `A^T B`; angles below `pi/4` are
/// taken instead from the sines, the singular values of `(I - A A^T) B`,
/// which keeps small angles accurate.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(invalid(format!(
            "subspaces live in different dimensions ({} vs {})",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    // Put the larger subspace first so that every column of `b` has an angle.
    let (a, b) = if a.dim() >= b.dim() { (a, b) } else { (b, a) };
    let cross = a.basis.t().dot(&b.basis);
    let residual = &b.basis - &a.basis.dot(&cross);
    let mut cosines = singular_values(&cross);
    cosines.sort_by(|x, y| y.total_cmp(x));
    let mut sines = singular_values(&residual);
    sines.sort_by(f64::total_cmp);
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect())
}

fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let (r, c) = m.dim();
    let dm = nalgebra::DMatrix::from_fn(r, c, |i, j| m[[i, j]]);
    dm.singular_values().iter().copied().collect()
}

/// Mean principal angle between the spans of the top `m` non-trivial eigenvectors.
pub fn eigenspace_error(test: &WeightedGraph, reference: &WeightedGraph, m: usize) -> Result<f64> {
    let reference = eigenmap(reference, m)?.subspace()?;
    eigenspace_error_against(test, &reference)
}

/// As [`eigenspace_error`] against a precomputed reference subspace.
pub fn eigenspace_error_against(test: &WeightedGraph, reference: &Subspace) -> Result<f64> {
    let test = eigenmap(test, reference.dim())?.subspace()?;
    let angles = principal_angles(&test, reference)?;
    Ok(angles.iter().sum::<f64>() / angles.len() as f64)
}

/// The clean-data reference graph: kNN with `k = 10`, Gaussian weights with `eps = 0.025`.
pub fn reference_graph(pc_clean: &PointCloud) -> Result<WeightedGraph> {
    knn_gaussian(pc_clean, REFERENCE_K, REFERENCE_EPSILON)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::row_normalize;
    use crate::numerics::{orthonormal_columns, SeededRng};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn cycle(n: usize) -> WeightedGraph {
        let edges = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 1.0)).collect();
        WeightedGraph::new(n, edges).unwrap()
    }

    fn random_graph(seed: u64, n: usize) -> WeightedGraph {
        let mut rng = SeededRng::new(seed);
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, rng.uniform_in(0.1, 1.0))).collect();
        for i in 0..n {
            for j in i + 2..n {
                if rng.uniform() < 0.2 {
                    edges.push((i, j, rng.uniform_in(0.1, 1.0)));
                }
            }
        }
        WeightedGraph::new(n, edges).unwrap()
    }

    fn subspace_of(m: DenseMatrix) -> Subspace {
        Subspace::spanned_by(&m).unwrap()
    }

    #[test]
    fn eigenpairs_satisfy_random_walk_equation() {
        for (seed, n) in [(1, 30), (2, 250)] {
            let g = random_graph(seed, n);
            let emb = eigenmap(&g, 4).unwrap();
            let w = row_normalize(&g).unwrap();
            let mut out = vec![0.0; n];
            for k in 0..4 {
                let v: Vec<f64> = emb.coords.column(k).to_vec();
                w.apply(&v, &mut out);
                let res: f64 = out
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - emb.eigenvalues[k] * b).powi(2))
                    .sum();
                assert!(res.sqrt() <= 1e-6, "n={n} k={k} residual {}", res.sqrt());
            }
            assert!(emb.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
            assert!(emb.eigenvalues[0] < 1.0);
        }
    }

    #[test]
    fn cycle_embeds_on_a_circle() {
        let emb = eigenmap(&cycle(24), 2).unwrap();
        let radii: Vec<f64> = emb.coords.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        assert!(radii.iter().all(|r| (r - radii[0]).abs() < 1e-8));
        assert!((emb.eigenvalues[0] - (2.0 * std::f64::consts::PI / 24.0).cos()).abs() < 1e-10);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = WeightedGraph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(eigenmap(&g, 1), Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn sign_convention() {
        let emb = eigenmap(&random_graph(5, 20), 3).unwrap();
        for col in emb.coords.columns() {
            let pivot = col.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn angles_basic_cases() {
        let e = |cols: &[[f64; 3]]| subspace_of(Array2::from_shape_fn((3, cols.len()), |(i, j)| cols[j][i]));
        let a = e(&[[1.0, 0.0, 0.0]]);
        let b = e(&[[1.0, 1.0, 0.0]]);
        let angles = principal_angles(&a, &b).unwrap();
        assert_eq!(angles.len(), 1);
        assert!((angles[0] - FRAC_PI_4).abs() < 1e-15);
        let xy = e(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(principal_angles(&xy, &xy).unwrap().iter().all(|&t| t == 0.0));
        let z = e(&[[0.0, 0.0, 1.0]]);
        assert_eq!(principal_angles(&xy, &z).unwrap(), vec![FRAC_PI_2]);
        let four = subspace_of(Array2::eye(4));
        assert!(principal_angles(&four, &a).is_err());
    }

    #[test]
    fn tiny_angle_is_resolved() {
        let t: f64 = 1e-9;
        let a = subspace_of(Array2::from_shape_vec((2, 1), vec![1.0, 0.0]).unwrap());
        let b = subspace_of(Array2::from_shape_vec((2, 1), vec![t.cos(), t.sin()]).unwrap());
        let angle = principal_angles(&a, &b).unwrap()[0];
        assert!((angle - t).abs() < 1e-20);
    }

    #[test]
    fn rotation_invariance_and_symmetry() {
        let mut rng = SeededRng::new(11);
        let a = Subspace::new(orthonormal_columns(&mut rng, 40, 5).unwrap()).unwrap();
        let b = Subspace::new(orthonormal_columns(&mut rng, 40, 3).unwrap()).unwrap();
        let rot = orthonormal_columns(&mut rng, 5, 5).unwrap();
        let a_rot = Subspace::new(a.basis().dot(&rot)).unwrap();
        let ab = principal_angles(&a, &b).unwrap();
        let ba = principal_angles(&b, &a).unwrap();
        let rb = principal_angles(&a_rot, &b).unwrap();
        assert_eq!(ab.len(), 3);
        for k in 0..3 {
            assert!((ab[k] - ba[k]).abs() < 1e-12);
            assert!((ab[k] - rb[k]).abs() < 1e-8);
        }
        assert!(principal_angles(&a, &a_rot).unwrap().iter().all(|&t| t < 1e-8));
    }

    #[test]
    fn eigenspace_error_of_identical_graphs_is_zero() {
        let g = random_graph(3, 60);
        let err = eigenspace_error(&g, &g, 10).unwrap();
        assert!(err.abs() < 1e-8);
        let other = random_graph(4, 60);
        let err = eigenspace_error(&other, &g, 10).unwrap();
        assert!(err > 0.0 && err <= FRAC_PI_2);
    }
}
