//! Weighted neighbourhood graphs from point clouds and transport plans.

mod io;
mod knn;

pub use io::{read_edge_list, write_edge_list};
pub use knn::NeighborTable;

use serde::{Deserialize, Serialize};

use crate::datasets::{squared_distances, PointCloud};
use crate::error::invalid;
use crate::numerics::{CsrMatrix, SymmetricOperator};
use crate::transport::TransportPlan;
use crate::{Error, Result};

/// Weights below this are dropped from edge sets.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Undirected graph stored as an edge list with `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    self_weights: Option<Vec<f64>>,
}

impl WeightedGraph {
    /// Validates and sorts `edges`. Each must have `i < j < n` and a finite positive weight.
    pub fn new(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, w) in &edges {
            if i >= j || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) must satisfy i < j < {n}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(format!("edge ({i}, {j}) has weight {w}")));
            }
        }
        edges.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if let Some(pair) = edges.windows(2).find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(invalid(format!("duplicate edge ({}, {})", pair[0].0, pair[0].1)));
        }
        Ok(Self {
            n,
            edges,
            self_weights: None,
        })
    }

    /// Attaches nonnegative loop weights (one per node).
    pub fn with_self_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("self weights must be finite, nonnegative, one per node"));
        }
        self.self_weights = Some(weights);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn self_weights(&self) -> Option<&[f64]> {
        self.self_weights.as_deref()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search_by_key(&key, |&(a, b, _)| (a, b)).is_ok()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.self_weights.as_ref().map_or(0.0, |s| s[i]);
        }
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by_key(&key, |&(a, b, _)| (a, b))
            .map_or(0.0, |k| self.edges[k].2)
    }

    /// Symmetric adjacency `W`, self weights on the diagonal.
    pub fn adjacency(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(2 * self.edges.len() + self.n);
        for &(i, j, w) in &self.edges {
            triplets.push((i, j, w));
            triplets.push((j, i, w));
        }
        if let Some(s) = &self.self_weights {
            triplets.extend(s.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, &w)| (i, i, w)));
        }
        CsrMatrix::from_triplets(self.n, self.n, &triplets)
    }

    /// Neighbour counts, loops excluded.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j, _) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn degree_stats(&self) -> DegreeStats {
        DegreeStats::from_degrees(&self.degrees())
    }

    /// Connected-component label per node and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j, _) in &self.edges {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = count;
                count += 1;
            }
            out.push(label[root]);
        }
        (out, count)
    }

    pub fn is_connected(&self) -> bool {
        self.components().1 <= 1
    }
}

/// Summary of node degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub std: f64,
}

impl DegreeStats {
    fn from_degrees(deg: &[usize]) -> Self {
        if deg.is_empty() {
            return Self {
                min: 0,
                max: 0,
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = deg.len() as f64;
        let mean = deg.iter().sum::<usize>() as f64 / n;
        let var = deg.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
        Self {
            min: *deg.iter().min().unwrap(),
            max: *deg.iter().max().unwrap(),
            mean,
            std: var.sqrt(),
        }
    }
}

/// Random-walk operator `W_bar = D^{-1} W`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowStochasticGraph {
    matrix: CsrMatrix,
}

impl RowStochasticGraph {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `W_bar v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.matrix.matvec(v, out);
    }
}

/// Divides each row of the adjacency by its sum.
pub fn row_normalize(g: &WeightedGraph) -> Result<RowStochasticGraph> {
    let adj = g.adjacency();
    let sums = adj.row_sums();
    let isolated: Vec<usize> = (0..g.n()).filter(|&i| !(sums[i] > 0.0)).collect();
    if !isolated.is_empty() {
        return Err(Error::IsolatedNodes(isolated));
    }
    let mut indptr = vec![0];
    let mut indices = Vec::with_capacity(adj.nnz());
    let mut data = Vec::with_capacity(adj.nnz());
    for (i, cols, vals) in adj.rows() {
        indices.extend_from_slice(cols);
        data.extend(vals.iter().map(|v| v / sums[i]));
        indptr.push(indices.len());
    }
    Ok(RowStochasticGraph {
        matrix: CsrMatrix::from_raw(g.n(), g.n(), indptr, indices, data),
    })
}

/// Symmetric operator view of a weighted graph's adjacency.
impl SymmetricOperator for WeightedGraph {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, w) in &self.edges {
            out[i] += w * v[j];
            out[j] += w * v[i];
        }
        if let Some(s) = &self.self_weights {
            for (i, w) in s.iter().enumerate() {
                out[i] += w * v[i];
            }
        }
    }
}

fn check_bandwidth(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "kernel bandwidth must be positive and finite, got {eps}"
        )))
    }
}

fn push_weight(edges: &mut Vec<(usize, usize, f64)>, i: usize, j: usize, w: f64) {
    if w >= WEIGHT_FLOOR {
        edges.push((i.min(j), i.max(j), w));
    }
}

/// Union-symmetrized kNN graph with weights `exp(-d^2 / eps)`.
pub fn knn_gaussian(pc: &PointCloud, k: usize, eps: f64) -> Result<WeightedGraph> {
    let sq = squared_distances(pc.points());
    let table = NeighborTable::new(&sq, k)?;
    knn_gaussian_from(&table, &sq, k, eps)
}

/// As [`knn_gaussian`], reusing a precomputed neighbour table with at least `k` columns.
pub fn knn_gaussian_from(
    table: &NeighborTable,
    sq: &ndarray::Array2<f64>,
    k: usize,
    eps: f64,
) -> Result<WeightedGraph> {
    check_bandwidth(eps)?;
    let n = table.n();
    if k == 0 || k > table.k() {
        return Err(invalid(format!("k must lie in 1..={}, got {k}", table.k())));
    }
    let mut keep = std::collections::BTreeSet::new();
    for i in 0..n {
        for &j in &table.neighbors(i)[..k] {
            keep.insert((i.min(j), i.max(j)));
        }
    }
    let mut edges = Vec::with_capacity(keep.len());
    for (i, j) in keep {
        push_weight(&mut edges, i, j, (-sq[[i, j]] / eps).exp());
    }
    WeightedGraph::new(n, edges)
}

/// Complete graph with weights `exp(-d^2 / eps)`.
pub fn gaussian_full(pc: &PointCloud, eps: f64) -> Result<WeightedGraph> {
    gaussian_full_from(&squared_distances(pc.points()), eps)
}

/// As [`gaussian_full`] from precomputed squared distances.
pub fn gaussian_full_from(sq: &ndarray::Array2<f64>, eps: f64) -> Result<WeightedGraph> {
    check_bandwidth(eps)?;
    let n = sq.nrows();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            push_weight(&mut edges, i, j, (-sq[[i, j]] / eps).exp());
        }
    }
    WeightedGraph::new(n, edges)
}

/// Adaptive-bandwidth kernel: `sigma_i` is the distance to the `ka`-th neighbour,
/// candidates are the union of each point's `3 ka` nearest neighbours, and
/// `w_ij = (exp(-d^2/sigma_i^2) + exp(-d^2/sigma_j^2)) / 2`.
pub fn magic_adaptive(pc: &PointCloud, ka: usize) -> Result<WeightedGraph> {
    let sq = squared_distances(pc.points());
    let n = pc.len();
    if ka == 0 || ka + 1 > n {
        return Err(invalid(format!("ka must lie in 1..={}, got {ka}", n.saturating_sub(1))));
    }
    let table = NeighborTable::new(&sq, (3 * ka).min(n - 1))?;
    magic_adaptive_from(&table, &sq, ka)
}

/// Per-point bandwidths used by [`magic_adaptive`].
pub fn magic_bandwidths(table: &NeighborTable, sq: &ndarray::Array2<f64>, ka: usize) -> Result<Vec<f64>> {
    let n = table.n();
    (0..n)
        .map(|i| {
            let s = sq[[i, table.neighbors(i)[ka - 1]]].sqrt();
            if s > 0.0 {
                return Ok(s);
            }
            (0..n)
                .filter(|&j| j != i && sq[[i, j]] > 0.0)
                .map(|j| sq[[i, j]])
                .min_by(f64::total_cmp)
                .map(f64::sqrt)
                .ok_or_else(|| Error::DegenerateInput(format!("point {i} coincides with every other point")))
        })
        .collect()
}

/// As [`magic_adaptive`], reusing a neighbour table with at least `min(3 ka, n - 1)` columns.
pub fn magic_adaptive_from(table: &NeighborTable, sq: &ndarray::Array2<f64>, ka: usize) -> Result<WeightedGraph> {
    let n = table.n();
    let cap = (3 * ka).min(n - 1);
    if ka == 0 || ka > table.k() || cap > table.k() {
        return Err(invalid(format!("ka = {ka} needs a neighbour table with {cap} columns")));
    }
    let sigma = magic_bandwidths(table, sq, ka)?;
    let mut keep = std::collections::BTreeSet::new();
    for i in 0..n {
        for &j in &table.neighbors(i)[..cap] {
            keep.insert((i.min(j), i.max(j)));
        }
    }
    let mut edges = Vec::with_capacity(keep.len());
    for (i, j) in keep {
        let d2 = sq[[i, j]];
        let w = 0.5 * ((-d2 / (sigma[i] * sigma[i])).exp() + (-d2 / (sigma[j] * sigma[j])).exp());
        push_weight(&mut edges, i, j, w);
    }
    WeightedGraph::new(n, edges)
}

/// Treats a transport plan as an adjacency matrix: edges are the positive
/// off-diagonal entries; the diagonal becomes self weights unless dropped.
pub fn plan_to_graph(plan: &TransportPlan, drop_self: bool) -> Result<WeightedGraph> {
    let n = plan.n();
    let mut edges = Vec::new();
    let mut loops = vec![0.0; n];
    plan.for_each_positive(|i, j, w| {
        if i < j {
            push_weight(&mut edges, i, j, w);
        } else if i == j {
            loops[i] = w;
        }
    });
    let g = WeightedGraph::new(n, edges)?;
    if drop_self {
        Ok(g)
    } else {
        g.with_self_weights(loops)
    }
}
