use ndarray::Array2;

use crate::error::invalid;
use crate::Result;

/// The `k` nearest neighbours of every point (self excluded), ordered by
/// distance with ties broken by the smaller index.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    k: usize,
    neighbors: Vec<usize>,
}

impl NeighborTable {
    pub fn new(sq: &Array2<f64>, k: usize) -> Result<Self> {
        let n = sq.nrows();
        if k == 0 || k >= n {
            return Err(invalid(format!("k must lie in 1..={}, got {k}", n.saturating_sub(1))));
        }
        let mut neighbors = Vec::with_capacity(n * k);
        let mut order: Vec<usize> = Vec::with_capacity(n - 1);
        for i in 0..n {
            order.clear();
            order.extend((0..n).filter(|&j| j != i));
            let row = sq.row(i);
            let cmp = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
            if k < order.len() {
                order.select_nth_unstable_by(k - 1, cmp);
                order.truncate(k);
            }
            order.sort_unstable_by(cmp);
            neighbors.extend_from_slice(&order);
        }
        Ok(Self { k, neighbors })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }
}
