/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw CSR arrays. Column indices within a row need not be sorted.
    pub fn from_raw(nrows: usize, ncols: usize, indptr: Vec<usize>, indices: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(indptr.len(), nrows + 1);
        assert_eq!(indices.len(), data.len());
        assert_eq!(*indptr.last().unwrap(), indices.len());
        debug_assert!(indices.iter().all(|&j| j < ncols));
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        // sort each row by column and merge duplicates
        let mut indices = Vec::with_capacity(cols.len());
        let mut data = Vec::with_capacity(vals.len());
        let mut out_ptr = vec![0usize; nrows + 1];
        for i in 0..nrows {
            let mut row: Vec<(usize, f64)> = (indptr[i]..indptr[i + 1]).map(|k| (cols[k], vals[k])).collect();
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if indices.len() > out_ptr[i] && *indices.last().unwrap() == j {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    data.push(v);
                }
            }
            out_ptr[i + 1] = indices.len();
        }
        Self::from_raw(nrows, ncols, out_ptr, indices, data)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[usize], &[f64])> + '_ {
        (0..self.nrows).map(move |i| {
            let (c, v) = self.row(i);
            (i, c, v)
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).filter(|(&c, _)| c == j).map(|(_, &v)| v).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.ncols);
        for (i, o) in out.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            *o = cols.iter().zip(vals).map(|(&j, &a)| a * v[j]).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for (i, cols, vals) in self.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// `self + other`, same shape.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for (i, cols, vals) in m.rows() {
                for (&j, &v) in cols.iter().zip(vals) {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Scales entry `(i, j)` by `left[i] * right[j]`.
    pub fn scale(&self, left: &[f64], right: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, &l) in left.iter().enumerate().take(self.nrows) {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.data[k] *= l * right[self.indices[k]];
            }
        }
        out
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut m = ndarray::Array2::zeros((self.nrows, self.ncols));
        for (i, cols, vals) in self.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                m[[i, j]] += v;
            }
        }
        m
    }
}
