//! Compressed sparse row matrices with just the operations the transfer
//! operators need.

use rayon::prelude::*;

/// Row count above which mat-vec products are split across threads.
const PAR_ROWS: usize = 8192;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row entry lists. Entries within a row may be
    /// unsorted and repeated; repeats are summed and exact zeros dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.into_iter().peekable();
            while let Some((j, mut v)) = iter.next() {
                assert!(j < n_cols, "column {j} out of range {n_cols}");
                while let Some(&(k, w)) = iter.peek() {
                    if k != j {
                        break;
                    }
                    v += w;
                    iter.next();
                }
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n_rows];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        Self::from_rows(n_cols, rows)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        Self::from_rows(
            n_cols,
            rows.iter()
                .map(|r| r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        let row_dot = |i: usize| -> f64 {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&j, &v)| v * x[j])
                .sum()
        };
        if self.n_rows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, out)| *out = row_dot(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, out)| *out = row_dot(i));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        self.transpose_scaled(|_, _, v| v)
    }

    /// Transpose with each entry `(i, j, v)` of `self` mapped to
    /// `(j, i, f(i, j, v))`.
    pub fn transpose_scaled(&self, f: impl Fn(usize, usize, f64) -> f64) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for k in 0..self.n_cols {
            counts[k + 1] += counts[k];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                let slot = next[j];
                col_idx[slot] = i;
                values[slot] = f(i, j, v);
                next[j] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// The square submatrix on the given (sorted, distinct) indices.
    pub fn principal_submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n_cols.max(self.n_rows)];
        for (k, &i) in keep.iter().enumerate() {
            local[i] = k;
        }
        let rows = keep
            .iter()
            .map(|&i| {
                self.row(i)
                    .filter_map(|(j, v)| (local[j] != usize::MAX).then_some((local[j], v)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(keep.len(), rows)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Boolean support graph: for each row the columns with entry `> threshold`.
    pub fn support(&self, threshold: f64) -> Vec<Vec<usize>> {
        (0..self.n_rows)
            .map(|i| self.row(i).filter(|&(_, v)| v > threshold).map(|(j, _)| j).collect())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }
}
