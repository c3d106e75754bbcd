//! Compressed-row sparse matrices.

use crate::error::{Error, Result};

/// CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets, summing
    /// duplicates in their original order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> SparseMatrix {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_offsets[r + 1] += 1;
                col_indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Diagonal matrix from its entries.
    pub fn diagonal(entries: &[f64]) -> SparseMatrix {
        let n = entries.len();
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: entries.to_vec(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as (column, value) pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.apply(x, &mut y);
        y
    }

    /// y = A^T x.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.fill(0.0);
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                y[self.col_indices[k]] += self.values[k] * xr;
            }
        }
    }

    pub fn apply_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        self.apply_transpose(x, &mut y);
        y
    }

    /// Main diagonal (zero where the entry is absent).
    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                if c == r {
                    d[r] = v;
                }
            }
        }
        d
    }

    /// Maximum relative asymmetry max |a_ij - a_ji| / max |a_ij|.
    /// Structurally missing transposed entries count with value zero.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let vt = self.get(c, r).unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst / scale
    }

    /// Entry (r, c) if stored.
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        if r >= self.n_rows {
            return None;
        }
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| self.values[span.start + k])
    }

    /// A + B for matrices with identical shape.
    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::Assembly("matrix shape mismatch in add".into()));
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                triplets.push((r, c, v));
            }
            for (c, v) in other.row(r) {
                triplets.push((r, c, v));
            }
        }
        Ok(SparseMatrix::from_triplets(
            self.n_rows,
            self.n_cols,
            triplets,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_sort() {
        let a = SparseMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 4.0), (0, 0, 1.0), (1, 2, 0.5), (0, 2, 2.0)],
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), Some(1.0));
        assert_eq!(a.get(0, 2), Some(2.0));
        assert_eq!(a.get(1, 2), Some(4.5));
        assert_eq!(a.get(1, 0), None);
        // Sorted columns per row.
        for r in 0..a.n_rows {
            let cols: Vec<usize> = a.row(r).map(|(c, _)| c).collect();
            let mut sorted = cols.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(cols, sorted);
        }
    }

    #[test]
    fn matvec_and_transpose() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let y = a.apply_vec(&[1.0, 1.0, 1.0]);
        assert_eq!(y, vec![3.0, 3.0]);
        let z = a.apply_transpose_vec(&[1.0, 2.0]);
        assert_eq!(z, vec![1.0, 6.0, 2.0]);
    }

    #[test]
    fn diagonal_helpers() {
        let d = SparseMatrix::diagonal(&[2.0, 5.0]);
        assert_eq!(d.diag(), vec![2.0, 5.0]);
        assert_eq!(d.apply_vec(&[1.0, 1.0]), vec![2.0, 5.0]);
        assert_eq!(d.asymmetry(), 0.0);
    }

    #[test]
    fn add_matches_dense_sum() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 2.0)]);
        let b = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 3.0), (0, 1, 1.0)]);
        let s = a.add(&b).unwrap();
        assert_eq!(s.get(0, 0), Some(4.0));
        assert_eq!(s.get(0, 1), Some(1.0));
        assert_eq!(s.get(1, 0), Some(2.0));
    }
}
