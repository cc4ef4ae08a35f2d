//! Minimal sparse containers shared by the feature and classifier stages.

use serde::{Deserialize, Serialize};

/// A sparse row: `(column, value)` pairs sorted by column, no duplicates.
pub type SparseRow = Vec<(u32, f64)>;

/// Fixed-width sparse vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: SparseRow,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Builds a vector from unsorted entries, summing duplicates and dropping zeros.
    pub fn from_unsorted(dim: usize, mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|&(c, _)| c);
        let mut merged: SparseRow = Vec::with_capacity(entries.len());
        for (c, v) in entries {
            match merged.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        debug_assert!(merged.iter().all(|&(c, _)| (c as usize) < dim));
        Self { dim, entries: merged }
    }

    pub fn get(&self, col: u32) -> f64 {
        self.entries.binary_search_by_key(&col, |&(c, _)| c).map(|i| self.entries[i].1).unwrap_or(0.0)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, v)| v * dense[c as usize]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c as usize] = v;
        }
        out
    }
}

/// Row-major sparse matrix with a fixed column count.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n_cols: usize,
    pub rows: Vec<SparseRow>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self { n_cols, rows: Vec::new() }
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let n_cols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(c, &v)| (c as u32, v)).collect())
            .collect();
        Self { n_cols, rows }
    }

    pub fn from_vectors<'a>(vectors: impl IntoIterator<Item = &'a SparseVector>, n_cols: usize) -> Self {
        Self { n_cols, rows: vectors.into_iter().map(|v| v.entries.clone()).collect() }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for row in &self.rows {
            for &(c, v) in row {
                sums[c as usize] += v;
            }
        }
        sums
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; self.n_cols];
                for &(c, v) in row {
                    d[c as usize] = v;
                }
                d
            })
            .collect()
    }
}
