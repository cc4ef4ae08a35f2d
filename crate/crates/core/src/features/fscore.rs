//! One-way ANOVA F-statistic per column, and top-k selection.

use super::{FeatureError, Result};
use crate::corpus::UserClass;
use crate::sparse::SparseMatrix;

/// Score given to columns with zero within-class variance but distinct
/// class means. Sorts above every finite F-statistic.
pub const F_MAX: f64 = f64::MAX;

/// Per-column one-way ANOVA F between the two user classes:
/// `(SSB / 1) / (SSW / (n - 2))`.
///
/// Constant columns score 0. Columns that separate the classes perfectly
/// (no within-class spread) score [`F_MAX`].
pub fn univariate_f_scores(matrix: &SparseMatrix, y: &[UserClass]) -> Result<Vec<f64>> {
    if matrix.n_rows() != y.len() {
        return Err(FeatureError::DimensionMismatch { rows: matrix.n_rows(), labels: y.len() });
    }
    let group = |c: UserClass| usize::from(c != UserClass::Diagnosed);
    let mut n = [0usize; 2];
    for &c in y {
        n[group(c)] += 1;
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(FeatureError::SingleClass);
    }
    let cols = matrix.n_cols;
    let mut sum = vec![[0.0f64; 2]; cols];
    let mut nnz = vec![[0usize; 2]; cols];
    for (row, &c) in matrix.rows.iter().zip(y) {
        let g = group(c);
        for &(j, v) in row {
            sum[j as usize][g] += v;
            nnz[j as usize][g] += 1;
        }
    }
    let means: Vec<[f64; 2]> = sum.iter().map(|s| [s[0] / n[0] as f64, s[1] / n[1] as f64]).collect();

    // Second pass: squared deviations from the class mean, with the implicit
    // zeros of each class contributing (n_g - nnz_g) * mean_g^2.
    let mut ssw = vec![0.0f64; cols];
    let mut sumsq = vec![0.0f64; cols];
    for (row, &c) in matrix.rows.iter().zip(y) {
        let g = group(c);
        for &(j, v) in row {
            let d = v - means[j as usize][g];
            ssw[j as usize] += d * d;
            sumsq[j as usize] += v * v;
        }
    }
    let total = (n[0] + n[1]) as f64;
    let df_within = total - 2.0;
    let scores = (0..cols)
        .map(|j| {
            let m = means[j];
            let w = ssw[j] + (n[0] - nnz[j][0]) as f64 * m[0] * m[0] + (n[1] - nnz[j][1]) as f64 * m[1] * m[1];
            let diff = m[0] - m[1];
            let between = n[0] as f64 * n[1] as f64 / total * diff * diff;
            let tiny = 1e-12 * sumsq[j].max(f64::MIN_POSITIVE);
            match (between <= tiny, w <= tiny) {
                (true, _) => 0.0,
                (false, true) => F_MAX,
                (false, false) => between / (w / df_within),
            }
        })
        .collect();
    Ok(scores)
}

/// Indices of the `k` largest scores, ties going to the lower index,
/// returned in ascending order.
pub fn select_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}
