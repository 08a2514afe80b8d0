//! Dense kernels over column-major `f64` storage.
//!
//! Summation order is fixed (four interleaved partial sums, combined
//! pairwise), so every result is bit-reproducible regardless of how callers
//! split work across threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Work (rows × columns) below which correlation stays single-threaded.
const PAR_THRESHOLD: usize = 1 << 18;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[inline]
pub fn column(a: &DMatrix<f64>, j: usize) -> &[f64] {
    let m = a.nrows();
    &a.as_slice()[j * m..(j + 1) * m]
}

/// `out[i] = a[:, cols[i]] · v`.
pub fn correlate_columns(a: &DMatrix<f64>, cols: &[usize], v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.nrows(), v.len());
    if a.nrows() * cols.len() >= PAR_THRESHOLD {
        cols.par_iter().map(|&j| dot(column(a, j), v)).collect()
    } else {
        cols.iter().map(|&j| dot(column(a, j), v)).collect()
    }
}

/// `Aᵀ v` over every column.
pub fn correlate(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.nrows(), v.len());
    let m = a.nrows();
    if m * a.ncols() >= PAR_THRESHOLD {
        a.as_slice().par_chunks(m.max(1)).map(|c| dot(c, v)).collect()
    } else {
        a.as_slice().chunks(m.max(1)).map(|c| dot(c, v)).collect()
    }
}

/// `b − Σ weights[i] · a[:, cols[i]]`.
pub fn residual(a: &DMatrix<f64>, b: &[f64], cols: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    for (&j, &w) in cols.iter().zip(weights) {
        if w != 0.0 {
            axpy(-w, column(a, j), &mut r);
        }
    }
    r
}

/// Copies the listed columns into a new `rows × cols.len()` matrix.
pub fn select_columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let m = a.nrows();
    let mut data = Vec::with_capacity(m * cols.len());
    for &j in cols {
        data.extend_from_slice(column(a, j));
    }
    DMatrix::from_vec(m, cols.len(), data)
}

/// Indices of the `count` largest values, ordered by value descending then
/// index ascending. `excluded` entries are skipped.
pub fn top_indices(values: &[f64], count: usize, excluded: Option<&[bool]>) -> Vec<usize> {
    let mut idx: Vec<usize> = match excluded {
        Some(ex) => (0..values.len()).filter(|&i| !ex[i]).collect(),
        None => (0..values.len()).collect(),
    };
    let count = count.min(idx.len());
    if count == 0 {
        return Vec::new();
    }
    let cmp = |&a: &usize, &b: &usize| values[b].total_cmp(&values[a]).then(a.cmp(&b));
    if count < idx.len() {
        idx.select_nth_unstable_by(count - 1, cmp);
        idx.truncate(count);
    }
    idx.sort_unstable_by(cmp);
    idx
}
