//! Reference computations used by the integration tests. None of these call
//! into the library's solvers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn sub_matrix(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// ‖b − A_S w‖₂.
pub fn residual_norm(a: &DMatrix<f64>, b: &[f64], cols: &[usize], w: &[f64]) -> f64 {
    let mut r = DVector::from_column_slice(b);
    for (&c, &wj) in cols.iter().zip(w) {
        r -= a.column(c) * wj;
    }
    r.norm()
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(b, 1e-13).expect("svd with both factors")
}

/// Exact NNLS for a handful of columns: the optimum is the unconstrained
/// least-squares fit on some subset of columns, so try them all.
pub fn nnls_enumerate(a: &DMatrix<f64>, b: &[f64]) -> (Vec<f64>, f64) {
    let k = a.ncols();
    assert!(k <= 12, "enumeration is exponential in the column count");
    let bv = DVector::from_column_slice(b);
    let mut best = (vec![0.0; k], bv.norm());
    for mask in 1u32..(1 << k) {
        let cols: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
        let z = least_squares(&sub_matrix(a, &cols), &bv);
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut w = vec![0.0; k];
        for (&c, &v) in cols.iter().zip(z.iter()) {
            w[c] = v;
        }
        let all: Vec<usize> = (0..k).collect();
        let r = residual_norm(a, b, &all, &w);
        if r < best.1 {
            best = (w, r);
        }
    }
    best
}

/// Textbook Lawson–Hanson with a fresh SVD solve at every step.
pub fn nnls_reference(a: &DMatrix<f64>, b: &[f64]) -> (Vec<f64>, f64) {
    let (m, k) = a.shape();
    let bv = DVector::from_column_slice(b);
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let scale = (a.transpose() * &bv).amax().max(f64::MIN_POSITIVE);
    for _ in 0..(3 * k + 10) {
        let grad = a.transpose() * (&bv - a * &x);
        let enter = (0..k).filter(|&j| !passive[j] && grad[j] > 1e-11 * scale).max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = enter else { break };
        passive[j] = true;
        loop {
            let cols: Vec<usize> = (0..k).filter(|&c| passive[c]).collect();
            if cols.len() > m {
                passive[j] = false;
                break;
            }
            let z = least_squares(&sub_matrix(a, &cols), &bv);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (&c, &v) in cols.iter().zip(z.iter()) {
                    x[c] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&c, &v) in cols.iter().zip(z.iter()) {
                if v <= 0.0 {
                    alpha = alpha.min(x[c] / (x[c] - v));
                }
            }
            for (&c, &v) in cols.iter().zip(z.iter()) {
                x[c] += alpha * (v - x[c]);
                if x[c] <= 1e-15 {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    let r = (&bv - a * &x).norm();
    (x.iter().copied().collect(), r)
}

/// Accelerated projected gradient on ½‖Aw − b‖² over w ≥ 0.
pub fn nnls_projected_gradient(a: &DMatrix<f64>, b: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let bv = DVector::from_column_slice(b);
    let ata = a.transpose() * a;
    let atb = a.transpose() * &bv;
    let lipschitz = ata.clone().symmetric_eigen().eigenvalues.amax().max(1e-300);
    let k = a.ncols();
    let (mut x, mut y) = (DVector::zeros(k), DVector::zeros(k));
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = &ata * &y - &atb;
        let next = (&y - g / lipschitz).map(|v| v.max(0.0));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
    }
    let r = (&bv - a * &x).norm();
    (x.iter().copied().collect(), r)
}

/// Largest violation of the NNLS optimality conditions, relative to ‖Aᵀb‖∞.
pub fn kkt_residual(a: &DMatrix<f64>, b: &[f64], w: &[f64]) -> f64 {
    let bv = DVector::from_column_slice(b);
    let wv = DVector::from_column_slice(w);
    let dual = a.transpose() * (&bv - a * &wv);
    let scale = (a.transpose() * &bv).amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in 0..w.len() {
        if w[j] < 0.0 {
            worst = worst.max(-w[j]);
        }
        let v = if w[j] > 0.0 { dual[j].abs() } else { dual[j].max(0.0) };
        worst = worst.max(v / scale);
    }
    worst
}

/// Indices of the `count` largest entries, ties to the lower index, ascending.
pub fn top_indices(values: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut out = order[..count].to_vec();
    out.sort_unstable();
    out
}

pub fn correlations(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (a.transpose() * DVector::from_column_slice(v)).iter().copied().collect()
}

/// Every `k`-subset of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Smallest NNLS residual over all `k`-column supports.
pub fn best_subset_residual(a: &DMatrix<f64>, b: &[f64], k: usize) -> f64 {
    subsets(a.ncols(), k)
        .iter()
        .map(|s| nnls_enumerate(&sub_matrix(a, s), b).1)
        .fold(f64::INFINITY, f64::min)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = gtp::rng::SeededRng::new(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}
