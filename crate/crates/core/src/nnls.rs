//! Non-negative least squares: `min ‖A w − b‖₂ subject to w ≥ 0`.
//!
//! Lawson–Hanson active-set method. The passive-set least-squares problem is
//! solved through a QR factorization that is updated in place: entering
//! columns are orthogonalized against the current factor (two Gram–Schmidt
//! passes) and leaving columns are deleted with Givens rotations.
//!
//! A column enters only if its reduced gradient `(Aᵀ(b − A w))_j` exceeds
//! `tol · ‖Aᵀb‖∞` and it is numerically independent of the passive set. An
//! exact duplicate of a passive column therefore never enters, so at most one
//! copy of a repeated column receives positive weight.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::NnlsError;
use crate::linalg::{axpy, column, dot, norm2};

pub const DEFAULT_TOL: f64 = 1e-10;

/// A column whose component orthogonal to the passive set is smaller than
/// this fraction of its norm is treated as dependent.
const DEPENDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnlsResult {
    pub weights: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest KKT violation relative to `‖Aᵀb‖∞` (0 when that is 0).
    pub kkt_violation: f64,
}

/// Solves NNLS on all columns of `a_sub`.
pub fn solve_nnls(a_sub: &DMatrix<f64>, b: &[f64], tol: f64, max_iter: usize) -> Result<NnlsResult, NnlsError> {
    let cols: Vec<usize> = (0..a_sub.ncols()).collect();
    solve_nnls_subset(a_sub, &cols, b, tol, max_iter)
}

/// [`solve_nnls`] with the defaults: `tol = 1e-10`, `max_iter = 3k`.
pub fn solve_nnls_default(a_sub: &DMatrix<f64>, b: &[f64]) -> Result<NnlsResult, NnlsError> {
    solve_nnls(a_sub, b, DEFAULT_TOL, 3 * a_sub.ncols().max(1))
}

/// Solves NNLS restricted to the columns `cols` of `a` without copying them.
/// `weights[i]` belongs to column `cols[i]`.
pub fn solve_nnls_subset(
    a: &DMatrix<f64>,
    cols: &[usize],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NnlsResult, NnlsError> {
    let m = a.nrows();
    let k = cols.len();
    if m == 0 || k == 0 {
        return Err(NnlsError::Empty { rows: m, cols: k });
    }
    if b.len() != m {
        return Err(NnlsError::ShapeMismatch { rows: m, b_len: b.len() });
    }
    if max_iter == 0 {
        return Err(NnlsError::ZeroMaxIter);
    }
    if !b.iter().all(|v| v.is_finite()) {
        return Err(NnlsError::NonFinite("target vector"));
    }
    if !cols.iter().all(|&j| column(a, j).iter().all(|v| v.is_finite())) {
        return Err(NnlsError::NonFinite("matrix"));
    }
    Ok(Solver::new(a, cols, b, tol, max_iter).run())
}

/// Incrementally maintained thin QR of the passive columns.
struct IncrementalQr {
    m: usize,
    /// Orthonormal columns, column-major `m × p`.
    q: Vec<f64>,
    /// `r[c]` holds column `c` of the upper-triangular factor (rows `0..=c`).
    r: Vec<Vec<f64>>,
    /// `Qᵀ b`.
    qtb: Vec<f64>,
}

impl IncrementalQr {
    fn new(m: usize) -> Self {
        Self { m, q: Vec::new(), r: Vec::new(), qtb: Vec::new() }
    }

    fn len(&self) -> usize {
        self.r.len()
    }

    fn q_col(&self, i: usize) -> &[f64] {
        &self.q[i * self.m..(i + 1) * self.m]
    }

    /// Appends a column; returns `false` (leaving the factor untouched) when it
    /// is numerically dependent on the current columns.
    fn push(&mut self, a_col: &[f64], b: &[f64]) -> bool {
        let p = self.len();
        if p >= self.m {
            return false;
        }
        let a_norm = norm2(a_col);
        if a_norm == 0.0 {
            return false;
        }
        let mut v = a_col.to_vec();
        let mut coeffs = vec![0.0; p + 1];
        for _ in 0..2 {
            for (i, coeff) in coeffs.iter_mut().enumerate().take(p) {
                let c = dot(self.q_col(i), &v);
                *coeff += c;
                let (qi, vv) = (&self.q[i * self.m..(i + 1) * self.m], &mut v);
                axpy(-c, qi, vv);
            }
        }
        let diag = norm2(&v);
        if diag <= DEPENDENCE_TOL * a_norm {
            return false;
        }
        for x in v.iter_mut() {
            *x /= diag;
        }
        coeffs[p] = diag;
        self.qtb.push(dot(&v, b));
        self.q.extend_from_slice(&v);
        self.r.push(coeffs);
        true
    }

    fn pop(&mut self) {
        self.r.pop();
        self.qtb.pop();
        self.q.truncate(self.len() * self.m);
    }

    /// Deletes column `pos`, restoring triangularity with Givens rotations.
    fn remove(&mut self, pos: usize) {
        let p = self.len();
        self.r.remove(pos);
        // columns pos..p-1 now carry one sub-diagonal entry at row c + 1
        for c in pos..p - 1 {
            let (x, y) = (self.r[c][c], self.r[c][c + 1]);
            let h = x.hypot(y);
            let (cs, sn) = if h == 0.0 { (1.0, 0.0) } else { (x / h, y / h) };
            for col in self.r[c..].iter_mut() {
                let (u, w) = (col[c], col[c + 1]);
                col[c] = cs * u + sn * w;
                col[c + 1] = -sn * u + cs * w;
            }
            self.r[c][c] = h;
            self.r[c].truncate(c + 1);
            let (u, w) = (self.qtb[c], self.qtb[c + 1]);
            self.qtb[c] = cs * u + sn * w;
            self.qtb[c + 1] = -sn * u + cs * w;
            let m = self.m;
            let (lo, hi) = self.q.split_at_mut((c + 1) * m);
            let qc = &mut lo[c * m..];
            let qn = &mut hi[..m];
            for (a, b) in qc.iter_mut().zip(qn.iter_mut()) {
                let (u, w) = (*a, *b);
                *a = cs * u + sn * w;
                *b = -sn * u + cs * w;
            }
        }
        self.qtb.pop();
        self.q.truncate((p - 1) * self.m);
    }

    /// Back-substitution for `R z = Qᵀ b`.
    fn solve(&self) -> Vec<f64> {
        let p = self.len();
        let mut z = self.qtb.clone();
        for i in (0..p).rev() {
            let zi = z[i] / self.r[i][i];
            z[i] = zi;
            for (row, zr) in z.iter_mut().enumerate().take(i) {
                *zr -= self.r[i][row] * zi;
            }
        }
        z
    }
}

struct Solver<'a> {
    a: &'a DMatrix<f64>,
    cols: &'a [usize],
    b: &'a [f64],
    tol: f64,
    max_iter: usize,
}

impl<'a> Solver<'a> {
    fn new(a: &'a DMatrix<f64>, cols: &'a [usize], b: &'a [f64], tol: f64, max_iter: usize) -> Self {
        Self { a, cols, b, tol, max_iter }
    }

    fn col(&self, local: usize) -> &'a [f64] {
        column(self.a, self.cols[local])
    }

    fn dual(&self, r: &[f64]) -> Vec<f64> {
        if self.a.nrows() * self.cols.len() >= 1 << 18 {
            (0..self.cols.len()).into_par_iter().map(|j| dot(self.col(j), r)).collect()
        } else {
            (0..self.cols.len()).map(|j| dot(self.col(j), r)).collect()
        }
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.b.to_vec();
        for (j, &w) in x.iter().enumerate() {
            if w > 0.0 {
                axpy(-w, self.col(j), &mut r);
            }
        }
        r
    }

    fn run(&self) -> NnlsResult {
        let k = self.cols.len();
        let m = self.a.nrows();
        let mut x = vec![0.0; k];
        let mut dual = self.dual(self.b);
        let scale = dual.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if scale == 0.0 {
            // b = 0, or b orthogonal to every column: w = 0 is optimal
            return self.finish(x, 0, true, scale);
        }
        let thresh = self.tol * scale;

        let mut qr = IncrementalQr::new(m);
        let mut passive: Vec<usize> = Vec::new();
        let mut in_passive = vec![false; k];
        let mut blocked = vec![false; k];
        let mut iterations = 0;
        let mut best_res = norm2(self.b);
        let mut stall = 0;
        let mut converged = false;

        loop {
            let mut enter: Option<usize> = None;
            for j in 0..k {
                if in_passive[j] || blocked[j] || dual[j] <= thresh {
                    continue;
                }
                if enter.is_none_or(|e| dual[j] > dual[e]) {
                    enter = Some(j);
                }
            }
            let Some(j) = enter else {
                converged = true;
                break;
            };
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            if !qr.push(self.col(j), self.b) {
                blocked[j] = true;
                continue;
            }
            let mut z = qr.solve();
            if z[z.len() - 1] <= 0.0 {
                qr.pop();
                blocked[j] = true;
                continue;
            }
            passive.push(j);
            in_passive[j] = true;
            blocked.iter_mut().for_each(|v| *v = false);

            // inner loop: step back toward feasibility until z > 0 on P
            loop {
                if z.iter().all(|&v| v > 0.0) {
                    for (pos, &c) in passive.iter().enumerate() {
                        x[c] = z[pos];
                    }
                    break;
                }
                let mut alpha = f64::INFINITY;
                let mut hit = 0;
                for (pos, &c) in passive.iter().enumerate() {
                    if z[pos] <= 0.0 {
                        let t = x[c] / (x[c] - z[pos]);
                        if t < alpha {
                            alpha = t;
                            hit = pos;
                        }
                    }
                }
                for (pos, &c) in passive.iter().enumerate() {
                    x[c] += alpha * (z[pos] - x[c]);
                }
                x[passive[hit]] = 0.0;
                for pos in (0..passive.len()).rev() {
                    let c = passive[pos];
                    if x[c] <= 0.0 {
                        x[c] = 0.0;
                        in_passive[c] = false;
                        passive.remove(pos);
                        qr.remove(pos);
                    }
                }
                if passive.is_empty() {
                    break;
                }
                z = qr.solve();
            }

            let r = self.residual(&x);
            dual = self.dual(&r);
            let res = norm2(&r);
            if res < best_res {
                best_res = res;
                stall = 0;
            } else {
                stall += 1;
                if stall >= k {
                    break;
                }
            }
        }
        self.finish(x, iterations, converged, scale)
    }

    fn finish(&self, mut x: Vec<f64>, iterations: usize, converged: bool, scale: f64) -> NnlsResult {
        for v in x.iter_mut() {
            if *v <= 0.0 || v.is_nan() {
                *v = 0.0;
            }
        }
        let r = self.residual(&x);
        let dual = self.dual(&r);
        let mut worst = 0.0f64;
        for (w, d) in x.iter().zip(&dual) {
            // gradient of ½‖Aw − b‖² is −dual
            let v = if *w > 0.0 { d.abs() } else { d.max(0.0) };
            worst = worst.max(v);
        }
        NnlsResult {
            residual_norm: norm2(&r),
            weights: x,
            iterations,
            converged,
            kkt_violation: if scale > 0.0 { worst / scale } else { 0.0 },
        }
    }
}

/// Relative KKT violation of `w` for the problem `(a_sub, b)`, computed from
/// scratch. Converged solutions satisfy `kkt_violation(..) ≤ tol`.
pub fn kkt_violation(a_sub: &DMatrix<f64>, b: &[f64], w: &[f64]) -> f64 {
    let cols: Vec<usize> = (0..a_sub.ncols()).collect();
    let s = Solver::new(a_sub, &cols, b, DEFAULT_TOL, 1);
    let scale = s.dual(b).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    s.finish(w.to_vec(), 0, true, scale).kkt_violation
}
