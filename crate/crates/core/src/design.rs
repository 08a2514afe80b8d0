//! The design system `(A, b)`.
//!
//! `A` is `m × N` with `m = T · d_s`: column `j` stacks the projected gradients
//! of training sample `j` over all checkpoints. `b` stacks, per checkpoint,
//! the mean projected target gradient. Columns are samples so that `A w ≈ b`
//! is well-typed for a weight vector `w` over samples.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::binio::{atomic_write, Decoder, Encoder};
use crate::error::{FormatError, SubspaceError, TrajectoryError};
use crate::linalg::{column, norm2};
use crate::subspace::{block_to_matrix, project, SubspaceBasis};
use crate::trajectory::{validate, TrajectoryGradients};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    a: DMatrix<f64>,
    b: Vec<f64>,
    column_ids: Vec<String>,
    col_norms: Vec<f64>,
    n_timesteps: usize,
    subspace_dim: usize,
}

impl DesignSystem {
    /// Builds a design whose rows form `n_timesteps` blocks of
    /// `subspace_dim` rows each.
    pub fn new(
        a: DMatrix<f64>,
        b: Vec<f64>,
        column_ids: Vec<String>,
        n_timesteps: usize,
        subspace_dim: usize,
    ) -> Result<Self, SubspaceError> {
        let (m, n) = a.shape();
        if n_timesteps == 0 || subspace_dim == 0 || m != n_timesteps * subspace_dim {
            return Err(SubspaceError::ShapeMismatch(format!(
                "{m} rows is not {n_timesteps} timesteps x {subspace_dim} dims"
            )));
        }
        if n == 0 {
            return Err(SubspaceError::ShapeMismatch("design has no columns".into()));
        }
        if b.len() != m {
            return Err(SubspaceError::ShapeMismatch(format!("b has length {}, A has {m} rows", b.len())));
        }
        if column_ids.len() != n {
            return Err(SubspaceError::ShapeMismatch(format!("{} column ids for {n} columns", column_ids.len())));
        }
        if !a.iter().chain(&b).all(|v| v.is_finite()) {
            return Err(SubspaceError::ShapeMismatch("design contains non-finite values".into()));
        }
        let col_norms = (0..n).map(|j| norm2(column(&a, j))).collect();
        Ok(Self { a, b, column_ids, col_norms, n_timesteps, subspace_dim })
    }

    /// A single-block design with ids `"0"…"N-1"`.
    pub fn from_matrix(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self, SubspaceError> {
        let m = a.nrows();
        let ids = (0..a.ncols()).map(|j| j.to_string()).collect();
        Self::new(a, b, ids, 1, m)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_timesteps(&self) -> usize {
        self.n_timesteps
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    pub fn column(&self, j: usize) -> &[f64] {
        column(&self.a, j)
    }

    /// Scales every non-zero column to unit norm.
    pub fn normalized_columns(&self) -> Self {
        let mut a = self.a.clone();
        for (j, mut col) in a.column_iter_mut().enumerate() {
            let norm = self.col_norms[j];
            if norm > 0.0 {
                col /= norm;
            }
        }
        Self::new(a, self.b.clone(), self.column_ids.clone(), self.n_timesteps, self.subspace_dim)
            .expect("scaling preserves design invariants")
    }

    /// Rows `rows` of `A` and `b` as a new design with the given block layout.
    pub fn row_block(&self, rows: std::ops::Range<usize>, n_timesteps: usize) -> Result<Self, SubspaceError> {
        let a = self.a.rows(rows.start, rows.len()).into_owned();
        let b = self.b[rows.clone()].to_vec();
        Self::new(a, b, self.column_ids.clone(), n_timesteps, self.subspace_dim)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssembleOptions {
    /// Rescale `A`'s columns to unit norm after projection.
    pub normalize_columns: bool,
}

pub fn assemble_design(
    train: &TrajectoryGradients,
    target: &TrajectoryGradients,
    basis: &SubspaceBasis,
) -> Result<DesignSystem, SubspaceError> {
    assemble_design_with(train, target, basis, AssembleOptions::default())
}

/// For in-domain selection pass the same trajectory as `train` and `target`.
pub fn assemble_design_with(
    train: &TrajectoryGradients,
    target: &TrajectoryGradients,
    basis: &SubspaceBasis,
    options: AssembleOptions,
) -> Result<DesignSystem, SubspaceError> {
    for g in [train, target] {
        let v = validate(g);
        if !v.is_empty() {
            return Err(TrajectoryError::Invalid(v).into());
        }
    }
    if train.grad_dim() != target.grad_dim() || train.grad_dim() != basis.grad_dim {
        return Err(SubspaceError::ShapeMismatch(format!(
            "gradient dimensions differ: train {}, target {}, basis {}",
            train.grad_dim(),
            target.grad_dim(),
            basis.grad_dim
        )));
    }
    let t_count = basis.n_timesteps();
    if train.n_timesteps() != t_count || target.n_timesteps() != t_count {
        return Err(SubspaceError::ShapeMismatch(format!(
            "timestep counts differ: train {}, target {}, basis {t_count}",
            train.n_timesteps(),
            target.n_timesteps()
        )));
    }
    let ds = basis.subspace_dim;
    let n = train.n_samples();
    let n_tar = target.n_samples() as f64;

    let per_step: Vec<(DMatrix<f64>, Vec<f64>)> = (0..t_count)
        .into_par_iter()
        .map(|t| {
            let u = &basis.bases[t];
            let projected = project(&block_to_matrix(&train.blocks[t]), u)?;
            let tar = project(&block_to_matrix(&target.blocks[t]), u)?;
            let mean = tar.column_iter().map(|c| c.iter().sum::<f64>() / n_tar).collect();
            Ok((projected, mean))
        })
        .collect::<Result<_, SubspaceError>>()?;

    let m = t_count * ds;
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut b = Vec::with_capacity(m);
    for (t, (projected, mean)) in per_step.into_iter().enumerate() {
        // projected is N × d_s; its transpose fills rows t·d_s..(t+1)·d_s
        a.rows_mut(t * ds, ds).copy_from(&projected.transpose());
        b.extend(mean);
    }
    let design = DesignSystem::new(a, b, train.manifest.sample_ids.clone(), t_count, ds)?;
    Ok(if options.normalize_columns { design.normalized_columns() } else { design })
}

pub const DESIGN_MAGIC: &[u8; 8] = b"GTPDESGN";
pub const DESIGN_VERSION: u8 = 1;

/// Layout: magic, version, then u64 `m`, `N`, `T`, `d_s`, the column-id table
/// (u32 length + UTF-8 each), `A` as column-major f64, `b` as f64.
pub fn encode_design(design: &DesignSystem) -> Vec<u8> {
    let (m, n) = design.a.shape();
    let mut e = Encoder::with_capacity(41 + (m * n + m) * 8 + design.column_ids.iter().map(|s| 4 + s.len()).sum::<usize>());
    e.bytes(DESIGN_MAGIC);
    e.u8(DESIGN_VERSION);
    e.u64(m as u64);
    e.u64(n as u64);
    e.u64(design.n_timesteps as u64);
    e.u64(design.subspace_dim as u64);
    for id in &design.column_ids {
        e.str(id);
    }
    e.f64s(design.a.as_slice());
    e.f64s(&design.b);
    e.buf
}

pub fn decode_design(bytes: &[u8]) -> Result<DesignSystem, FormatError> {
    let mut r = Decoder::new(bytes);
    if r.take(8) != Some(&DESIGN_MAGIC[..]) {
        return Err(FormatError::BadMagic { kind: "design system" });
    }
    let trunc = |s: &str| FormatError::Truncated { section: s.into() };
    let version = r.u8().ok_or_else(|| trunc("header"))?;
    if version != DESIGN_VERSION {
        return Err(FormatError::VersionMismatch { found: version, supported: DESIGN_VERSION });
    }
    let m = r.u64().ok_or_else(|| trunc("header"))? as usize;
    let n = r.u64().ok_or_else(|| trunc("header"))? as usize;
    let t = r.u64().ok_or_else(|| trunc("header"))? as usize;
    let ds = r.u64().ok_or_else(|| trunc("header"))? as usize;
    if n > r.remaining() / 4 {
        return Err(trunc("column id table"));
    }
    let ids = (0..n)
        .map(|_| match r.str() {
            None => Err(trunc("column id table")),
            Some(Err(_)) => Err(FormatError::Inconsistent("column id is not UTF-8".into())),
            Some(Ok(s)) => Ok(s),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let len = m.checked_mul(n).ok_or_else(|| FormatError::Inconsistent("matrix shape overflows".into()))?;
    let a = r.f64s(len).ok_or_else(|| trunc("matrix"))?;
    let b = r.f64s(m).ok_or_else(|| trunc("target vector"))?;
    if r.remaining() != 0 {
        return Err(FormatError::Inconsistent(format!("{} trailing bytes", r.remaining())));
    }
    DesignSystem::new(DMatrix::from_vec(m, n, a), b, ids, t, ds).map_err(|e| FormatError::Inconsistent(e.to_string()))
}

pub fn write_design(design: &DesignSystem, path: impl AsRef<Path>) -> Result<(), FormatError> {
    Ok(atomic_write(path.as_ref(), &encode_design(design))?)
}

pub fn read_design(path: impl AsRef<Path>) -> Result<DesignSystem, FormatError> {
    decode_design(&fs::read(path.as_ref())?)
}
