//! Per-checkpoint projection subspaces.
//!
//! Each checkpoint `t` gets its own `d × d_s` basis with orthonormal columns,
//! fitted on that checkpoint's target gradients. The default is uncentered
//! PCA (truncated SVD of the raw gradient matrix): the matching target is the
//! mean gradient, and centering would remove exactly that direction.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::{atomic_write, Decoder, Encoder};
use crate::error::{FormatError, SubspaceError, TrajectoryError};
use crate::rng::SeededRng;
use crate::trajectory::{validate, GradientBlock, TrajectoryGradients};

/// Largest gradient dimension handled by the dense SVD; above it PCA uses a
/// seeded randomized range finder.
pub const DENSE_SVD_MAX_DIM: usize = 4096;
const RANDOMIZED_OVERSAMPLE: usize = 10;
const RANDOMIZED_POWER_ITERS: usize = 2;
/// Keeps projection draws apart from data generated with the same seed.
const PROJECTION_STREAM: u64 = 0x5342;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceMethod {
    #[value(name = "pca_uncentered", alias = "pca")]
    PcaUncentered,
    #[value(name = "pca_centered")]
    PcaCentered,
    #[value(name = "random_projection", alias = "random")]
    RandomProjection,
    #[value(name = "identity")]
    Identity,
}

impl SubspaceMethod {
    fn code(self) -> u8 {
        match self {
            SubspaceMethod::PcaUncentered => 0,
            SubspaceMethod::PcaCentered => 1,
            SubspaceMethod::RandomProjection => 2,
            SubspaceMethod::Identity => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => SubspaceMethod::PcaUncentered,
            1 => SubspaceMethod::PcaCentered,
            2 => SubspaceMethod::RandomProjection,
            3 => SubspaceMethod::Identity,
            _ => return None,
        })
    }

    pub fn is_pca(self) -> bool {
        matches!(self, SubspaceMethod::PcaUncentered | SubspaceMethod::PcaCentered)
    }
}

/// Which SVD route PCA takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaSolver {
    /// Dense up to [`DENSE_SVD_MAX_DIM`], randomized above.
    #[default]
    Auto,
    Dense,
    Randomized,
}

/// One fitted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedBasis {
    /// `d × d_s`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Top `d_s` singular values, non-increasing (empty for non-PCA methods).
    pub spectrum: Vec<f64>,
    /// The input had rank below `d_s`; trailing columns are a deterministic
    /// orthonormal completion.
    pub rank_deficient: bool,
}

impl FittedBasis {
    /// Sum of the squared retained singular values.
    pub fn captured_variance(&self) -> f64 {
        self.spectrum.iter().map(|s| s * s).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub method: SubspaceMethod,
    pub seed: u64,
    pub grad_dim: usize,
    pub subspace_dim: usize,
    pub bases: Vec<DMatrix<f64>>,
    pub spectrum: Vec<Vec<f64>>,
    pub rank_deficient: Vec<bool>,
}

impl SubspaceBasis {
    pub fn n_timesteps(&self) -> usize {
        self.bases.len()
    }

    /// Largest `|UᵀU − I|` entry over all timesteps.
    pub fn orthonormality_error(&self) -> f64 {
        self.bases.iter().map(orthonormality_error).fold(0.0, f64::max)
    }
}

pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Converts a row-major `f32` block into an `f64` matrix.
pub fn block_to_matrix(block: &GradientBlock) -> DMatrix<f64> {
    DMatrix::from_row_iterator(block.rows, block.cols, block.data.iter().map(|&v| v as f64))
}

/// Subtracts the column means from every row.
pub fn center_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    let n = x.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

/// `‖X U‖_F²`: the energy of the rows of `x` retained by `basis`.
pub fn captured_variance(x: &DMatrix<f64>, basis: &DMatrix<f64>) -> f64 {
    (x * basis).norm_squared()
}

/// Row `j` of the result is `basisᵀ · grads[j]`.
pub fn project(grads: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<DMatrix<f64>, SubspaceError> {
    if grads.ncols() != basis.nrows() {
        return Err(SubspaceError::ShapeMismatch(format!(
            "gradients have dimension {} but the basis is {}x{}",
            grads.ncols(),
            basis.nrows(),
            basis.ncols()
        )));
    }
    Ok(grads * basis)
}

pub fn fit_subspace(
    grads: &DMatrix<f64>,
    subspace_dim: usize,
    method: SubspaceMethod,
    seed: u64,
) -> Result<FittedBasis, SubspaceError> {
    fit_subspace_with(grads, subspace_dim, method, seed, PcaSolver::Auto)
}

pub fn fit_subspace_with(
    grads: &DMatrix<f64>,
    subspace_dim: usize,
    method: SubspaceMethod,
    seed: u64,
    solver: PcaSolver,
) -> Result<FittedBasis, SubspaceError> {
    let (n, d) = grads.shape();
    let max = if method.is_pca() { n.min(d) } else { d };
    if subspace_dim == 0 || subspace_dim > max {
        return Err(SubspaceError::DimOutOfRange { d_s: subspace_dim, max });
    }
    match method {
        SubspaceMethod::Identity => Ok(FittedBasis {
            basis: DMatrix::identity(d, subspace_dim),
            spectrum: Vec::new(),
            rank_deficient: false,
        }),
        SubspaceMethod::RandomProjection => {
            let mut rng = SeededRng::derive(seed, PROJECTION_STREAM);
            let gauss = DMatrix::from_fn(d, subspace_dim, |_, _| rng.normal());
            Ok(FittedBasis { basis: gauss.qr().q(), spectrum: Vec::new(), rank_deficient: false })
        }
        SubspaceMethod::PcaUncentered | SubspaceMethod::PcaCentered => {
            let centered;
            let x = if method == SubspaceMethod::PcaCentered {
                centered = center_rows(grads);
                &centered
            } else {
                grads
            };
            let use_dense = match solver {
                PcaSolver::Auto => d <= DENSE_SVD_MAX_DIM,
                PcaSolver::Dense => true,
                PcaSolver::Randomized => false,
            };
            let (values, vectors) =
                if use_dense { dense_right_singular(x)? } else { randomized_right_singular(x, subspace_dim, seed)? };
            Ok(truncate_and_complete(values, vectors, subspace_dim, n.max(d)))
        }
    }
}

/// Singular values (descending) and matching right singular vectors as the
/// columns of a `d × r` matrix.
fn dense_right_singular(x: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), SubspaceError> {
    let svd = x.clone().try_svd(false, true, f64::EPSILON, 0).ok_or(SubspaceError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(SubspaceError::SvdFailed)?;
    Ok(sorted_pairs(svd.singular_values.as_slice(), &v_t.transpose()))
}

fn sorted_pairs(values: &[f64], vectors: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vecs = DMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    (sorted, vecs)
}

/// Seeded randomized range finder with power iterations, applied to `x`
/// (`N × d`) to approximate its top right singular vectors.
fn randomized_right_singular(
    x: &DMatrix<f64>,
    subspace_dim: usize,
    seed: u64,
) -> Result<(Vec<f64>, DMatrix<f64>), SubspaceError> {
    let (n, d) = x.shape();
    let width = (subspace_dim + RANDOMIZED_OVERSAMPLE).min(n.min(d));
    let mut rng = SeededRng::derive(seed, PROJECTION_STREAM);
    let omega = DMatrix::from_fn(d, width, |_, _| rng.normal());
    let mut y = (x * omega).qr().q();
    for _ in 0..RANDOMIZED_POWER_ITERS {
        let z = (x.transpose() * &y).qr().q();
        y = (x * z).qr().q();
    }
    let small = y.transpose() * x;
    dense_right_singular(&small)
}

fn truncate_and_complete(values: Vec<f64>, vectors: DMatrix<f64>, subspace_dim: usize, big_dim: usize) -> FittedBasis {
    let d = vectors.nrows();
    let sigma_max = values.first().copied().unwrap_or(0.0);
    let rank_tol = sigma_max * big_dim as f64 * f64::EPSILON;
    let rank = values.iter().take(subspace_dim).filter(|&&s| s > rank_tol && s > 0.0).count();
    let mut spectrum: Vec<f64> = values.into_iter().take(subspace_dim).collect();
    spectrum.resize(subspace_dim, 0.0);
    for s in spectrum.iter_mut() {
        *s = s.max(0.0);
    }

    let mut cols: Vec<Vec<f64>> = (0..rank).map(|c| vectors.column(c).iter().copied().collect()).collect();
    let rank_deficient = rank < subspace_dim;
    if rank_deficient {
        // deterministic completion from canonical basis vectors
        for e in 0..d {
            if cols.len() == subspace_dim {
                break;
            }
            let mut v = vec![0.0; d];
            v[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let proj: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= proj * ci);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                cols.push(v);
            }
        }
        log::warn!("rank {rank} below subspace dimension {subspace_dim}; basis completed");
    }
    let basis = DMatrix::from_fn(d, subspace_dim, |r, c| cols[c][r]);
    FittedBasis { basis, spectrum, rank_deficient }
}

/// Fits one basis per timestep of `target`, running timesteps on up to
/// `workers` threads. Timestep `t` uses seed `seed + t`; results do not
/// depend on the worker count.
pub fn fit_evolving_subspace(
    target: &TrajectoryGradients,
    subspace_dim: usize,
    method: SubspaceMethod,
    seed: u64,
    workers: usize,
) -> Result<SubspaceBasis, SubspaceError> {
    let violations = validate(target);
    if !violations.is_empty() {
        return Err(TrajectoryError::Invalid(violations).into());
    }
    let fit_one = |t: usize| {
        fit_subspace(&block_to_matrix(&target.blocks[t]), subspace_dim, method, seed.wrapping_add(t as u64))
            .map_err(|e| SubspaceError::AtTimestep { timestep: t, source: Box::new(e) })
    };
    let t_count = target.n_timesteps();
    let fits: Vec<FittedBasis> = if workers <= 1 {
        (0..t_count).map(fit_one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SubspaceError::ThreadPool(e.to_string()))?;
        pool.install(|| (0..t_count).into_par_iter().map(fit_one).collect::<Result<_, _>>())?
    };
    let mut out = SubspaceBasis {
        method,
        seed,
        grad_dim: target.grad_dim(),
        subspace_dim,
        bases: Vec::with_capacity(t_count),
        spectrum: Vec::with_capacity(t_count),
        rank_deficient: Vec::with_capacity(t_count),
    };
    for f in fits {
        out.bases.push(f.basis);
        out.spectrum.push(f.spectrum);
        out.rank_deficient.push(f.rank_deficient);
    }
    Ok(out)
}

pub const BASIS_MAGIC: &[u8; 8] = b"GTPBASIS";
pub const BASIS_VERSION: u8 = 1;

pub fn encode_basis(basis: &SubspaceBasis) -> Vec<u8> {
    let (d, ds) = (basis.grad_dim, basis.subspace_dim);
    let mut e = Encoder::with_capacity(64 + basis.n_timesteps() * (d * ds + ds + 2) * 8);
    e.bytes(BASIS_MAGIC);
    e.u8(BASIS_VERSION);
    e.u64(basis.n_timesteps() as u64);
    e.u64(d as u64);
    e.u64(ds as u64);
    e.u8(basis.method.code());
    e.u64(basis.seed);
    for t in 0..basis.n_timesteps() {
        e.u8(basis.rank_deficient[t] as u8);
        e.f64_vec(&basis.spectrum[t]);
        e.f64s(basis.bases[t].as_slice());
    }
    e.buf
}

pub fn decode_basis(bytes: &[u8]) -> Result<SubspaceBasis, FormatError> {
    let mut r = Decoder::new(bytes);
    if r.take(8) != Some(&BASIS_MAGIC[..]) {
        return Err(FormatError::BadMagic { kind: "subspace basis" });
    }
    let trunc = |s: &str| FormatError::Truncated { section: s.into() };
    let version = r.u8().ok_or_else(|| trunc("header"))?;
    if version != BASIS_VERSION {
        return Err(FormatError::VersionMismatch { found: version, supported: BASIS_VERSION });
    }
    let t_count = r.u64().ok_or_else(|| trunc("header"))? as usize;
    let d = r.u64().ok_or_else(|| trunc("header"))? as usize;
    let ds = r.u64().ok_or_else(|| trunc("header"))? as usize;
    let code = r.u8().ok_or_else(|| trunc("header"))?;
    let method = SubspaceMethod::from_code(code)
        .ok_or_else(|| FormatError::Inconsistent(format!("unknown subspace method code {code}")))?;
    let seed = r.u64().ok_or_else(|| trunc("header"))?;
    let per_step = d.checked_mul(ds).ok_or_else(|| FormatError::Inconsistent("basis shape overflows".into()))?;
    if t_count > r.remaining() {
        return Err(trunc("basis blocks"));
    }
    let mut out = SubspaceBasis {
        method,
        seed,
        grad_dim: d,
        subspace_dim: ds,
        bases: Vec::with_capacity(t_count),
        spectrum: Vec::with_capacity(t_count),
        rank_deficient: Vec::with_capacity(t_count),
    };
    for t in 0..t_count {
        let section = format!("basis of timestep {t}");
        out.rank_deficient.push(r.u8().ok_or_else(|| trunc(&section))? != 0);
        out.spectrum.push(r.f64_vec().ok_or_else(|| trunc(&section))?);
        let data = r.f64s(per_step).ok_or_else(|| trunc(&section))?;
        out.bases.push(DMatrix::from_vec(d, ds, data));
    }
    if r.remaining() != 0 {
        return Err(FormatError::Inconsistent(format!("{} trailing bytes", r.remaining())));
    }
    Ok(out)
}

pub fn write_basis(basis: &SubspaceBasis, path: impl AsRef<Path>) -> Result<(), FormatError> {
    Ok(atomic_write(path.as_ref(), &encode_basis(basis))?)
}

pub fn read_basis(path: impl AsRef<Path>) -> Result<SubspaceBasis, FormatError> {
    decode_basis(&fs::read(path.as_ref())?)
}
