//! Gradient-trajectory data model and its binary file format.
//!
//! A trajectory holds, for each of `T` checkpoints, an `N × d` block of
//! per-sample flattened gradients stored as 32-bit floats.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "GTPTRAJ\0"
//! version    u8        1
//! n_samples  u64
//! n_steps    u64
//! grad_dim   u64
//! role       u8        0 = train, 1 = target
//! ids        n_samples × (u32 byte length, UTF-8 bytes)
//! tags       n_steps   × (u32 byte length, UTF-8 bytes)
//! blocks     n_steps   × (n_samples × grad_dim f32, row-major)
//! ```
//!
//! A JSON sidecar (`<path>.json`) mirrors the manifest for inspection.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binio::{atomic_write, Decoder, Encoder};
use crate::error::TrajectoryError;

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"GTPTRAJ\0";
pub const TRAJECTORY_VERSION: u8 = 1;
/// Bytes before the id table: magic, version, three u64 counts, role.
pub const TRAJECTORY_HEADER_LEN: usize = 8 + 1 + 8 * 3 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Target,
}

impl Role {
    fn code(self) -> u8 {
        match self {
            Role::Train => 0,
            Role::Target => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Role::Train),
            1 => Some(Role::Target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub n_samples: usize,
    pub n_timesteps: usize,
    pub grad_dim: usize,
    pub role: Role,
    pub sample_ids: Vec<String>,
    pub checkpoint_tags: Vec<String>,
    /// Always `"f32"`.
    pub dtype: String,
}

impl TrajectoryManifest {
    pub fn new(
        role: Role,
        grad_dim: usize,
        sample_ids: Vec<String>,
        checkpoint_tags: Vec<String>,
    ) -> Self {
        Self {
            n_samples: sample_ids.len(),
            n_timesteps: checkpoint_tags.len(),
            grad_dim,
            role,
            sample_ids,
            checkpoint_tags,
            dtype: "f32".to_string(),
        }
    }
}

/// One checkpoint's gradients, row-major `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBlock {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl GradientBlock {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "block data length does not match {rows}x{cols}");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn row(&self, j: usize) -> &[f32] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f32] {
        &mut self.data[j * self.cols..(j + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGradients {
    pub manifest: TrajectoryManifest,
    pub blocks: Vec<GradientBlock>,
}

/// A single broken invariant, reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoSamples,
    NoTimesteps,
    NoGradDim,
    SampleIdCount { declared: usize, actual: usize },
    DuplicateSampleId(String),
    CheckpointTagCount { declared: usize, actual: usize },
    BlockCount { declared: usize, actual: usize },
    BlockShape { timestep: usize, rows: usize, cols: usize, data_len: usize },
    NonFinite { timestep: usize, row: usize, col: usize },
    BadDtype(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSamples => write!(f, "n_samples must be at least 1"),
            Violation::NoTimesteps => write!(f, "n_timesteps must be at least 1"),
            Violation::NoGradDim => write!(f, "grad_dim must be at least 1"),
            Violation::SampleIdCount { declared, actual } => {
                write!(f, "{actual} sample ids for {declared} declared samples")
            }
            Violation::DuplicateSampleId(id) => write!(f, "duplicate sample id {id:?}"),
            Violation::CheckpointTagCount { declared, actual } => {
                write!(f, "{actual} checkpoint tags for {declared} declared timesteps")
            }
            Violation::BlockCount { declared, actual } => {
                write!(f, "{actual} gradient blocks for {declared} declared timesteps")
            }
            Violation::BlockShape { timestep, rows, cols, data_len } => write!(
                f,
                "timestep {timestep}: block is {rows}x{cols} with {data_len} values, \
                 expected the manifest shape"
            ),
            Violation::NonFinite { timestep, row, col } => {
                write!(f, "timestep {timestep}: non-finite gradient at sample {row}, coordinate {col}")
            }
            Violation::BadDtype(d) => write!(f, "dtype must be \"f32\", found {d:?}"),
        }
    }
}

/// Checks every data-model invariant; an empty list means the value is valid.
pub fn validate(grads: &TrajectoryGradients) -> Vec<Violation> {
    let m = &grads.manifest;
    let mut out = Vec::new();
    if m.n_samples == 0 {
        out.push(Violation::NoSamples);
    }
    if m.n_timesteps == 0 {
        out.push(Violation::NoTimesteps);
    }
    if m.grad_dim == 0 {
        out.push(Violation::NoGradDim);
    }
    if m.dtype != "f32" {
        out.push(Violation::BadDtype(m.dtype.clone()));
    }
    if m.sample_ids.len() != m.n_samples {
        out.push(Violation::SampleIdCount { declared: m.n_samples, actual: m.sample_ids.len() });
    }
    let mut seen = HashSet::with_capacity(m.sample_ids.len());
    for id in &m.sample_ids {
        if !seen.insert(id.as_str()) {
            out.push(Violation::DuplicateSampleId(id.clone()));
        }
    }
    if m.checkpoint_tags.len() != m.n_timesteps {
        out.push(Violation::CheckpointTagCount {
            declared: m.n_timesteps,
            actual: m.checkpoint_tags.len(),
        });
    }
    if grads.blocks.len() != m.n_timesteps {
        out.push(Violation::BlockCount { declared: m.n_timesteps, actual: grads.blocks.len() });
    }
    for (t, block) in grads.blocks.iter().enumerate() {
        if block.rows != m.n_samples
            || block.cols != m.grad_dim
            || block.data.len() != block.rows * block.cols
        {
            out.push(Violation::BlockShape {
                timestep: t,
                rows: block.rows,
                cols: block.cols,
                data_len: block.data.len(),
            });
            continue;
        }
        if let Some(pos) = block.data.iter().position(|v| !v.is_finite()) {
            out.push(Violation::NonFinite { timestep: t, row: pos / block.cols, col: pos % block.cols });
        }
    }
    out
}

impl TrajectoryGradients {
    /// Builds and validates a trajectory.
    pub fn new(manifest: TrajectoryManifest, blocks: Vec<GradientBlock>) -> Result<Self, TrajectoryError> {
        let grads = Self { manifest, blocks };
        let violations = validate(&grads);
        if violations.is_empty() {
            Ok(grads)
        } else {
            Err(TrajectoryError::Invalid(violations))
        }
    }

    pub fn n_samples(&self) -> usize {
        self.manifest.n_samples
    }

    pub fn n_timesteps(&self) -> usize {
        self.manifest.n_timesteps
    }

    pub fn grad_dim(&self) -> usize {
        self.manifest.grad_dim
    }

    /// Appends the samples of `other` after those of `self` (same `T`, `d`).
    pub fn concat_samples(&self, other: &Self) -> Result<Self, TrajectoryError> {
        if self.n_timesteps() != other.n_timesteps() || self.grad_dim() != other.grad_dim() {
            return Err(TrajectoryError::ShapeInconsistency(format!(
                "cannot concatenate T={} d={} with T={} d={}",
                self.n_timesteps(),
                self.grad_dim(),
                other.n_timesteps(),
                other.grad_dim()
            )));
        }
        let mut ids = self.manifest.sample_ids.clone();
        ids.extend(other.manifest.sample_ids.iter().cloned());
        let manifest = TrajectoryManifest::new(
            self.manifest.role,
            self.grad_dim(),
            ids,
            self.manifest.checkpoint_tags.clone(),
        );
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let mut data = a.data.clone();
                data.extend_from_slice(&b.data);
                GradientBlock::new(a.rows + b.rows, a.cols, data)
            })
            .collect();
        Self::new(manifest, blocks)
    }
}

fn id_table_len(strings: &[String]) -> usize {
    strings.iter().map(|s| 4 + s.len()).sum()
}

/// Exact on-disk size of a trajectory with this manifest.
pub fn trajectory_file_size(manifest: &TrajectoryManifest) -> usize {
    TRAJECTORY_HEADER_LEN
        + id_table_len(&manifest.sample_ids)
        + id_table_len(&manifest.checkpoint_tags)
        + manifest.n_timesteps * manifest.n_samples * manifest.grad_dim * 4
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

pub fn encode_trajectory(grads: &TrajectoryGradients) -> Result<Vec<u8>, TrajectoryError> {
    let violations = validate(grads);
    if !violations.is_empty() {
        return Err(TrajectoryError::Invalid(violations));
    }
    let m = &grads.manifest;
    let mut e = Encoder::with_capacity(trajectory_file_size(m));
    e.bytes(TRAJECTORY_MAGIC);
    e.u8(TRAJECTORY_VERSION);
    e.u64(m.n_samples as u64);
    e.u64(m.n_timesteps as u64);
    e.u64(m.grad_dim as u64);
    e.u8(m.role.code());
    for id in &m.sample_ids {
        e.str(id);
    }
    for tag in &m.checkpoint_tags {
        e.str(tag);
    }
    for block in &grads.blocks {
        e.f32s(&block.data);
    }
    Ok(e.buf)
}

pub fn decode_trajectory(bytes: &[u8]) -> Result<TrajectoryGradients, TrajectoryError> {
    let mut d = Decoder::new(bytes);
    match d.take(8) {
        Some(m) if m == TRAJECTORY_MAGIC => {}
        _ => return Err(TrajectoryError::BadMagic),
    }
    let truncated_header = || TrajectoryError::Truncated { timestep: None, section: "header".into() };
    let version = d.u8().ok_or_else(truncated_header)?;
    if version != TRAJECTORY_VERSION {
        return Err(TrajectoryError::VersionMismatch { found: version, supported: TRAJECTORY_VERSION });
    }
    let n = d.u64().ok_or_else(truncated_header)? as usize;
    let t = d.u64().ok_or_else(truncated_header)? as usize;
    let dim = d.u64().ok_or_else(truncated_header)? as usize;
    let role_code = d.u8().ok_or_else(truncated_header)?;
    let role = Role::from_code(role_code).ok_or(TrajectoryError::ShapeInconsistency(format!(
        "unknown role code {role_code}"
    )))?;

    let read_strings = |d: &mut Decoder, count: usize, section: &str| {
        // each entry needs at least its length prefix
        if count > d.remaining() / 4 {
            return Err(TrajectoryError::Truncated { timestep: None, section: section.into() });
        }
        (0..count)
            .map(|_| match d.str() {
                None => Err(TrajectoryError::Truncated { timestep: None, section: section.into() }),
                Some(Err(_)) => Err(TrajectoryError::BadUtf8 { section: section.into() }),
                Some(Ok(s)) => Ok(s),
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let sample_ids = read_strings(&mut d, n, "sample id table")?;
    let checkpoint_tags = read_strings(&mut d, t, "checkpoint tag table")?;

    let block_len = n
        .checked_mul(dim)
        .ok_or_else(|| TrajectoryError::ShapeInconsistency(format!("{n}x{dim} block overflows")))?;
    let mut blocks = Vec::with_capacity(t);
    for step in 0..t {
        let data = d
            .f32s(block_len)
            .ok_or(TrajectoryError::Truncated { timestep: Some(step), section: "gradient block".into() })?;
        blocks.push(GradientBlock { rows: n, cols: dim, data });
    }
    if d.remaining() != 0 {
        return Err(TrajectoryError::ShapeInconsistency(format!(
            "{} trailing bytes after the last block",
            d.remaining()
        )));
    }
    let manifest = TrajectoryManifest {
        n_samples: n,
        n_timesteps: t,
        grad_dim: dim,
        role,
        sample_ids,
        checkpoint_tags,
        dtype: "f32".into(),
    };
    TrajectoryGradients::new(manifest, blocks)
}

/// Validates, then writes the binary file and its JSON sidecar. Nothing is
/// created when validation fails.
pub fn write_trajectory(grads: &TrajectoryGradients, path: impl AsRef<Path>) -> Result<(), TrajectoryError> {
    let path = path.as_ref();
    let bytes = encode_trajectory(grads)?;
    atomic_write(path, &bytes)?;
    let json = serde_json::to_vec_pretty(&grads.manifest).expect("manifest serializes");
    atomic_write(&sidecar_path(path), &json)?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryGradients, TrajectoryError> {
    let bytes = fs::read(path.as_ref())?;
    decode_trajectory(&bytes)
}
