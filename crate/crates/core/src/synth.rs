//! Synthetic fixtures and an exhaustive subset oracle.
//!
//! Every generator is a pure function of its arguments. Random columns are
//! always drawn first, column by column, so two generators sharing a seed and
//! shape share their Gaussian columns.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignSystem;
use crate::error::{PursuitError, SynthError};
use crate::linalg::{column, norm2, residual};
use crate::nnls::{solve_nnls_subset, DEFAULT_TOL};
use crate::pursuit::check_support;
use crate::rng::SeededRng;
use crate::trajectory::{GradientBlock, Role, TrajectoryGradients, TrajectoryManifest};

/// Upper bound on the number of supports [`brute_force_best_subset`] will score.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Relative norm of the Gaussian tail added to duplicated-instance targets.
pub const DUPLICATE_TAIL_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub design: DesignSystem,
    pub true_weights: Vec<f64>,
    pub noise_level: f64,
    /// Column indices of each exact-duplicate group, ascending.
    pub groups: Vec<Vec<usize>>,
}

impl PlantedInstance {
    pub fn support(&self) -> Vec<usize> {
        self.true_weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i).collect()
    }

    pub fn support_weights(&self) -> Vec<f64> {
        self.true_weights.iter().copied().filter(|&w| w > 0.0).collect()
    }
}

fn gaussian_unit_columns(rng: &mut SeededRng, m: usize, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut col: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let norm = norm2(&col);
        if norm > 0.0 {
            col.iter_mut().for_each(|x| *x /= norm);
        }
        a.column_mut(j).copy_from_slice(&col);
    }
    a
}

/// Adds `level · ‖clean‖` worth of Gaussian noise to `clean`.
fn add_scaled_noise(rng: &mut SeededRng, clean: &[f64], level: f64) -> Vec<f64> {
    let noise: Vec<f64> = (0..clean.len()).map(|_| rng.normal()).collect();
    let target = level * norm2(clean);
    let nn = norm2(&noise);
    let scale = if nn > 0.0 && target > 0.0 { target / nn } else { 0.0 };
    clean.iter().zip(&noise).map(|(c, e)| c + scale * e).collect()
}

fn a_times(a: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
    let weights: Vec<f64> = support.iter().map(|&j| -w[j]).collect();
    residual(a, &vec![0.0; a.nrows()], &support, &weights)
}

/// Unit-norm Gaussian design with a planted non-negative `sparsity`-sparse
/// solution whose entries are uniform in `[0.5, 1.5]`.
pub fn gen_sparse_instance(
    n: usize,
    m: usize,
    sparsity: usize,
    noise_level: f64,
    seed: u64,
) -> Result<PlantedInstance, SynthError> {
    if n == 0 || m == 0 || sparsity > n {
        return Err(SynthError::InvalidArgs(format!("need n ≥ 1, m ≥ 1, sparsity ≤ n (n={n}, m={m}, sparsity={sparsity})")));
    }
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(SynthError::InvalidArgs(format!("noise level {noise_level} must be finite and non-negative")));
    }
    let mut rng = SeededRng::new(seed);
    let a = gaussian_unit_columns(&mut rng, m, n);
    let support = rng.sample_without_replacement(n, sparsity);
    let mut w = vec![0.0; n];
    for &j in &support {
        w[j] = rng.uniform_range(0.5, 1.5);
    }
    let b = add_scaled_noise(&mut rng, &a_times(&a, &w), noise_level);
    Ok(PlantedInstance {
        design: DesignSystem::from_matrix(a, b).expect("generated design is well formed"),
        true_weights: w,
        noise_level,
        groups: Vec::new(),
    })
}

/// Gaussian design in which `n_groups` columns are each repeated
/// `copies_per_group` times. The target is the sum of one copy per group plus
/// a Gaussian tail of relative size [`DUPLICATE_TAIL_LEVEL`].
pub fn gen_duplicated_instance(
    n: usize,
    m: usize,
    n_groups: usize,
    copies_per_group: usize,
    seed: u64,
) -> Result<PlantedInstance, SynthError> {
    if n_groups == 0 {
        return gen_sparse_instance(n, m, 0, 0.0, seed);
    }
    if copies_per_group == 0 || n_groups * copies_per_group > n || m == 0 {
        return Err(SynthError::InvalidArgs(format!(
            "{n_groups} groups of {copies_per_group} copies do not fit in {n} columns of height {m}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut a = gaussian_unit_columns(&mut rng, m, n);
    let positions = rng.sample_without_replacement(n, n_groups * copies_per_group);
    let mut w = vec![0.0; n];
    let mut groups = Vec::with_capacity(n_groups);
    for chunk in positions.chunks(copies_per_group) {
        let mut group = chunk.to_vec();
        group.sort_unstable();
        let base = column(&a, group[0]).to_vec();
        for &j in &group[1..] {
            a.column_mut(j).copy_from_slice(&base);
        }
        w[group[0]] = 1.0;
        groups.push(group);
    }
    let b = add_scaled_noise(&mut rng, &a_times(&a, &w), DUPLICATE_TAIL_LEVEL);
    Ok(PlantedInstance {
        design: DesignSystem::from_matrix(a, b).expect("generated design is well formed"),
        true_weights: w,
        noise_level: DUPLICATE_TAIL_LEVEL,
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub residual: f64,
    pub supports_scored: u64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Advances `combo` to the next size-k subset of `[0, n)` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Scores every size-`budget` support by NNLS and returns the best one,
/// preferring the lexicographically smallest support among exact ties.
pub fn brute_force_best_subset(design: &DesignSystem, budget: usize) -> Result<OracleSolution, SynthError> {
    let n = design.n_columns();
    if budget == 0 || budget > n {
        return Err(PursuitError::Budget { budget, n }.into());
    }
    let total = binomial(n, budget);
    if total > BRUTE_FORCE_LIMIT {
        return Err(SynthError::CombinatorialGuard { combinations: total, limit: BRUTE_FORCE_LIMIT });
    }
    const CHUNK: usize = 4096;
    let mut combo: Vec<usize> = (0..budget).collect();
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut more = true;
    while more {
        let mut batch = Vec::with_capacity(CHUNK);
        while more && batch.len() < CHUNK {
            batch.push(combo.clone());
            more = next_combination(&mut combo, n);
        }
        let scored: Vec<(f64, Vec<usize>, Vec<f64>)> = batch
            .into_par_iter()
            .map(|s| {
                let fit = solve_nnls_subset(design.a(), &s, design.b(), DEFAULT_TOL, 3 * budget.max(10))
                    .expect("support columns are valid");
                (fit.residual_norm, s, fit.weights)
            })
            .collect();
        for cand in scored {
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
    }
    let (residual, indices, weights) = best.expect("at least one support");
    Ok(OracleSolution { indices, weights, residual, supports_scored: total as u64 })
}

/// Residual of an explicit support under NNLS weights.
pub fn support_residual(design: &DesignSystem, support: &[usize]) -> Result<f64, SynthError> {
    check_support(design.n_columns(), support)?;
    let fit = solve_nnls_subset(design.a(), support, design.b(), DEFAULT_TOL, 3 * support.len().max(10))
        .map_err(PursuitError::from)?;
    Ok(fit.residual_norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrajectory {
    pub train: TrajectoryGradients,
    pub target: TrajectoryGradients,
    /// Cluster of each training sample.
    pub train_clusters: Vec<usize>,
    /// Clusters the target samples are drawn from, ascending.
    pub target_clusters: Vec<usize>,
}

/// Cluster drift per checkpoint, relative to the unit-norm centre.
const CENTER_DRIFT: f64 = 0.3;
/// Per-sample noise norm, relative to the unit-norm centre.
const SAMPLE_NOISE: f64 = 0.1;

/// Training and target gradients whose samples scatter around cluster centres
/// that drift across checkpoints. About a quarter as many target samples as
/// training samples are drawn, from half of the clusters (rounded up).
pub fn gen_synthetic_trajectory(
    n: usize,
    t: usize,
    d: usize,
    n_clusters: usize,
    seed: u64,
) -> Result<SyntheticTrajectory, SynthError> {
    if n == 0 || t == 0 || d == 0 || n_clusters == 0 || n_clusters > n {
        return Err(SynthError::InvalidArgs(format!(
            "need n, t, d ≥ 1 and 1 ≤ n_clusters ≤ n (n={n}, t={t}, d={d}, n_clusters={n_clusters})"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let unit = |rng: &mut SeededRng| {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = norm2(&v).max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|x| *x /= norm);
        v
    };
    let mut centers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(t);
    centers.push((0..n_clusters).map(|_| unit(&mut rng)).collect());
    for step in 1..t {
        let next = (0..n_clusters)
            .map(|k| {
                let dir = unit(&mut rng);
                let mut c: Vec<f64> = centers[step - 1][k].iter().zip(&dir).map(|(c, e)| c + CENTER_DRIFT * e).collect();
                let norm = norm2(&c);
                c.iter_mut().for_each(|x| *x /= norm);
                c
            })
            .collect();
        centers.push(next);
    }

    let train_clusters: Vec<usize> = (0..n).map(|j| if j < n_clusters { j } else { rng.index(n_clusters) }).collect();
    let mut target_clusters = rng.sample_without_replacement(n_clusters, n_clusters.div_ceil(2));
    target_clusters.sort_unstable();
    let n_target = (n / 4).max(1);
    let target_of: Vec<usize> = (0..n_target).map(|_| target_clusters[rng.index(target_clusters.len())]).collect();

    let noise_scale = SAMPLE_NOISE / (d as f64).sqrt();
    let sample = |rng: &mut SeededRng, clusters: &[usize]| -> Vec<GradientBlock> {
        let scales: Vec<f64> = clusters.iter().map(|_| rng.uniform_range(0.5, 1.5)).collect();
        (0..t)
            .map(|step| {
                let mut block = GradientBlock::zeros(clusters.len(), d);
                for (j, &k) in clusters.iter().enumerate() {
                    let row = block.row_mut(j);
                    for (x, c) in row.iter_mut().zip(&centers[step][k]) {
                        *x = (scales[j] * c + noise_scale * rng.normal()) as f32;
                    }
                }
                block
            })
            .collect()
    };
    let train_blocks = sample(&mut rng, &train_clusters);
    let target_blocks = sample(&mut rng, &target_of);

    let tags: Vec<String> = (0..t).map(|s| format!("ckpt-{s:03}")).collect();
    let train_ids = (0..n).map(|j| format!("train-{j:06}")).collect();
    let target_ids = (0..n_target).map(|j| format!("target-{j:06}")).collect();
    let train = TrajectoryGradients::new(TrajectoryManifest::new(Role::Train, d, train_ids, tags.clone()), train_blocks)
        .expect("generated trajectory is valid");
    let target = TrajectoryGradients::new(TrajectoryManifest::new(Role::Target, d, target_ids, tags), target_blocks)
        .expect("generated trajectory is valid");
    Ok(SyntheticTrajectory { train, target, train_clusters, target_clusters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pursuit::{compute_residual, iter_cosamp, top_k_select, PursuitConfig};
    use crate::trajectory::validate;

    #[test]
    fn sparse_instance_is_exact_and_reproducible() {
        let inst = gen_sparse_instance(200, 40, 5, 0.0, 9).unwrap();
        assert_eq!(inst, gen_sparse_instance(200, 40, 5, 0.0, 9).unwrap());
        assert!(inst.design.col_norms().iter().all(|c| (c - 1.0).abs() < 1e-9));
        let s = inst.support();
        assert_eq!(s.len(), 5);
        assert!(inst.support_weights().iter().all(|&w| (0.5..1.5).contains(&w)));
        assert!(compute_residual(&inst.design, &s, &inst.support_weights()).unwrap() < 1e-12);
    }

    #[test]
    fn noise_has_requested_norm() {
        let clean = gen_sparse_instance(100, 30, 4, 0.0, 3).unwrap();
        let noisy = gen_sparse_instance(100, 30, 4, 0.2, 3).unwrap();
        assert_eq!(clean.design.a(), noisy.design.a());
        let diff: Vec<f64> = clean.design.b().iter().zip(noisy.design.b()).map(|(x, y)| x - y).collect();
        assert!((norm2(&diff) - 0.2 * norm2(clean.design.b())).abs() < 1e-12);
    }

    #[test]
    fn duplicated_groups_are_bit_identical() {
        let inst = gen_duplicated_instance(60, 20, 3, 5, 4).unwrap();
        assert_eq!(inst.groups.len(), 3);
        for g in &inst.groups {
            assert_eq!(g.len(), 5);
            for &j in g {
                assert_eq!(inst.design.column(j), inst.design.column(g[0]));
            }
        }
        let sparse = gen_sparse_instance(60, 20, 0, 0.0, 4).unwrap();
        assert_eq!(gen_duplicated_instance(60, 20, 0, 5, 4).unwrap(), sparse);
        assert!(gen_duplicated_instance(10, 5, 3, 4, 0).is_err());
    }

    #[test]
    fn duplicated_instance_separates_topk_from_cosamp() {
        let inst = gen_duplicated_instance(200, 64, 3, 5, 1).unwrap();
        let topk = top_k_select(&inst.design, 3).unwrap();
        assert!(inst.groups.iter().any(|g| topk.indices.iter().filter(|i| g.contains(i)).count() >= 2));
        let gtp = iter_cosamp(&inst.design, &PursuitConfig::new(3, 5)).unwrap();
        for g in &inst.groups {
            assert_eq!(gtp.indices.iter().filter(|i| g.contains(i)).count(), 1);
        }
        assert!(gtp.final_residual() < topk.final_residual());
    }

    #[test]
    fn oracle_on_small_cases() {
        let dup = DesignSystem::from_matrix(DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]), vec![2.0, 1.0])
            .unwrap();
        let best = brute_force_best_subset(&dup, 2).unwrap();
        assert_eq!(best.indices, vec![0, 2]);
        assert_eq!(best.residual, 0.0);

        let inst = gen_sparse_instance(12, 8, 3, 0.0, 5).unwrap();
        let best = brute_force_best_subset(&inst.design, 3).unwrap();
        assert_eq!(best.indices, inst.support());
        assert!(best.residual < 1e-12);
        assert_eq!(best.supports_scored, 220);

        let all = brute_force_best_subset(&inst.design, 12).unwrap();
        let full: Vec<usize> = (0..12).collect();
        assert!((all.residual - support_residual(&inst.design, &full).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn oracle_guard() {
        let inst = gen_sparse_instance(60, 4, 1, 0.0, 0).unwrap();
        assert!(matches!(brute_force_best_subset(&inst.design, 30), Err(SynthError::CombinatorialGuard { .. })));
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn synthetic_trajectory_is_valid_and_seeded() {
        let s = gen_synthetic_trajectory(40, 3, 16, 4, 2).unwrap();
        assert!(validate(&s.train).is_empty());
        assert!(validate(&s.target).is_empty());
        assert_eq!(s.target.n_samples(), 10);
        assert_eq!(s.target_clusters.len(), 2);
        assert_eq!(s, gen_synthetic_trajectory(40, 3, 16, 4, 2).unwrap());
        assert!(gen_synthetic_trajectory(3, 1, 1, 4, 0).is_err());
    }
}
