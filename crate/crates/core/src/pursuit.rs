//! Subset selection over a design system.
//!
//! [`iter_cosamp`] is the joint selector: every iteration correlates the
//! columns with the current residual, pools the `2M` best candidates with the
//! current support, fits the pool by NNLS, prunes to the `M` heaviest columns
//! and refits. Because NNLS gives a redundant copy of an already-weighted
//! column zero weight, pruning by weight drops duplicates that a pure ranking
//! would keep.
//!
//! [`top_k_select`], [`omp_select`] and [`random_select`] are the baselines.
//! All selectors report NNLS weights on their support so residuals are
//! comparable.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::DesignSystem;
use crate::error::PursuitError;
use crate::linalg::{correlate, norm2, residual, top_indices};
use crate::nnls::{solve_nnls_subset, NnlsResult, DEFAULT_TOL};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[value(name = "gtp")]
    Gtp,
    #[value(name = "gtp_dist", alias = "gtp-dist")]
    GtpDist,
    #[value(name = "topk", alias = "top-k")]
    #[serde(rename = "topk")]
    TopK,
    #[value(name = "omp")]
    Omp,
    #[value(name = "random")]
    Random,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gtp => "gtp",
            Algorithm::GtpDist => "gtp_dist",
            Algorithm::TopK => "topk",
            Algorithm::Omp => "omp",
            Algorithm::Random => "random",
        }
    }
}

/// What the columns are correlated against at the start of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// The residual left by the previous iteration.
    #[default]
    #[value(name = "residual")]
    Residual,
    /// The target vector `b` on every iteration.
    #[value(name = "target_literal", alias = "target")]
    TargetLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    /// Number of columns to select (`M`).
    pub budget: usize,
    /// Number of pursuit iterations (`K`).
    pub iterations: usize,
    pub correlation_mode: CorrelationMode,
    pub nnls_tol: f64,
    /// `None` means three times the number of columns of each subproblem.
    pub nnls_max_iter: Option<usize>,
    /// Only used by the random baseline.
    pub seed: u64,
    /// Stop once `|r^k − r^{k−1}| / ‖b‖ < 1e-8`.
    pub early_exit: bool,
    /// Keep the incumbent support when the pruned candidate fits worse. The
    /// first incumbent is the top-`M` ranking of the first correlation.
    pub monotone: bool,
}

impl PursuitConfig {
    pub fn new(budget: usize, iterations: usize) -> Self {
        Self {
            budget,
            iterations,
            correlation_mode: CorrelationMode::Residual,
            nnls_tol: DEFAULT_TOL,
            nnls_max_iter: None,
            seed: 0,
            early_exit: false,
            monotone: true,
        }
    }

    pub fn with_mode(mut self, mode: CorrelationMode) -> Self {
        self.correlation_mode = mode;
        self
    }

    pub fn with_monotone(mut self, monotone: bool) -> Self {
        self.monotone = monotone;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), PursuitError> {
        if self.budget == 0 || self.budget > n {
            return Err(PursuitError::Budget { budget: self.budget, n });
        }
        if self.iterations == 0 {
            return Err(PursuitError::NoIterations);
        }
        Ok(())
    }

    pub(crate) fn max_iter_for(&self, k: usize) -> usize {
        self.nnls_max_iter.unwrap_or(3 * k.max(1))
    }

    /// Candidate pool size `2M`, clamped to `n`.
    pub(crate) fn pool_size(&self, n: usize) -> (usize, bool) {
        let want = 2 * self.budget;
        (want.min(n), want > n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub algorithm: Algorithm,
    /// Selected column indices, ascending.
    pub indices: Vec<usize>,
    pub sample_ids: Vec<String>,
    /// Non-negative weights aligned with `indices`.
    pub weights: Vec<f64>,
    /// `‖b‖` followed by the residual norm after each iteration.
    pub residual_history: Vec<f64>,
    /// Support after each iteration (ascending).
    pub per_iteration_supports: Vec<Vec<usize>>,
    /// Weights aligned with `per_iteration_supports`.
    pub per_iteration_weights: Vec<Vec<f64>>,
    /// Distributed runs: gather-summed weights on the final support, before
    /// the global refit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregated_weights: Option<Vec<f64>>,
    pub config: PursuitConfig,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// Non-fatal events (clamped pool, padding, NNLS iteration caps, ...).
    pub flags: Vec<String>,
}

impl Selection {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

#[derive(Debug, Default)]
pub(crate) struct Timer {
    totals: BTreeMap<String, f64>,
}

impl Timer {
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.totals.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn add(&mut self, phase: &str, secs: f64) {
        *self.totals.entry(phase.to_string()).or_default() += secs;
    }

    pub fn finish(self) -> BTreeMap<String, f64> {
        self.totals
    }
}

/// `‖b − A_S w‖₂`.
pub fn compute_residual(design: &DesignSystem, indices: &[usize], weights: &[f64]) -> Result<f64, PursuitError> {
    check_support(design.n_columns(), indices)?;
    if indices.len() != weights.len() {
        return Err(PursuitError::WeightsMismatch { indices: indices.len(), weights: weights.len() });
    }
    Ok(norm2(&residual(design.a(), design.b(), indices, weights)))
}

pub(crate) fn check_support(n: usize, indices: &[usize]) -> Result<(), PursuitError> {
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(PursuitError::IndexOutOfRange { index: i, n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(PursuitError::DuplicateIndex(i));
        }
    }
    Ok(())
}

pub(crate) fn fit_support(
    design: &DesignSystem,
    support: &[usize],
    cfg: &PursuitConfig,
) -> Result<NnlsResult, PursuitError> {
    Ok(solve_nnls_subset(design.a(), support, design.b(), cfg.nnls_tol, cfg.max_iter_for(support.len()))?)
}

/// Sorted union of two index lists.
pub(crate) fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Chooses `budget` columns from an NNLS fit on `pool`: the strictly positive
/// weights, largest first, then (if too few are positive) the best-correlated
/// columns not yet chosen. Returns the sorted support and whether it was padded.
pub(crate) fn prune(
    pool: &[usize],
    pool_weights: &[f64],
    correlation: &[f64],
    budget: usize,
) -> (Vec<usize>, bool) {
    let not_positive: Vec<bool> = pool_weights.iter().map(|&w| w <= 0.0).collect();
    let mut chosen: Vec<usize> =
        top_indices(pool_weights, budget, Some(&not_positive)).into_iter().map(|i| pool[i]).collect();
    let padded = chosen.len() < budget;
    if padded {
        let mut taken = vec![false; correlation.len()];
        for &c in &chosen {
            taken[c] = true;
        }
        chosen.extend(top_indices(correlation, budget - chosen.len(), Some(&taken)));
    }
    chosen.sort_unstable();
    (chosen, padded)
}

fn flag_nnls(flags: &mut Vec<String>, fit: &NnlsResult, iteration: usize, stage: &str) {
    if !fit.converged {
        flags.push(format!("nnls_not_converged:iteration={iteration}:stage={stage}"));
    }
}

fn ids_for(design: &DesignSystem, indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&i| design.column_ids()[i].clone()).collect()
}

/// Iterative compressive sampling pursuit.
pub fn iter_cosamp(design: &DesignSystem, cfg: &PursuitConfig) -> Result<Selection, PursuitError> {
    let n = design.n_columns();
    cfg.validate(n)?;
    let started = Instant::now();
    let mut timer = Timer::default();
    let mut flags = Vec::new();
    let (pool_size, clamped) = cfg.pool_size(n);
    if clamped {
        flags.push(format!("candidate_pool_clamped:{}->{}", 2 * cfg.budget, pool_size));
    }
    let b = design.b();
    let b_norm = norm2(b);

    let mut support: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut r = b.to_vec();
    let mut res_norm = b_norm;
    let mut history = vec![b_norm];
    let mut supports = Vec::new();
    let mut all_weights = Vec::new();

    for k in 1..=cfg.iterations {
        let corr_with = match cfg.correlation_mode {
            CorrelationMode::Residual => &r,
            CorrelationMode::TargetLiteral => b,
        };
        let p = timer.time("correlate", || correlate(design.a(), corr_with));

        if k == 1 && cfg.monotone {
            // incumbent: plain top-M ranking of the first correlation
            let mut init = top_indices(&p, cfg.budget, None);
            init.sort_unstable();
            let fit = timer.time("nnls_final", || fit_support(design, &init, cfg))?;
            flag_nnls(&mut flags, &fit, 0, "init");
            res_norm = norm2(&residual(design.a(), b, &init, &fit.weights));
            support = init;
            weights = fit.weights;
        }

        let omega = top_indices(&p, pool_size, None);
        let pool = union_sorted(&omega, &support);
        if pool.is_empty() {
            return Err(PursuitError::EmptyCandidatePool);
        }
        let pool_fit = timer.time("nnls_pool", || fit_support(design, &pool, cfg))?;
        flag_nnls(&mut flags, &pool_fit, k, "pool");

        let (candidate, padded) = prune(&pool, &pool_fit.weights, &p, cfg.budget);
        if padded {
            flags.push(format!("support_padded:iteration={k}"));
        }
        let fit = timer.time("nnls_final", || fit_support(design, &candidate, cfg))?;
        flag_nnls(&mut flags, &fit, k, "final");
        let cand_r = residual(design.a(), b, &candidate, &fit.weights);
        let cand_norm = norm2(&cand_r);

        if cfg.monotone && cand_norm > res_norm {
            flags.push(format!("candidate_rejected:iteration={k}"));
            if k == 1 {
                r = residual(design.a(), b, &support, &weights);
            }
        } else {
            support = candidate;
            weights = fit.weights;
            r = cand_r;
            res_norm = cand_norm;
        }
        history.push(res_norm);
        supports.push(support.clone());
        all_weights.push(weights.clone());

        if cfg.early_exit && b_norm > 0.0 && (history[k - 1] - res_norm).abs() / b_norm < 1e-8 {
            flags.push(format!("early_exit:iteration={k}"));
            break;
        }
    }
    timer.add("total", started.elapsed().as_secs_f64());
    Ok(Selection {
        algorithm: Algorithm::Gtp,
        sample_ids: ids_for(design, &support),
        indices: support,
        weights,
        residual_history: history,
        per_iteration_supports: supports,
        per_iteration_weights: all_weights,
        aggregated_weights: None,
        config: cfg.clone(),
        timings: timer.finish(),
        flags,
    })
}

fn single_shot(
    design: &DesignSystem,
    algorithm: Algorithm,
    mut support: Vec<usize>,
    cfg: PursuitConfig,
    mut timer: Timer,
    started: Instant,
) -> Result<Selection, PursuitError> {
    support.sort_unstable();
    let fit = timer.time("nnls_final", || fit_support(design, &support, &cfg))?;
    let mut flags = Vec::new();
    flag_nnls(&mut flags, &fit, 1, "final");
    let res = norm2(&residual(design.a(), design.b(), &support, &fit.weights));
    timer.add("total", started.elapsed().as_secs_f64());
    Ok(Selection {
        algorithm,
        sample_ids: ids_for(design, &support),
        indices: support.clone(),
        weights: fit.weights.clone(),
        residual_history: vec![res],
        per_iteration_supports: vec![support],
        per_iteration_weights: vec![fit.weights],
        aggregated_weights: None,
        config: cfg,
        timings: timer.finish(),
        flags,
    })
}

/// Independent ranking: the `M` largest entries of `Aᵀb`, ties to the lower
/// index, weighted by NNLS on that support.
pub fn top_k_select(design: &DesignSystem, budget: usize) -> Result<Selection, PursuitError> {
    let cfg = PursuitConfig::new(budget, 1);
    cfg.validate(design.n_columns())?;
    let started = Instant::now();
    let mut timer = Timer::default();
    let scores = timer.time("correlate", || correlate(design.a(), design.b()));
    let support = top_indices(&scores, budget, None);
    single_shot(design, Algorithm::TopK, support, cfg, timer, started)
}

/// Uniform sample of `budget` distinct indices from `[0, n)`, ascending.
pub fn random_indices(n: usize, budget: usize, seed: u64) -> Result<Vec<usize>, PursuitError> {
    if budget > n {
        return Err(PursuitError::Budget { budget, n });
    }
    let mut idx = SeededRng::new(seed).sample_without_replacement(n, budget);
    idx.sort_unstable();
    Ok(idx)
}

pub fn random_select(design: &DesignSystem, budget: usize, seed: u64) -> Result<Selection, PursuitError> {
    let cfg = PursuitConfig::new(budget, 1).with_seed(seed);
    cfg.validate(design.n_columns())?;
    let started = Instant::now();
    let support = random_indices(design.n_columns(), budget, seed)?;
    single_shot(design, Algorithm::Random, support, cfg, Timer::default(), started)
}

/// Orthogonal matching pursuit with non-negative refits: one column per
/// iteration, each followed by a fresh NNLS solve on the whole support.
pub fn omp_select(
    design: &DesignSystem,
    budget: usize,
    nnls_tol: f64,
    nnls_max_iter: Option<usize>,
) -> Result<Selection, PursuitError> {
    let mut cfg = PursuitConfig::new(budget, budget);
    cfg.nnls_tol = nnls_tol;
    cfg.nnls_max_iter = nnls_max_iter;
    let n = design.n_columns();
    cfg.validate(n)?;
    let started = Instant::now();
    let mut timer = Timer::default();
    let mut flags = Vec::new();
    let b = design.b();

    let mut order: Vec<usize> = Vec::with_capacity(budget);
    let mut taken = vec![false; n];
    let mut r = b.to_vec();
    let mut history = vec![norm2(b)];
    let mut supports = Vec::with_capacity(budget);
    let mut all_weights = Vec::with_capacity(budget);
    let mut sorted = Vec::new();
    let mut weights = Vec::new();

    for it in 1..=budget {
        let p = timer.time("correlate", || correlate(design.a(), &r));
        let j = top_indices(&p, 1, Some(&taken))[0];
        taken[j] = true;
        order.push(j);
        sorted = order.clone();
        sorted.sort_unstable();
        let fit = timer.time("nnls_final", || fit_support(design, &sorted, &cfg))?;
        flag_nnls(&mut flags, &fit, it, "final");
        r = residual(design.a(), b, &sorted, &fit.weights);
        history.push(norm2(&r));
        weights = fit.weights;
        supports.push(sorted.clone());
        all_weights.push(weights.clone());
    }
    timer.add("total", started.elapsed().as_secs_f64());
    Ok(Selection {
        algorithm: Algorithm::Omp,
        sample_ids: ids_for(design, &sorted),
        indices: sorted,
        weights,
        residual_history: history,
        per_iteration_supports: supports,
        per_iteration_weights: all_weights,
        aggregated_weights: None,
        config: cfg,
        timings: timer.finish(),
        flags,
    })
}

/// Residual of NNLS on the top-`M` ranking of `Aᵀb`.
pub fn top_m_initialization_residual(design: &DesignSystem, budget: usize) -> Result<f64, PursuitError> {
    Ok(top_k_select(design, budget)?.final_residual())
}
