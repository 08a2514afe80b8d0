//! Head-to-head comparisons: wall-time against OMP, and residuals against the
//! exhaustive optimum.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::DesignSystem;
use crate::error::{PursuitError, SynthError};
use crate::nnls::DEFAULT_TOL;
use crate::pursuit::{iter_cosamp, omp_select, top_k_select, PursuitConfig};
use crate::synth::{brute_force_best_subset, OracleSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub budget: usize,
    pub gtp_seconds: f64,
    pub omp_seconds: f64,
    /// `gtp_seconds / omp_seconds`.
    pub time_ratio: f64,
    pub gtp_residual: f64,
    pub omp_residual: f64,
}

/// Times `iter_cosamp` with `iterations` rounds and OMP at each budget.
pub fn bench_gtp_vs_omp(
    design: &DesignSystem,
    budgets: &[usize],
    iterations: usize,
) -> Result<Vec<BenchRow>, PursuitError> {
    budgets
        .iter()
        .map(|&budget| {
            let start = Instant::now();
            let gtp = iter_cosamp(design, &PursuitConfig::new(budget, iterations))?;
            let gtp_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let omp = omp_select(design, budget, DEFAULT_TOL, None)?;
            let omp_seconds = start.elapsed().as_secs_f64();
            log::info!("bench M={budget}: gtp {gtp_seconds:.3}s, omp {omp_seconds:.3}s");
            Ok(BenchRow {
                budget,
                gtp_seconds,
                omp_seconds,
                time_ratio: gtp_seconds / omp_seconds,
                gtp_residual: gtp.final_residual(),
                omp_residual: omp.final_residual(),
            })
        })
        .collect()
}

/// Plain-text table of bench rows.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>8} {:>12} {:>12} {:>10} {:>14} {:>14}\n",
        "budget", "gtp_s", "omp_s", "gtp/omp", "gtp_residual", "omp_residual"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>8} {:>12.4} {:>12.4} {:>10.4} {:>14.6e} {:>14.6e}\n",
            r.budget, r.gtp_seconds, r.omp_seconds, r.time_ratio, r.gtp_residual, r.omp_residual
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub budget: usize,
    pub optimum: OracleSolution,
    pub gtp_residual: f64,
    pub topk_residual: f64,
    pub omp_residual: f64,
    pub gtp_indices: Vec<usize>,
    /// Residual over optimum; 1 when both are zero, infinite when only the optimum is.
    pub gtp_ratio: f64,
    pub topk_ratio: f64,
    pub omp_ratio: f64,
}

/// Relative slack under which two residuals count as equal.
const RATIO_FLOOR: f64 = 1e-12;

pub fn residual_ratio(residual: f64, optimum: f64) -> f64 {
    if optimum > RATIO_FLOOR {
        residual / optimum
    } else if residual <= RATIO_FLOOR {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Residuals of GTP, top-k and OMP next to the exhaustive optimum.
pub fn oracle_comparison(
    design: &DesignSystem,
    cfg: &PursuitConfig,
) -> Result<OracleComparison, SynthError> {
    let optimum = brute_force_best_subset(design, cfg.budget)?;
    let gtp = iter_cosamp(design, cfg)?;
    let topk = top_k_select(design, cfg.budget)?.final_residual();
    let omp = omp_select(design, cfg.budget, cfg.nnls_tol, cfg.nnls_max_iter)?.final_residual();
    let opt = optimum.residual;
    Ok(OracleComparison {
        budget: cfg.budget,
        gtp_residual: gtp.final_residual(),
        topk_residual: topk,
        omp_residual: omp,
        gtp_ratio: residual_ratio(gtp.final_residual(), opt),
        topk_ratio: residual_ratio(topk, opt),
        omp_ratio: residual_ratio(omp, opt),
        gtp_indices: gtp.indices,
        optimum,
    })
}
