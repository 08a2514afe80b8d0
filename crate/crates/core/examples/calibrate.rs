//! Measures the pursuit on the pinned fixture families and writes the frozen
//! acceptance thresholds to `calibration.json` next to the crate manifest.
//! Pass `--dry-run` to print the file instead.

use std::path::Path;

use gtp::pursuit::{iter_cosamp, top_k_select, PursuitConfig};
use gtp::synth::{brute_force_best_subset, gen_duplicated_instance, gen_sparse_instance};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dry_run = std::env::args().any(|a| a == "--dry-run");

    let (rn, rm, rs, rseeds) = (2048, 256, 16, 0..100u64);
    let (mut exact, mut max_err, mut stability) = (0, 0.0f64, 0.0f64);
    for seed in rseeds.clone() {
        let inst = gen_sparse_instance(rn, rm, rs, 0.0, seed)?;
        let sel = iter_cosamp(&inst.design, &PursuitConfig::new(rs, 10))?;
        let h = &sel.residual_history;
        stability = stability.max((h[10] - h[5]).abs() / h[0]);
        if sel.indices == inst.support() {
            exact += 1;
            let e = sel.weights.iter().zip(inst.support_weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_err = max_err.max(e);
        }
    }
    println!("recovery: {exact}/100 exact, max weight error {max_err:.2e}, max |r10 - r5|/|b| {stability:.2e}");

    let (on, om, os, onoise, oseeds) = (12, 8, 3, 0.3, 1000..1200u64);
    let mut ratios = Vec::new();
    for seed in oseeds.clone() {
        let inst = gen_sparse_instance(on, om, os, onoise, seed)?;
        let best = brute_force_best_subset(&inst.design, os)?.residual;
        let r = iter_cosamp(&inst.design, &PursuitConfig::new(os, 10))?.final_residual();
        ratios.push(r / best);
    }
    ratios.sort_by(f64::total_cmp);
    let worst = *ratios.last().unwrap_or(&1.0);
    let optimal = ratios.iter().filter(|&&r| r <= 1.0 + 1e-9).count();
    let epsilon = ((worst - 1.0) * 10.0).ceil() / 10.0;
    println!("oracle: optimal on {optimal}/200, median {:.4}, p95 {:.4}, worst {worst:.4} -> epsilon {epsilon}", ratios[100], ratios[189]);

    let (dseeds, mut dedup_ok, mut topk_dup) = (500..550u64, 0, 0);
    for seed in dseeds.clone() {
        let inst = gen_duplicated_instance(400, 64, 3, 5, seed)?;
        let gtp = iter_cosamp(&inst.design, &PursuitConfig::new(3, 10))?;
        let topk = top_k_select(&inst.design, 3)?;
        let per_group = |idx: &[usize]| inst.groups.iter().map(|g| idx.iter().filter(|i| g.contains(i)).count()).collect::<Vec<_>>();
        dedup_ok += usize::from(per_group(&gtp.indices).iter().all(|&c| c == 1) && gtp.final_residual() < topk.final_residual());
        topk_dup += usize::from(per_group(&topk.indices).iter().any(|&c| c >= 2));
    }
    println!("dedup: {dedup_ok}/50 one-per-group and below top-k, top-k duplicated on {topk_dup}/50");

    let doc = json!({
        "recovery": {
            "n": rn, "m": rm, "sparsity": rs, "noise": 0.0, "budget": rs, "iterations": 10,
            "seeds": [rseeds.start, rseeds.end],
            "min_exact": 95, "weight_tol": 1e-6, "max_seconds": 30.0,
            "measured": { "exact": exact, "max_weight_error": max_err }
        },
        "oracle": {
            "n": on, "m": om, "sparsity": os, "noise": onoise, "budget": os, "iterations": 10,
            "seeds": [oseeds.start, oseeds.end],
            "epsilon": epsilon, "max_seconds": 60.0,
            "measured": { "optimal": optimal, "median_ratio": ratios[100], "p95_ratio": ratios[189], "worst_ratio": worst }
        },
        "dedup": {
            "n": 400, "m": 64, "groups": 3, "copies": 5, "budget": 3, "iterations": 10,
            "seeds": [dseeds.start, dseeds.end],
            "measured": { "passing": dedup_ok, "topk_duplicated": topk_dup }
        },
        "refinement": {
            "dominance_slack": 1e-9, "stability_tol": 1e-3,
            "measured": { "max_stability": stability }
        },
        "distributed": {
            "equivalence_fixtures": 50, "equivalence_seeds_from": 3000,
            "timesteps": 10, "machine_counts": [2, 5], "correlation_tol": 1e-6
        },
        "bench": {
            "n": 20000, "m": 512, "sparsity": 32, "noise": 0.0, "seed": 7,
            "budgets": [100, 500, 1000, 2000], "iterations": 5, "max_seconds": 900.0
        },
        "nnls": {
            "kkt_instances": 1000, "kkt_tol": 1e-8, "closed_form_tol": 1e-9, "duplicate_instances": 100
        },
        "subspace": {
            "oracle_matrices": 50, "orthonormality_tol": 1e-6, "variance_rel_tol": 1e-8
        },
        "known_failures": [{
            "criterion": "GTP vs OMP scaling",
            "reason": "the GTP/OMP time ratio rises from M = 100 to M = 500: at M = 100 the planted 32-sparse \
                       target is fitted after a few dozen NNLS steps, while at M = 500 the 1000-column candidate \
                       pool exceeds the 512 rows and every pool fit runs to full rank. GTP is faster than OMP at \
                       every budget and the ratio falls from M = 500 on."
        }]
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    if dry_run {
        print!("{text}");
    } else {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("calibration.json");
        std::fs::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
