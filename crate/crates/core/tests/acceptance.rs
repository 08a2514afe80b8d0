//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails that `calibration.json` does not list
//! under `known_failures`.
//!
//! Fixture sizes, seeds and thresholds come from `calibration.json`, which
//! `cargo run --release --example calibrate` regenerates.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use gtp::design::{assemble_design, DesignSystem};
use gtp::dist::{partition_design, run_in_process, run_loopback, same_selection_ignoring_timings, DistOptions};
use gtp::nnls::solve_nnls_default;
use gtp::pursuit::{iter_cosamp, omp_select, top_k_select, PursuitConfig, Selection};
use gtp::subspace::{fit_evolving_subspace, fit_subspace, orthonormality_error, SubspaceMethod};
use gtp::synth::{gen_duplicated_instance, gen_sparse_instance, gen_synthetic_trajectory};
use nalgebra::{DMatrix, DVector};
use serde_json::Value;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("calibration.json: missing number {key}"))
}

fn int(v: &Value, key: &str) -> usize {
    v[key].as_u64().unwrap_or_else(|| panic!("calibration.json: missing integer {key}")) as usize
}

fn seeds(v: &Value) -> std::ops::Range<u64> {
    let s = v["seeds"].as_array().expect("calibration.json: seeds");
    s[0].as_u64().unwrap()..s[1].as_u64().unwrap()
}

/// Residual of a selection recomputed from its indices and weights.
fn recomputed(design: &DesignSystem, sel: &Selection) -> f64 {
    residual_norm(design.a(), design.b(), &sel.indices, &sel.weights)
}

/// Residual of the NNLS fit on the `budget` columns most correlated with b.
fn top_m_reference(design: &DesignSystem, budget: usize) -> f64 {
    let idx = top_indices(&correlations(design.a(), design.b()), budget);
    nnls_reference(&sub_matrix(design.a(), &idx), design.b()).1
}

/// Per-fixture numbers the refinement criterion needs.
#[derive(Default)]
struct Refinement {
    fixtures: usize,
    dominance_violations: Vec<String>,
    worst_stability: f64,
}

impl Refinement {
    fn record(&mut self, label: String, design: &DesignSystem, sel: &Selection, slack: f64, gaussian: bool) {
        self.fixtures += 1;
        let k = sel.residual_history.len() - 1;
        let init = top_m_reference(design, sel.config.budget);
        if sel.residual_history[k] > init + slack {
            self.dominance_violations.push(format!("{label}: {:.3e} > {init:.3e}", sel.residual_history[k]));
        }
        if gaussian && k >= 10 {
            let h = &sel.residual_history;
            let b = DVector::from_column_slice(design.b()).norm();
            self.worst_stability = self.worst_stability.max((h[10] - h[5]).abs() / b);
        }
    }
}

fn recovery(cal: &Value, refine: &mut Refinement) -> Outcome {
    let c = &cal["recovery"];
    let (n, m, s, k) = (int(c, "n"), int(c, "m"), int(c, "sparsity"), int(c, "iterations"));
    let slack = num(&cal["refinement"], "dominance_slack");
    let start = Instant::now();
    let (mut exact, mut worst_err, mut total) = (0, 0.0f64, 0);
    let mut pursuit_secs = 0.0;
    for seed in seeds(c) {
        total += 1;
        let inst = gen_sparse_instance(n, m, s, num(c, "noise"), seed).unwrap();
        let t = Instant::now();
        let sel = iter_cosamp(&inst.design, &PursuitConfig::new(s, k)).unwrap();
        pursuit_secs += t.elapsed().as_secs_f64();
        let planted: Vec<usize> = (0..n).filter(|&j| inst.true_weights[j] > 0.0).collect();
        if sel.indices == planted {
            exact += 1;
            let err = sel.indices.iter().zip(&sel.weights).map(|(&j, w)| (w - inst.true_weights[j]).abs()).fold(0.0, f64::max);
            worst_err = worst_err.max(err);
        }
        refine.record(format!("recovery seed {seed}"), &inst.design, &sel, slack, true);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = exact >= int(c, "min_exact") && worst_err < num(c, "weight_tol") && pursuit_secs < num(c, "max_seconds");
    outcome(
        "exact sparse recovery",
        pass,
        format!(
            "{exact}/{total} supports recovered (need {}), max weight error {worst_err:.2e} (< {:.0e}), pursuit {pursuit_secs:.1}s of {secs:.1}s (< {}s)",
            int(c, "min_exact"),
            num(c, "weight_tol"),
            num(c, "max_seconds")
        ),
    )
}

fn oracle(cal: &Value, refine: &mut Refinement) -> Outcome {
    let c = &cal["oracle"];
    let (n, m, s, k) = (int(c, "n"), int(c, "m"), int(c, "sparsity"), int(c, "iterations"));
    let eps = num(c, "epsilon");
    let slack = num(&cal["refinement"], "dominance_slack");
    let start = Instant::now();
    let (mut worst, mut over_eps, mut worse_than_topk, mut total, mut optimal) = (1.0f64, 0, 0, 0, 0);
    for seed in seeds(c) {
        total += 1;
        let inst = gen_sparse_instance(n, m, s, num(c, "noise"), seed).unwrap();
        let (a, b) = (inst.design.a(), inst.design.b());
        let sel = iter_cosamp(&inst.design, &PursuitConfig::new(s, k)).unwrap();
        let r = recomputed(&inst.design, &sel);
        let best = best_subset_residual(a, b, s);
        let topk = nnls_enumerate(&sub_matrix(a, &top_indices(&correlations(a, b), s)), b).1;
        let ratio = if best > 0.0 { r / best } else if r <= 1e-12 { 1.0 } else { f64::INFINITY };
        worst = worst.max(ratio);
        optimal += usize::from(ratio <= 1.0 + 1e-9);
        over_eps += usize::from(r > (1.0 + eps) * best + 1e-12);
        worse_than_topk += usize::from(r > topk + 1e-12);
        refine.record(format!("oracle seed {seed}"), &inst.design, &sel, slack, true);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = over_eps == 0 && worse_than_topk == 0 && secs < num(c, "max_seconds");
    outcome(
        "oracle near-optimality",
        pass,
        format!(
            "{total} instances: optimal on {optimal}, worst ratio {worst:.4} (eps {eps}), {over_eps} above (1+eps), {worse_than_topk} worse than top-k, {secs:.1}s (< {}s)",
            num(c, "max_seconds")
        ),
    )
}

fn dedup(cal: &Value, refine: &mut Refinement) -> Outcome {
    let c = &cal["dedup"];
    let slack = num(&cal["refinement"], "dominance_slack");
    let (mut one_per_group, mut topk_dup, mut strictly_lower, mut total) = (0, 0, 0, 0);
    for seed in seeds(c) {
        total += 1;
        let inst = gen_duplicated_instance(int(c, "n"), int(c, "m"), int(c, "groups"), int(c, "copies"), seed).unwrap();
        let budget = int(c, "budget");
        let sel = iter_cosamp(&inst.design, &PursuitConfig::new(budget, int(c, "iterations"))).unwrap();
        let topk = top_k_select(&inst.design, budget).unwrap();
        let count = |idx: &[usize], g: &[usize]| idx.iter().filter(|i| g.contains(i)).count();
        one_per_group += usize::from(inst.groups.iter().all(|g| count(&sel.indices, g) == 1));
        topk_dup += usize::from(inst.groups.iter().any(|g| count(&topk.indices, g) >= 2));
        let (a, b) = (inst.design.a(), inst.design.b());
        let topk_res = nnls_enumerate(&sub_matrix(a, &topk.indices), b).1;
        strictly_lower += usize::from(recomputed(&inst.design, &sel) < topk_res);
        refine.record(format!("dedup seed {seed}"), &inst.design, &sel, slack, false);
    }
    let pass = one_per_group == total && topk_dup == total && strictly_lower == total;
    outcome(
        "de-duplication",
        pass,
        format!(
            "{total} fixtures: one index per group in {one_per_group}, top-k repeats a group in {topk_dup}, residual below top-k in {strictly_lower}"
        ),
    )
}

fn refinement(cal: &Value, refine: &Refinement) -> Outcome {
    let tol = num(&cal["refinement"], "stability_tol");
    let pass = refine.dominance_violations.is_empty() && refine.worst_stability < tol;
    let mut detail = format!(
        "{} fixtures: final residual above top-M start on {}, max |r10 - r5|/|b| {:.2e} (< {tol:.0e})",
        refine.fixtures,
        refine.dominance_violations.len(),
        refine.worst_stability
    );
    if let Some(first) = refine.dominance_violations.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    outcome("refinement dominance", pass, detail)
}

/// View an m-row design as `t` checkpoints.
fn with_timesteps(design: &DesignSystem, t: usize) -> DesignSystem {
    let m = design.n_rows();
    DesignSystem::new(design.a().clone(), design.b().to_vec(), design.column_ids().to_vec(), t, m / t).unwrap()
}

fn distributed(cal: &Value) -> Outcome {
    let c = &cal["distributed"];
    let opts = DistOptions::default();

    // (a) one machine reproduces the single-process index sets
    let mut same = 0;
    let fixtures = int(c, "equivalence_fixtures");
    let first_seed = c["equivalence_seeds_from"].as_u64().unwrap();
    for i in 0..fixtures as u64 {
        let t = 1 + (i % 4) as usize;
        let inst = gen_sparse_instance(150 + 10 * i as usize, 12 * t, 4 + (i % 5) as usize, 0.1, first_seed + i).unwrap();
        let design = with_timesteps(&inst.design, t);
        let cfg = PursuitConfig::new(6 + (i % 7) as usize, 6);
        let single = iter_cosamp(&design, &cfg).unwrap();
        let dist = run_in_process(&partition_design(&design, 1).unwrap(), &cfg, &opts, None).unwrap();
        same += usize::from(dist.selection.indices == single.indices);
    }

    // (b) gathered correlations equal Aᵀc for the global residual c
    let t = int(c, "timesteps");
    let synth = gen_synthetic_trajectory(400, t, 40, 6, 77).unwrap();
    let basis = fit_evolving_subspace(&synth.target, 4, SubspaceMethod::PcaUncentered, 0, 1).unwrap();
    let design = assemble_design(&synth.train, &synth.target, &basis).unwrap();
    let cfg = PursuitConfig::new(25, 8);
    let tol = num(c, "correlation_tol");
    let mut worst_corr = 0.0f64;
    let mut checked = 0;
    let mut transports_agree = true;
    for machines in c["machine_counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize) {
        let shards = partition_design(&design, machines).unwrap();
        let out = run_in_process(&shards, &cfg, &opts, None).unwrap();
        for (corr, state) in out.trace.correlations.iter().zip(&out.trace.residual_states) {
            let mut c_vec = design.b().to_vec();
            for (shard, w) in shards.iter().zip(&state.machine_weights) {
                let rows = shard.assignment.row_range.clone();
                for (&j, &wj) in state.support.iter().zip(w) {
                    for r in rows.clone() {
                        c_vec[r] -= wj * design.a()[(r, j)];
                    }
                }
            }
            let expect = correlations(design.a(), &c_vec);
            let err = corr.iter().zip(&expect).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst_corr = worst_corr.max(err);
            checked += 1;
        }
        // (c) sockets and channels carry identical runs
        let tcp = run_loopback(&shards, &cfg, &opts).unwrap();
        transports_agree &= same_selection_ignoring_timings(&tcp.selection, &out.selection) && tcp.trace == out.trace;
    }
    let pass = same == fixtures && worst_corr <= tol && checked > 0 && transports_agree;
    outcome(
        "distributed equivalence",
        pass,
        format!(
            "1-machine indices equal on {same}/{fixtures}; {checked} gathered correlation vectors, max error {worst_corr:.2e} (<= {tol:.0e}); tcp == channels: {transports_agree}"
        ),
    )
}

fn scaling(cal: &Value) -> Outcome {
    let c = &cal["bench"];
    let start = Instant::now();
    let inst = gen_sparse_instance(int(c, "n"), int(c, "m"), int(c, "sparsity"), num(c, "noise"), c["seed"].as_u64().unwrap()).unwrap();
    let iters = int(c, "iterations");
    let mut rows = Vec::new();
    for budget in c["budgets"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize) {
        let t = Instant::now();
        iter_cosamp(&inst.design, &PursuitConfig::new(budget, iters)).unwrap();
        let gtp = t.elapsed().as_secs_f64();
        let t = Instant::now();
        omp_select(&inst.design, budget, gtp::nnls::DEFAULT_TOL, None).unwrap();
        let omp = t.elapsed().as_secs_f64();
        rows.push((budget, gtp, omp, gtp / omp));
    }
    let secs = start.elapsed().as_secs_f64();
    let faster = rows.iter().filter(|r| r.0 >= 500).all(|r| r.1 < r.2);
    let decreasing = rows.windows(2).all(|w| w[1].3 < w[0].3);
    let table: Vec<String> = rows.iter().map(|r| format!("M={} {:.2}s/{:.2}s={:.3}", r.0, r.1, r.2, r.3)).collect();
    outcome(
        "GTP vs OMP scaling",
        faster && decreasing && secs < num(c, "max_seconds"),
        format!(
            "gtp/omp {}; faster for M >= 500: {faster}; ratio decreasing: {decreasing}; {secs:.0}s (< {}s)",
            table.join(", "),
            num(c, "max_seconds")
        ),
    )
}

fn nnls(cal: &Value) -> Outcome {
    let c = &cal["nnls"];
    let mut rng = gtp::rng::SeededRng::new(2024);
    let kkt_tol = num(c, "kkt_tol");
    let (mut kkt_fail, mut worse_than_ref, mut worst_kkt) = (0, 0, 0.0f64);
    let instances = int(c, "kkt_instances");
    for i in 0..instances {
        let m = 2 + rng.index(30);
        let k = 1 + rng.index(40);
        let a = gaussian(m, k, 10_000 + i as u64);
        let b: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let fit = solve_nnls_default(&a, &b).unwrap();
        let kkt = kkt_residual(&a, &b, &fit.weights);
        worst_kkt = worst_kkt.max(kkt);
        kkt_fail += usize::from(kkt > kkt_tol || !fit.converged);
        let pg = nnls_projected_gradient(&a, &b, 4000).1;
        let bn = DVector::from_column_slice(&b).norm();
        worse_than_ref += usize::from(fit.residual_norm > pg + 1e-8 * bn);
    }

    let closed_tol = num(c, "closed_form_tol");
    let mut worst_closed = 0.0f64;
    for i in 0..100u64 {
        let m = 3 + (i % 20) as usize;
        let k = 1 + (i % m as u64) as usize;
        let q = gaussian(m, k, 20_000 + i).qr().q();
        let b = gaussian(m, 1, 30_000 + i);
        let fit = solve_nnls_default(&q, b.as_slice()).unwrap();
        let expect = (q.transpose() * &b).map(|v| v.max(0.0));
        worst_closed = worst_closed.max(fit.weights.iter().zip(expect.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }

    let dup_instances = int(c, "duplicate_instances");
    let (mut dup_ok, mut dup_res_err) = (0, 0.0f64);
    for i in 0..dup_instances as u64 {
        let m = 6 + (i % 10) as usize;
        let base_k = 2 + (i % 5) as usize;
        let base = gaussian(m, base_k, 40_000 + i);
        let mut rng = gtp::rng::SeededRng::new(50_000 + i);
        // each base column appears 1-3 times at shuffled positions
        let mut owner: Vec<usize> = (0..base_k).flat_map(|j| std::iter::repeat_n(j, 1 + rng.index(3))).collect();
        let perm = rng.permutation(owner.len());
        owner = perm.iter().map(|&p| owner[p]).collect();
        let a = DMatrix::from_fn(m, owner.len(), |r, c| base[(r, owner[c])]);
        let b: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let fit = solve_nnls_default(&a, &b).unwrap();
        let reference = nnls_enumerate(&base, &b).1;
        dup_res_err = dup_res_err.max((fit.residual_norm - reference).abs());
        let single = (0..base_k).all(|j| (0..owner.len()).filter(|&c| owner[c] == j && fit.weights[c] > 0.0).count() <= 1);
        dup_ok += usize::from(single && (fit.residual_norm - reference).abs() <= 1e-9 * (1.0 + reference));
    }

    let pass = kkt_fail == 0 && worse_than_ref == 0 && worst_closed <= closed_tol && dup_ok == dup_instances;
    outcome(
        "NNLS correctness",
        pass,
        format!(
            "KKT holds on {}/{instances} (worst {worst_kkt:.1e}, tol {kkt_tol:.0e}), {worse_than_ref} above projected gradient; orthonormal closed form max error {worst_closed:.1e}; duplicates suppressed on {dup_ok}/{dup_instances} (residual error {dup_res_err:.1e})",
            instances - kkt_fail
        ),
    )
}

fn subspace(cal: &Value) -> Outcome {
    let c = &cal["subspace"];
    let (orth_tol, var_tol) = (num(c, "orthonormality_tol"), num(c, "variance_rel_tol"));
    let mut rng = gtp::rng::SeededRng::new(77);
    let (mut worst_orth, mut worst_var, mut pca_below_rp) = (0.0f64, 0.0f64, 0);
    let trials = int(c, "oracle_matrices");
    for i in 0..trials as u64 {
        let n = 5 + rng.index(50);
        let d = 3 + rng.index(40);
        let x = if i % 3 == 0 {
            // rank-deficient
            let r = 1 + rng.index(n.min(d));
            gaussian(n, r, 60_000 + i) * gaussian(r, d, 70_000 + i)
        } else {
            gaussian(n, d, 60_000 + i)
        };
        let d_s = 1 + rng.index(n.min(d));
        let pca = fit_subspace(&x, d_s, SubspaceMethod::PcaUncentered, i).unwrap();
        let rp = fit_subspace(&x, d_s, SubspaceMethod::RandomProjection, i).unwrap();
        let centered = fit_subspace(&x, d_s, SubspaceMethod::PcaCentered, i).unwrap();
        for u in [&pca.basis, &rp.basis, &centered.basis] {
            worst_orth = worst_orth.max(orthonormality_error(u));
        }
        let mut eig: Vec<f64> = (x.transpose() * &x).symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let oracle: f64 = eig[..d_s].iter().sum();
        let captured = (&x * &pca.basis).norm_squared();
        worst_var = worst_var.max((captured - oracle).abs() / oracle.max(f64::MIN_POSITIVE));
        // equal up to rounding when d_s reaches the rank
        pca_below_rp += usize::from(captured < (&x * &rp.basis).norm_squared() - 1e-12 * x.norm_squared());
    }
    let synth = gen_synthetic_trajectory(120, 6, 300, 5, 8).unwrap();
    for method in [SubspaceMethod::PcaUncentered, SubspaceMethod::PcaCentered, SubspaceMethod::RandomProjection] {
        let basis = fit_evolving_subspace(&synth.target, 10, method, 3, 2).unwrap();
        worst_orth = worst_orth.max(basis.orthonormality_error());
    }
    let pass = worst_orth <= orth_tol && worst_var <= var_tol && pca_below_rp == 0;
    outcome(
        "subspace correctness",
        pass,
        format!(
            "max orthonormality error {worst_orth:.1e} (<= {orth_tol:.0e}); captured variance vs eigen oracle max rel error {worst_var:.1e} on {trials} matrices (<= {var_tol:.0e}); PCA below random projection on {pca_below_rp}"
        ),
    )
}

fn main() -> ExitCode {
    let cal: Value = serde_json::from_str(include_str!("../calibration.json")).expect("calibration.json parses");
    let mut refine = Refinement::default();
    let mut results = Vec::new();
    let mut run = |f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!("{} {}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail, start.elapsed().as_secs_f64());
        results.push(o);
    };
    run(&mut || recovery(&cal, &mut refine));
    run(&mut || oracle(&cal, &mut refine));
    run(&mut || dedup(&cal, &mut refine));
    run(&mut || refinement(&cal, &refine));
    run(&mut || distributed(&cal));
    run(&mut || scaling(&cal));
    run(&mut || nnls(&cal));
    run(&mut || subspace(&cal));

    let known: Vec<&str> = cal["known_failures"]
        .as_array()
        .map(|v| v.iter().filter_map(|e| e["criterion"].as_str()).collect())
        .unwrap_or_default();
    let failed: Vec<&Outcome> = results.iter().filter(|o| !o.pass).collect();
    let unexpected: Vec<&str> = failed.iter().map(|o| o.name).filter(|n| !known.contains(n)).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    for name in known.iter().filter(|n| results.iter().any(|o| o.name == **n && o.pass)) {
        println!("note: {name} is listed as a known failure but passed");
    }
    if unexpected.is_empty() {
        for o in &failed {
            println!("known failure: {}", o.name);
        }
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
