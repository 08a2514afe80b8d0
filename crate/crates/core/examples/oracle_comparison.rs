//! Small noisy instances where every 3-column support can be scored, so the
//! heuristics can be compared with the true best subset.

use gtp::bench::oracle_comparison;
use gtp::pursuit::PursuitConfig;
use gtp::synth::gen_sparse_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PursuitConfig::new(3, 10);
    let (mut exact, mut worst, mut topk_worse) = (0, 1.0f64, 0);
    let trials = 40;
    for seed in 0..trials {
        let inst = gen_sparse_instance(12, 8, 3, 0.3, 1000 + seed)?;
        let c = oracle_comparison(&inst.design, &cfg)?;
        if seed < 5 {
            println!(
                "seed {seed}: best {:?} {:.4} | gtp {:?} x{:.3} | top-k x{:.3} | omp x{:.3}",
                c.optimum.indices, c.optimum.residual, c.gtp_indices, c.gtp_ratio, c.topk_ratio, c.omp_ratio
            );
        }
        exact += usize::from(c.gtp_ratio <= 1.0 + 1e-9);
        worst = worst.max(c.gtp_ratio);
        topk_worse += usize::from(c.gtp_residual > c.topk_residual);
    }
    println!("{trials} instances: gtp optimal on {exact}, worst ratio {worst:.3}, worse than top-k on {topk_worse}");
    Ok(())
}
