//! Wall-time of pursuit against orthogonal matching pursuit as the budget
//! grows. Pass `--full` for the 20000 x 512 benchmark (several minutes).

use gtp::bench::{bench_gtp_vs_omp, format_bench_table};
use gtp::synth::gen_sparse_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = std::env::args().any(|a| a == "--full");
    let (n, m, s, budgets): (usize, usize, usize, &[usize]) =
        if full { (20000, 512, 32, &[100, 500, 1000, 2000]) } else { (4000, 128, 8, &[25, 50, 100, 200]) };
    let inst = gen_sparse_instance(n, m, s, 0.0, 7)?;
    println!("N = {n}, m = {m}, planted sparsity {s}, K = 5");
    print!("{}", format_bench_table(&bench_gtp_vs_omp(&inst.design, budgets, 5)?));
    Ok(())
}
