//! Recovers a planted sparse non-negative solution and prints the residual
//! at every pursuit iteration.

use gtp::pursuit::{iter_cosamp, top_k_select, PursuitConfig};
use gtp::synth::gen_sparse_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = gen_sparse_instance(2048, 256, 16, 0.0, 4)?;
    let sel = iter_cosamp(&inst.design, &PursuitConfig::new(16, 10))?;

    for (k, r) in sel.residual_history.iter().enumerate() {
        println!("iteration {k:>2}: residual {r:.3e}");
    }
    let exact = sel.indices == inst.support();
    let err = sel.weights.iter().zip(inst.support_weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("support recovered: {exact}, max weight error {err:.1e}");
    println!("top-k residual for comparison: {:.3e}", top_k_select(&inst.design, 16)?.final_residual());
    if !sel.flags.is_empty() {
        println!("flags: {:?}", sel.flags);
    }
    Ok(())
}
