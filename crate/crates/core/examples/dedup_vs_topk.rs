//! Groups of identical columns: top-k picks several copies of the same
//! column, pursuit keeps one per group.

use gtp::pursuit::{iter_cosamp, top_k_select, PursuitConfig};
use gtp::synth::gen_duplicated_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = gen_duplicated_instance(400, 64, 3, 5, 500)?;
    let gtp = iter_cosamp(&inst.design, &PursuitConfig::new(3, 10))?;
    let topk = top_k_select(&inst.design, 3)?;

    for (g, members) in inst.groups.iter().enumerate() {
        let count = |idx: &[usize]| idx.iter().filter(|i| members.contains(i)).count();
        println!("group {g} {members:?}: gtp picks {}, top-k picks {}", count(&gtp.indices), count(&topk.indices));
    }
    println!("gtp   {:?} weights {:.3?} residual {:.4}", gtp.indices, gtp.weights, gtp.final_residual());
    println!("top-k {:?} weights {:.3?} residual {:.4}", topk.indices, topk.weights, topk.final_residual());
    Ok(())
}
