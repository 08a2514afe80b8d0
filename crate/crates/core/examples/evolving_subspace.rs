//! Fits one basis per checkpoint and compares how much target-gradient
//! energy PCA and a random projection keep.

use gtp::subspace::{block_to_matrix, captured_variance, fit_evolving_subspace, SubspaceMethod};
use gtp::synth::gen_synthetic_trajectory;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = gen_synthetic_trajectory(400, 4, 128, 6, 3)?;
    let target = &synth.target;
    let d_s = 8;

    let pca = fit_evolving_subspace(target, d_s, SubspaceMethod::PcaUncentered, 0, 2)?;
    let rp = fit_evolving_subspace(target, d_s, SubspaceMethod::RandomProjection, 0, 2)?;
    println!("orthonormality error: pca {:.1e}, random {:.1e}", pca.orthonormality_error(), rp.orthonormality_error());

    println!("{:>4} {:>10} {:>10} {:>10}", "t", "total", "pca", "random");
    for (t, block) in target.blocks.iter().enumerate() {
        let x = block_to_matrix(block);
        let total = x.norm_squared();
        let a = captured_variance(&x, &pca.bases[t]);
        let b = captured_variance(&x, &rp.bases[t]);
        println!("{t:>4} {total:>10.3} {a:>10.3} {b:>10.3}");
    }
    Ok(())
}
