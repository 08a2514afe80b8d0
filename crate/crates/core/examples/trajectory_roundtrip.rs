//! Writes a synthetic gradient trajectory to disk, reads it back and checks
//! that nothing changed.

use gtp::synth::gen_synthetic_trajectory;
use gtp::trajectory::{read_trajectory, sidecar_path, validate, write_trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = gen_synthetic_trajectory(64, 3, 32, 4, 11)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("train.gtpt");

    write_trajectory(&synth.train, &path)?;
    let back = read_trajectory(&path)?;
    assert_eq!(back, synth.train);
    assert!(validate(&back).is_empty());

    let m = &back.manifest;
    println!("{} samples x {} checkpoints x {} dims ({:?})", m.n_samples, m.n_timesteps, m.grad_dim, m.role);
    println!("first ids: {:?}", &m.sample_ids[..3]);
    println!("checkpoints: {:?}", m.checkpoint_tags);
    println!("file {} bytes, manifest sidecar at {}", std::fs::metadata(&path)?.len(), sidecar_path(&path).display());
    Ok(())
}
