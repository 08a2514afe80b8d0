//! Splits a 10-checkpoint design across machines and runs the distributed
//! pursuit over in-process channels.

use gtp::dist::{partition_design, run_in_process, Aggregation, DistOptions};
use gtp::pursuit::{iter_cosamp, PursuitConfig};
use gtp::subspace::{fit_evolving_subspace, SubspaceMethod};
use gtp::synth::gen_synthetic_trajectory;
use gtp::design::assemble_design;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = gen_synthetic_trajectory(600, 10, 64, 8, 21)?;
    let basis = fit_evolving_subspace(&synth.target, 6, SubspaceMethod::PcaUncentered, 0, 1)?;
    let design = assemble_design(&synth.train, &synth.target, &basis)?;
    let cfg = PursuitConfig::new(30, 8);

    let single = iter_cosamp(&design, &cfg)?;
    println!("single machine: residual {:.4e}", single.final_residual());

    for machines in [1, 2, 5] {
        let shards = partition_design(&design, machines)?;
        let ranges: Vec<_> = shards.iter().map(|s| s.assignment.timestep_range.clone()).collect();
        for aggregation in [Aggregation::Sum, Aggregation::Mean] {
            let opts = DistOptions { aggregation, ..DistOptions::default() };
            let out = run_in_process(&shards, &cfg, &opts, None)?;
            let shared = out.selection.indices.iter().filter(|i| single.indices.contains(i)).count();
            println!(
                "{machines} machines {ranges:?} {aggregation:?}: residual {:.4e}, {shared}/{} indices shared",
                out.selection.final_residual(),
                single.indices.len()
            );
        }
    }
    Ok(())
}
