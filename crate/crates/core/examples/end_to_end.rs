//! The whole pipeline on synthetic gradients: trajectories on disk, fitted
//! subspaces, the design system, then selection by pursuit, top-k and random.

use gtp::design::{assemble_design, read_design, write_design};
use gtp::pursuit::{iter_cosamp, random_select, top_k_select, PursuitConfig};
use gtp::report::{residual_csv, residual_svg, write_atomic, write_json, SelectionReport};
use gtp::subspace::{fit_evolving_subspace, SubspaceMethod};
use gtp::synth::gen_synthetic_trajectory;
use gtp::trajectory::{read_trajectory, write_trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name);

    let synth = gen_synthetic_trajectory(800, 5, 96, 10, 2)?;
    write_trajectory(&synth.train, p("train.gtpt"))?;
    write_trajectory(&synth.target, p("target.gtpt"))?;

    let train = read_trajectory(p("train.gtpt"))?;
    let target = read_trajectory(p("target.gtpt"))?;
    let basis = fit_evolving_subspace(&target, 8, SubspaceMethod::PcaUncentered, 0, 2)?;
    write_design(&assemble_design(&train, &target, &basis)?, p("design.gtpd"))?;
    let design = read_design(p("design.gtpd"))?;
    println!("design {} x {}, target clusters {:?}", design.n_rows(), design.n_columns(), synth.target_clusters);

    let budget = 40;
    let gtp = iter_cosamp(&design, &PursuitConfig::new(budget, 10))?;
    let topk = top_k_select(&design, budget)?;
    let random = random_select(&design, budget, 0)?;
    for sel in [&gtp, &topk, &random] {
        let on_target = sel.indices.iter().filter(|&&i| synth.target_clusters.contains(&synth.train_clusters[i])).count();
        println!("{:>7}: residual {:.4e}, {on_target}/{budget} from target clusters", sel.algorithm.name(), sel.final_residual());
    }

    write_json(p("selection.json"), &SelectionReport::new("example", serde_json::json!({ "budget": budget }), vec![], gtp.clone()))?;
    write_atomic(p("selection.csv"), residual_csv(&gtp.residual_history).as_bytes())?;
    write_atomic(p("residual.svg"), residual_svg("residual", &[("gtp", &gtp.residual_history)]).as_bytes())?;
    println!("first selected ids: {:?}", &gtp.sample_ids[..5]);
    Ok(())
}
