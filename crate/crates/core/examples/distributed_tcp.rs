//! Workers on loopback TCP sockets, each serving one shard, and a
//! coordinator driving them. The result matches the in-process run.

use std::net::TcpListener;
use std::thread;

use gtp::dist::{
    partition_design, run_coordinator, run_in_process, same_selection_ignoring_timings, serve_worker, DistOptions,
};
use gtp::pursuit::PursuitConfig;
use gtp::synth::gen_sparse_instance;
use gtp::design::DesignSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = gen_sparse_instance(1500, 60, 12, 0.05, 9)?;
    // view the 60 rows as 5 checkpoints of dimension 12
    let d = &inst.design;
    let design = DesignSystem::new(d.a().clone(), d.b().to_vec(), d.column_ids().to_vec(), 5, 12)?;
    let shards = partition_design(&design, 3)?;
    let cfg = PursuitConfig::new(12, 6);
    let opts = DistOptions::default();

    let mut endpoints = Vec::new();
    let mut workers = Vec::new();
    for shard in shards.iter().cloned() {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        endpoints.push(listener.local_addr()?);
        workers.push(thread::spawn(move || serve_worker(listener, shard)));
    }
    println!("workers listening on {endpoints:?}");
    let tcp = run_coordinator(&endpoints, &cfg, &opts)?;
    for w in workers {
        w.join().expect("worker thread")?;
    }

    let local = run_in_process(&shards, &cfg, &opts, None)?;
    println!("tcp residual {:.6e}, indices {:?}", tcp.selection.final_residual(), tcp.selection.indices);
    println!("identical to in-process run: {}", same_selection_ignoring_timings(&tcp.selection, &local.selection));
    println!("phase timings: {:?}", tcp.selection.timings);
    Ok(())
}
