use std::time::Instant;
fn main() {
    let inst = gtp::synth::gen_sparse_instance(20000, 512, 32, 0.0, 7).unwrap();
    let m: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let t = Instant::now();
    let g = gtp::pursuit::iter_cosamp(&inst.design, &gtp::pursuit::PursuitConfig::new(m, 5)).unwrap();
    println!("{:?} {:?} {:?} {:?}", t.elapsed(), g.timings, g.residual_history, g.flags);
    // pool NNLS stats at iteration 1
    let p = inst.design.a().transpose() * nalgebra::DVector::from_column_slice(inst.design.b());
    let mut idx: Vec<usize> = (0..20000).collect();
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap());
    let mut pool = idx[..2*m].to_vec(); pool.sort();
    let t = Instant::now();
    let r = gtp::nnls::solve_nnls_subset(inst.design.a(), &pool, inst.design.b(), 1e-10, 6*m).unwrap();
    println!("pool nnls {:?} iters {} conv {} res {:e} nnz {}", t.elapsed(), r.iterations, r.converged, r.residual_norm, r.weights.iter().filter(|&&w| w>0.0).count());
}
