use std::time::Instant;
fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let s: usize = args[0].parse().unwrap();
    let noise: f64 = args[1].parse().unwrap();
    let budgets: Vec<usize> = args[2].split(',').map(|x| x.parse().unwrap()).collect();
    let inst = gtp::synth::gen_sparse_instance(20000, 512, s, noise, 7).unwrap();
    for m in budgets {
        let t = Instant::now();
        let g = gtp::pursuit::iter_cosamp(&inst.design, &gtp::pursuit::PursuitConfig::new(m, 5)).unwrap();
        let gt = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let o = gtp::pursuit::omp_select(&inst.design, m, 1e-10, None).unwrap();
        let ot = t.elapsed().as_secs_f64();
        println!("s={s} M={m} gtp {gt:.2}s res {:.2e} | omp {ot:.2}s res {:.2e} ratio {:.4}", g.final_residual(), o.final_residual(), gt/ot);
    }
}
