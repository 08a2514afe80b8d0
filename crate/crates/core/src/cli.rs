//! Command-line interface. `gtp --help` lists the subcommands.
//!
//! Exit codes: 0 on success, 2 for invalid flags or inputs, 3 when a run
//! fails after its inputs were accepted.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::bench::{bench_gtp_vs_omp, format_bench_table, oracle_comparison};
use crate::design::{assemble_design_with, read_design, write_design, AssembleOptions, DesignSystem};
use crate::dist::{
    partition_design, read_shard, run_coordinator, run_in_process, run_worker, write_shard, Aggregation,
    DistOptions,
};
use crate::error::{Error, Result};
use crate::nnls::DEFAULT_TOL;
use crate::pursuit::{
    iter_cosamp, omp_select, random_select, top_k_select, Algorithm, CorrelationMode, PursuitConfig, Selection,
};
use crate::report::{digest_file, residual_csv, residual_svg, write_atomic, write_json, InputDigest, SelectionReport};
use crate::subspace::{fit_evolving_subspace, read_basis, write_basis, SubspaceMethod};
use crate::synth::{gen_duplicated_instance, gen_sparse_instance, gen_synthetic_trajectory, PlantedInstance};
use crate::trajectory::{read_trajectory, write_trajectory};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gtp", version, about = "Gradient trajectory pursuit: de-duplicating training-data selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic designs or trajectories.
    Synth(SynthArgs),
    /// Fit one subspace basis per checkpoint from target gradients.
    FitSubspace(FitSubspaceArgs),
    /// Project train and target gradients into a design system (A, b).
    Assemble(AssembleArgs),
    /// Select a weighted subset of columns.
    Select(SelectArgs),
    /// Compare GTP, top-k and OMP against the exhaustive optimum.
    Oracle(OracleArgs),
    /// Time GTP against OMP across budgets.
    Bench(BenchArgs),
    /// Split a design into per-machine shard files.
    Partition(PartitionArgs),
    /// Serve one shard to a distributed coordinator.
    Worker(WorkerArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Unit-norm Gaussian design with a planted sparse non-negative solution.
    Sparse {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        sparsity: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the planted weights as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Gaussian design with groups of exactly duplicated columns.
    Duplicated {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        groups: usize,
        #[arg(long)]
        copies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train and target gradient trajectories around drifting cluster centres.
    Trajectory {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        target_out: PathBuf,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct FitSubspaceArgs {
    /// Target trajectory file.
    #[arg(long)]
    pub target: PathBuf,
    /// Subspace dimension d_s.
    #[arg(long)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = SubspaceMethod::PcaUncentered)]
    pub method: SubspaceMethod,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threads used across checkpoints.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AssembleArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Defaults to the training trajectory (in-domain selection).
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub basis: PathBuf,
    /// Rescale columns of A to unit norm.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, value_enum, default_value_t = Algorithm::Gtp)]
    pub alg: Algorithm,
    /// Number of columns to select (M).
    #[arg(long)]
    pub budget: usize,
    /// Pursuit iterations (K).
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = CorrelationMode::Residual)]
    pub mode: CorrelationMode,
    /// Accept a pruned support only when it lowers the residual.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub monotone: bool,
    #[arg(long)]
    pub early_exit: bool,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub nnls_tol: f64,
    #[arg(long)]
    pub nnls_max_iter: Option<usize>,
    /// In-process machines for gtp_dist.
    #[arg(long)]
    pub machines: Option<usize>,
    /// Worker addresses for gtp_dist, in machine order.
    #[arg(long, value_delimiter = ',')]
    pub endpoints: Vec<String>,
    #[arg(long, value_enum, default_value_t = Aggregation::Sum)]
    pub aggregation: Aggregation,
    /// Seconds to wait for any worker response.
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Selection report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Residual history CSV; defaults to the report path with a .csv extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Residual plot (SVG).
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Design to benchmark on; without it a planted instance is generated.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long, default_value_t = 20000)]
    pub n: usize,
    #[arg(long, default_value_t = 512)]
    pub m: usize,
    #[arg(long, default_value_t = 32)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 1000, 2000])]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    /// Bench table (JSON); the text table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PartitionArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub machines: usize,
    /// Directory for shard-<i>.bin files.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WorkerArgs {
    /// Address to listen on, e.g. 127.0.0.1:7101.
    #[arg(long)]
    pub listen: String,
    #[arg(long)]
    pub shard: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn input(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Config(format!("input file not found: {}", path.display())))
    }
}

fn echo<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn digests(paths: &[&Path]) -> Result<Vec<InputDigest>> {
    paths.iter().map(|p| digest_file(p).map_err(io_err(p))).collect()
}

#[derive(Serialize)]
struct Truth<'a> {
    support: Vec<usize>,
    weights: Vec<f64>,
    noise_level: f64,
    groups: &'a [Vec<usize>],
}

fn write_planted(inst: &PlantedInstance, out: &Path, truth: Option<&Path>) -> Result<()> {
    write_design(&inst.design, out)?;
    if let Some(t) = truth {
        let body = Truth {
            support: inst.support(),
            weights: inst.support_weights(),
            noise_level: inst.noise_level,
            groups: &inst.groups,
        };
        write_json(t, &body).map_err(io_err(t))?;
    }
    println!("wrote {} ({} x {})", out.display(), inst.design.n_rows(), inst.design.n_columns());
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    match &args.kind {
        SynthKind::Sparse { n, m, sparsity, noise, seed, out, truth } => {
            write_planted(&gen_sparse_instance(*n, *m, *sparsity, *noise, *seed)?, out, truth.as_deref())
        }
        SynthKind::Duplicated { n, m, groups, copies, seed, out, truth } => {
            write_planted(&gen_duplicated_instance(*n, *m, *groups, *copies, *seed)?, out, truth.as_deref())
        }
        SynthKind::Trajectory { n, t, d, clusters, seed, train_out, target_out } => {
            let s = gen_synthetic_trajectory(*n, *t, *d, *clusters, *seed)?;
            write_trajectory(&s.train, train_out)?;
            write_trajectory(&s.target, target_out)?;
            println!("wrote {} and {}", train_out.display(), target_out.display());
            Ok(())
        }
    }
}

pub fn cmd_fit_subspace(args: &FitSubspaceArgs) -> Result<()> {
    let target = read_trajectory(input(&args.target)?)?;
    let basis = fit_evolving_subspace(&target, args.dim, args.method, args.seed, args.workers.max(1))?;
    for (t, deficient) in basis.rank_deficient.iter().enumerate() {
        if *deficient {
            log::warn!("checkpoint {t}: target gradients span fewer than {} directions", args.dim);
        }
    }
    write_basis(&basis, &args.out)?;
    println!(
        "wrote {} ({} checkpoints, {} -> {} dims, orthonormality error {:.2e})",
        args.out.display(),
        basis.n_timesteps(),
        basis.grad_dim,
        basis.subspace_dim,
        basis.orthonormality_error()
    );
    Ok(())
}

pub fn cmd_assemble(args: &AssembleArgs) -> Result<()> {
    let train = read_trajectory(input(&args.train)?)?;
    let target = match &args.target {
        Some(p) => read_trajectory(input(p)?)?,
        None => train.clone(),
    };
    let basis = read_basis(input(&args.basis)?)?;
    let design =
        assemble_design_with(&train, &target, &basis, AssembleOptions { normalize_columns: args.normalize })?;
    write_design(&design, &args.out)?;
    println!("wrote {} ({} x {})", args.out.display(), design.n_rows(), design.n_columns());
    Ok(())
}

fn pursuit_config(args: &SelectArgs) -> PursuitConfig {
    PursuitConfig {
        budget: args.budget,
        iterations: args.iters,
        correlation_mode: args.mode,
        nnls_tol: args.nnls_tol,
        nnls_max_iter: args.nnls_max_iter,
        seed: args.seed,
        early_exit: args.early_exit,
        monotone: args.monotone,
    }
}

fn check_select_flags(args: &SelectArgs) -> Result<()> {
    let dist = args.alg == Algorithm::GtpDist;
    if !dist && (args.machines.is_some() || !args.endpoints.is_empty()) {
        return Err(Error::Config("--machines and --endpoints only apply to --alg gtp_dist".into()));
    }
    if dist && args.machines.is_some() && !args.endpoints.is_empty() {
        return Err(Error::Config("give either --machines or --endpoints, not both".into()));
    }
    if args.budget == 0 || args.iters == 0 || args.machines == Some(0) {
        return Err(Error::Config("--budget, --iters and --machines must be positive".into()));
    }
    if !(args.nnls_tol > 0.0 && args.nnls_tol.is_finite()) {
        return Err(Error::Config("--nnls-tol must be positive".into()));
    }
    Ok(())
}

pub fn run_selection(args: &SelectArgs, design: &DesignSystem) -> Result<Selection> {
    let cfg = pursuit_config(args);
    Ok(match args.alg {
        Algorithm::Gtp => iter_cosamp(design, &cfg)?,
        Algorithm::TopK => top_k_select(design, args.budget)?,
        Algorithm::Omp => omp_select(design, args.budget, args.nnls_tol, args.nnls_max_iter)?,
        Algorithm::Random => random_select(design, args.budget, args.seed)?,
        Algorithm::GtpDist => {
            let opts = DistOptions { aggregation: args.aggregation, timeout: Duration::from_secs(args.timeout.max(1)) };
            if args.endpoints.is_empty() {
                let shards = partition_design(design, args.machines.unwrap_or(1))?;
                run_in_process(&shards, &cfg, &opts, None)?.selection
            } else {
                run_coordinator(&args.endpoints, &cfg, &opts)?.selection
            }
        }
    })
}

pub fn cmd_select(args: &SelectArgs) -> Result<()> {
    check_select_flags(args)?;
    let design = read_design(input(&args.design)?)?;
    let selection = run_selection(args, &design)?;
    info!("{}: residual {:.6e} -> {:.6e}", args.alg.name(), design_b_norm(&design), selection.final_residual());

    let csv_path = args.csv.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    write_atomic(&csv_path, residual_csv(&selection.residual_history).as_bytes()).map_err(io_err(&csv_path))?;
    if let Some(plot) = &args.plot {
        let title = format!("{} residual, M = {}", args.alg.name(), args.budget);
        let svg = residual_svg(&title, &[(args.alg.name(), &selection.residual_history)]);
        write_atomic(plot, svg.as_bytes()).map_err(io_err(plot))?;
    }
    let report = SelectionReport::new("select", echo(args), digests(&[&args.design])?, selection);
    write_json(&args.out, &report).map_err(io_err(&args.out))?;
    println!(
        "selected {} of {} columns, residual {:.6e}; wrote {}",
        report.selection.indices.len(),
        design.n_columns(),
        report.selection.final_residual(),
        args.out.display()
    );
    Ok(())
}

fn design_b_norm(d: &DesignSystem) -> f64 {
    crate::linalg::norm2(d.b())
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let design = read_design(input(&args.design)?)?;
    let cmp = oracle_comparison(&design, &PursuitConfig::new(args.budget, args.iters))?;
    let body = serde_json::json!({
        "command": "oracle",
        "config": echo(args),
        "inputs": digests(&[&args.design])?,
        "comparison": cmp,
    });
    write_json(&args.out, &body).map_err(io_err(&args.out))?;
    println!(
        "optimum {:.6e}; gtp {:.6e} (x{:.4}), topk {:.6e} (x{:.4}), omp {:.6e} (x{:.4})",
        cmp.optimum.residual,
        cmp.gtp_residual,
        cmp.gtp_ratio,
        cmp.topk_residual,
        cmp.topk_ratio,
        cmp.omp_residual,
        cmp.omp_ratio
    );
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let (design, inputs) = match &args.design {
        Some(p) => (read_design(input(p)?)?, digests(&[p])?),
        None => (gen_sparse_instance(args.n, args.m, args.sparsity, args.noise, args.seed)?.design, Vec::new()),
    };
    let rows = bench_gtp_vs_omp(&design, &args.budgets, args.iters)?;
    print!("{}", format_bench_table(&rows));
    if let Some(out) = &args.out {
        let body = serde_json::json!({ "command": "bench", "config": echo(args), "inputs": inputs, "rows": rows });
        write_json(out, &body).map_err(io_err(out))?;
    }
    Ok(())
}

pub fn cmd_partition(args: &PartitionArgs) -> Result<()> {
    let design = read_design(input(&args.design)?)?;
    let shards = partition_design(&design, args.machines)?;
    std::fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    for shard in &shards {
        let path = args.out_dir.join(format!("shard-{}.bin", shard.assignment.machine_id));
        write_shard(shard, &path)?;
        println!(
            "{}: timesteps {:?}, rows {:?}",
            path.display(),
            shard.assignment.timestep_range,
            shard.assignment.row_range
        );
    }
    Ok(())
}

pub fn cmd_worker(args: &WorkerArgs) -> Result<()> {
    let shard = read_shard(input(&args.shard)?)?;
    run_worker(args.listen.as_str(), shard)?;
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::FitSubspace(a) => cmd_fit_subspace(a),
        Command::Assemble(a) => cmd_assemble(a),
        Command::Select(a) => cmd_select(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Partition(a) => cmd_partition(a),
        Command::Worker(a) => cmd_worker(a),
    }
}

/// Parses `std::env::args`, runs the command and maps errors to exit codes.
/// Log verbosity follows `RUST_LOG` (default `warn`).
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}
