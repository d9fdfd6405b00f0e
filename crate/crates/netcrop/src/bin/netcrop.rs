//! Command-line front end: simulate networks and run the selection tasks.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netcrop::engine::blockmodel::{BlockmodelOptions, DcbmEstimator};
use netcrop::engine::latent_dim::LatentOptions;
use netcrop::engine::rdpg::RdpgOptions;
use netcrop::engine::rsc::RscOptions;
use netcrop::engine::{select_blockmodel, select_latent_dim, select_rdpg_dim, tune_rsc};
use netcrop::engine::{CvConfig, Loss, SelectionReport};
use netcrop::generators::{
    alpha_for_mean_degree, planted_partition_b, sample_blockmodel, sample_latent, sample_rdpg,
    BlockmodelSpec, LatentSpec, RdpgSpec,
};
use netcrop::{AdjacencyMatrix, NetcropError};

#[derive(Parser)]
#[command(name = "netcrop", version, about = "Network model selection by cross-validation on overlapping subnetwork partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic network and write it as an edge list.
    Simulate(SimulateArgs),
    /// Choose between SBM and DCBM candidates with K = 1..kmax.
    SelectBlockmodel(SelectBlockmodelArgs),
    /// Choose the embedding dimension of a dot-product graph.
    SelectRdpg(SelectRdpgArgs),
    /// Choose the dimension of a distance latent-space model.
    SelectLatent(SelectLatentArgs),
    /// Tune the regularizer of regularized spectral clustering.
    TuneRsc(TuneRscArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model family: sbm, dcbm, rdpg, or latent.
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    /// Community count (sbm/dcbm).
    #[arg(long)]
    k: Option<usize>,
    /// Latent dimension (rdpg/latent).
    #[arg(long)]
    d: Option<usize>,
    /// Within-community probability (sbm/dcbm) or intercept (latent).
    #[arg(long)]
    alpha: Option<f64>,
    /// Between/within probability ratio (sbm/dcbm).
    #[arg(long)]
    beta: Option<f64>,
    /// Target mean degree; solves for alpha when alpha is omitted (sbm/dcbm).
    #[arg(long)]
    mean_degree: Option<f64>,
    /// Maximum edge probability (rdpg).
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge-list destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth destination (labels or positions).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CommonSelectArgs {
    /// Edge-list file; '-' reads stdin.
    #[arg(long)]
    edges: String,
    /// Node count override (default: max id + 1).
    #[arg(long)]
    n: Option<usize>,
    /// Treat node ids in the input as 1-based.
    #[arg(long)]
    one_based: bool,
    /// Held-out pair fraction; ignored when --o/--s are given.
    #[arg(long)]
    ptest: Option<f64>,
    /// Overlap size (with --s overrides --ptest).
    #[arg(long)]
    o: Option<usize>,
    /// Number of non-overlap parts (with --o overrides --ptest).
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Loss: squared, deviance, or neg-auc.
    #[arg(long, default_value = "squared")]
    loss: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 keeps the library default.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Zero out wall-clock timings for byte-stable reports.
    #[arg(long)]
    redact_timings: bool,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectBlockmodelArgs {
    #[command(flatten)]
    common: CommonSelectArgs,
    #[arg(long, default_value_t = 6)]
    kmax: usize,
    /// DCBM estimator: poisson or eigen.
    #[arg(long, default_value = "poisson")]
    estimator: String,
}

#[derive(Args)]
struct SelectRdpgArgs {
    #[command(flatten)]
    common: CommonSelectArgs,
    #[arg(long, default_value_t = 8)]
    dmax: usize,
}

#[derive(Args)]
struct SelectLatentArgs {
    #[command(flatten)]
    common: CommonSelectArgs,
    #[arg(long, default_value_t = 4)]
    dmax: usize,
    /// Gradient-ascent iteration cap per fit.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

#[derive(Args)]
struct TuneRscArgs {
    #[command(flatten)]
    common: CommonSelectArgs,
    #[arg(long)]
    k: usize,
    /// Comma-separated regularizer grid.
    #[arg(long, default_value = "0,0.25,0.5,1,2,4")]
    tau_grid: String,
    /// Destination for the stitched labels at the tuned tau.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

fn exit_code_for(err: &NetcropError) -> u8 {
    match err {
        NetcropError::Parse { .. } | NetcropError::Range(_) | NetcropError::Io(_) => 3,
        NetcropError::Numerical(_)
        | NetcropError::Solver { .. }
        | NetcropError::Degenerate(_)
        | NetcropError::Internal(_) => 4,
        NetcropError::Domain(_) | NetcropError::Planning { .. } | NetcropError::Complexity { .. } => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::SelectBlockmodel(args) => run_select_blockmodel(args),
        Command::SelectRdpg(args) => run_select_rdpg(args),
        Command::SelectLatent(args) => run_select_latent(args),
        Command::TuneRsc(args) => run_tune_rsc(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("netcrop: error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, NetcropError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_edges(a: &AdjacencyMatrix, out: &mut dyn Write) -> io::Result<()> {
    for i in 0..a.n() {
        for &j in a.neighbors(i) {
            let j = j as usize;
            if i < j {
                writeln!(out, "{i} {j}")?;
            }
        }
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), NetcropError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let need = |opt: Option<f64>, name: &str| {
        opt.ok_or_else(|| NetcropError::Domain(format!("--{name} is required for this model")))
    };
    let mut out = open_out(&args.out)?;
    match args.model.as_str() {
        "sbm" | "dcbm" => {
            let degree_corrected = args.model == "dcbm";
            let k = args
                .k
                .ok_or_else(|| NetcropError::Domain("--k is required for this model".into()))?;
            let beta = need(args.beta, "beta")?;
            let alpha = match (args.alpha, args.mean_degree) {
                (Some(a), _) => a,
                (None, Some(target)) => {
                    let psi_mean = if degree_corrected { 4.0 / 3.0 } else { 1.0 };
                    alpha_for_mean_degree(args.n, k, beta, target, psi_mean)?
                }
                (None, None) => {
                    return Err(NetcropError::Domain(
                        "one of --alpha or --mean-degree is required".into(),
                    ))
                }
            };
            let b = planted_partition_b(k, alpha, beta)?;
            let spec = BlockmodelSpec::new(args.n, k, b, degree_corrected)?;
            let (a, labels, psi) = sample_blockmodel(&spec, None, &mut rng)?;
            write_edges(&a, &mut out)?;
            if let Some(path) = &args.truth {
                let mut t = BufWriter::new(File::create(path)?);
                for (g, p) in labels.iter().zip(&psi) {
                    writeln!(t, "{g} {p}")?;
                }
            }
            eprintln!(
                "simulated {} n={} K={k} alpha={alpha:.6} edges={}",
                args.model,
                args.n,
                a.edge_count()
            );
        }
        "rdpg" => {
            let d = args
                .d
                .ok_or_else(|| NetcropError::Domain("--d is required for this model".into()))?;
            let zeta = need(args.zeta, "zeta")?;
            let spec = RdpgSpec::new(args.n, d, zeta)?;
            let (a, x, _) = sample_rdpg(&spec, &mut rng)?;
            write_edges(&a, &mut out)?;
            if let Some(path) = &args.truth {
                let mut t = BufWriter::new(File::create(path)?);
                for i in 0..args.n {
                    let row: Vec<String> = (0..d).map(|c| x[(i, c)].to_string()).collect();
                    writeln!(t, "{}", row.join(" "))?;
                }
            }
            eprintln!("simulated rdpg n={} d={d} edges={}", args.n, a.edge_count());
        }
        "latent" => {
            let d = args
                .d
                .ok_or_else(|| NetcropError::Domain("--d is required for this model".into()))?;
            let alpha = need(args.alpha, "alpha")?;
            let spec = LatentSpec::new(args.n, d, alpha)?;
            let (a, z, _) = sample_latent(&spec, &mut rng)?;
            write_edges(&a, &mut out)?;
            if let Some(path) = &args.truth {
                let mut t = BufWriter::new(File::create(path)?);
                for i in 0..args.n {
                    let row: Vec<String> = (0..d).map(|c| z[(i, c)].to_string()).collect();
                    writeln!(t, "{}", row.join(" "))?;
                }
            }
            eprintln!("simulated latent n={} d={d} edges={}", args.n, a.edge_count());
        }
        other => {
            return Err(NetcropError::Domain(format!("unknown model {other:?}")));
        }
    }
    out.flush()?;
    Ok(())
}

fn load_graph(common: &CommonSelectArgs) -> Result<AdjacencyMatrix, NetcropError> {
    let reader: Box<dyn BufRead> = if common.edges == "-" {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(&common.edges)?))
    };
    AdjacencyMatrix::load_edge_list(reader, common.one_based, common.n)
}

fn build_config(common: &CommonSelectArgs, n: usize) -> Result<CvConfig, NetcropError> {
    let loss = Loss::parse(&common.loss)?;
    let reps = common.reps.max(1);
    let mut config = match (common.o, common.s) {
        (Some(o), Some(s)) => CvConfig::explicit(n, o, s, reps, loss, common.seed)?,
        (None, None) => {
            let p_test = common
                .ptest
                .unwrap_or(if n >= 1000 { 0.02 } else { 0.1 });
            CvConfig::from_p_test(n, p_test, reps, loss, common.seed)?
        }
        _ => {
            return Err(NetcropError::Domain(
                "--o and --s must be given together".into(),
            ))
        }
    };
    config.reps = reps;
    config.threads = common.threads;
    Ok(config)
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn emit_report(
    mut report: SelectionReport,
    common: &CommonSelectArgs,
) -> Result<(), NetcropError> {
    if common.redact_timings {
        report.timings_ms.redact();
    }
    for w in &report.warnings {
        eprintln!("netcrop: warning: {w}");
    }
    eprintln!("netcrop: winner: {}", report.final_winner);
    let mut out = open_out(&common.out)?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    Ok(())
}

fn run_select_blockmodel(args: SelectBlockmodelArgs) -> Result<(), NetcropError> {
    init_threads(args.common.threads);
    let a = load_graph(&args.common)?;
    let config = build_config(&args.common, a.n())?;
    eprintln!(
        "netcrop: n={} o={} s={} m={} reps={}",
        config.n, config.o, config.s, config.m, config.reps
    );
    let opts = BlockmodelOptions {
        k_max: args.kmax,
        estimator: DcbmEstimator::parse(&args.estimator)?,
        ..Default::default()
    };
    let report = select_blockmodel(&a, &config, &opts)?;
    emit_report(report, &args.common)
}

fn run_select_rdpg(args: SelectRdpgArgs) -> Result<(), NetcropError> {
    init_threads(args.common.threads);
    let a = load_graph(&args.common)?;
    let config = build_config(&args.common, a.n())?;
    eprintln!(
        "netcrop: n={} o={} s={} m={} reps={}",
        config.n, config.o, config.s, config.m, config.reps
    );
    let opts = RdpgOptions {
        d_max: args.dmax,
        ..Default::default()
    };
    let report = select_rdpg_dim(&a, &config, &opts)?;
    emit_report(report, &args.common)
}

fn run_select_latent(args: SelectLatentArgs) -> Result<(), NetcropError> {
    init_threads(args.common.threads);
    let a = load_graph(&args.common)?;
    let config = build_config(&args.common, a.n())?;
    eprintln!(
        "netcrop: n={} o={} s={} m={} reps={}",
        config.n, config.o, config.s, config.m, config.reps
    );
    let mut opts = LatentOptions {
        d_max: args.dmax,
        ..Default::default()
    };
    opts.settings.max_iters = args.max_iters;
    let report = select_latent_dim(&a, &config, &opts)?;
    emit_report(report, &args.common)
}

fn run_tune_rsc(args: TuneRscArgs) -> Result<(), NetcropError> {
    init_threads(args.common.threads);
    let a = load_graph(&args.common)?;
    let config = build_config(&args.common, a.n())?;
    eprintln!(
        "netcrop: n={} o={} s={} m={} reps={}",
        config.n, config.o, config.s, config.m, config.reps
    );
    let grid: Result<Vec<f64>, NetcropError> = args
        .tau_grid
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| NetcropError::Domain(format!("bad tau value {t:?}")))
        })
        .collect();
    let opts = RscOptions::new(args.k, grid?)?;
    let outcome = tune_rsc(&a, &config, &opts)?;
    if let Some(path) = &args.labels_out {
        let mut out = BufWriter::new(File::create(path)?);
        for l in &outcome.labels {
            writeln!(out, "{l}")?;
        }
        out.flush()?;
    }
    eprintln!("netcrop: tuned tau = {}", outcome.best_tau);
    emit_report(outcome.report, &args.common)
}
