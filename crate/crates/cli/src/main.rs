mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::Run;
use config::{ConfigFile, Context};
use report::{Outputs, Report};

#[derive(Parser)]
#[command(name = "disc-nls", version, about = "Radial defocusing NLS on the unit disc: spectral simulation and diagnostics")]
struct Cli {
    /// Master seed; every random draw is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for basis, tensor and trajectory caches.
    #[arg(long, global = true, env = "DISC_NLS_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Replace cache files that are corrupt or do not match.
    #[arg(long, global = true)]
    rebuild_cache: bool,
    /// JSON config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write the CSV table here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bessel eigenvalues, asymptotics, orthonormality and mode norms.
    Basis(commands::BasisFlags),
    /// Eigenfunction correlation integrals.
    Correlate(commands::CorrelateFlags),
    /// Resonance counts and base tensor norms.
    Count(commands::CountFlags),
    /// Integrate the truncated flow.
    Evolve(commands::EvolveFlags),
    /// Monte Carlo test of Gibbs measure invariance.
    GibbsInvariance(commands::GibbsFlags),
    /// Random resonant operator decomposition across cutoffs.
    Ansatz(commands::AnsatzFlags),
    /// Sobolev norms of truncated Gaussian free field samples.
    Norms(commands::NormsFlags),
    /// L^4 Strichartz ratios of the linear flow.
    Strichartz(commands::StrichartzFlags),
    /// Scaling regularities and the measured counting proxy.
    ScalingReport(commands::ScalingFlags),
}

const COMMANDS: &[&str] = &[
    "basis",
    "correlate",
    "count",
    "evolve",
    "gibbs-invariance",
    "ansatz",
    "norms",
    "strichartz",
    "scaling-report",
];

fn execute<P, F, R>(
    name: &str,
    file: &ConfigFile,
    ctx: &Context,
    out: &Outputs,
    flags: &F,
    run: impl FnOnce(&Context, &P) -> Result<Run<R>> + Send,
) -> Result<()>
where
    P: DeserializeOwned + Serialize + Sync,
    F: Serialize,
    R: Serialize + Send,
{
    let params: P = file.resolve(name, flags)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .context("building worker pool")?;
    let start = Instant::now();
    let done = pool.install(|| run(ctx, &params))?;
    let report = Report {
        tool: "disc-nls",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        seed: ctx.seed,
        config: &params,
        caches: &done.caches,
        result: &done.result,
    };
    out.emit(&report, &done.csv, start.elapsed())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    file.validate_keys(COMMANDS)?;
    let ctx = file.context(cli.seed, cli.workers, cli.cache_dir.clone(), cli.rebuild_cache)?;
    let out = Outputs {
        json: cli.json.clone(),
        csv: cli.csv.clone(),
    };
    match &cli.command {
        Command::Basis(f) => execute("basis", &file, &ctx, &out, f, commands::basis),
        Command::Correlate(f) => execute("correlate", &file, &ctx, &out, f, commands::correlate),
        Command::Count(f) => execute("count", &file, &ctx, &out, f, commands::count),
        Command::Evolve(f) => execute("evolve", &file, &ctx, &out, f, commands::evolve),
        Command::GibbsInvariance(f) => execute("gibbs-invariance", &file, &ctx, &out, f, commands::gibbs_invariance),
        Command::Ansatz(f) => execute("ansatz", &file, &ctx, &out, f, commands::ansatz),
        Command::Norms(f) => execute("norms", &file, &ctx, &out, f, commands::norms),
        Command::Strichartz(f) => execute("strichartz", &file, &ctx, &out, f, commands::strichartz),
        Command::ScalingReport(f) => execute("scaling-report", &file, &ctx, &out, f, commands::scaling_report),
    }
}
