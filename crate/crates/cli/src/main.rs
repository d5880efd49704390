use std::path::PathBuf;
use std::process::ExitCode;

use balance_cli::commands::{
    AnalyzeSpec, CalibrateSpec, LyapunovSpec, PeakDensitySpec, RmsEnsembleSpec, SimulateSpec, SpectrumSpec, StccSpec,
    SweepSpec, VelocityRatioSpec,
};
use balance_cli::serve::{run_serve, ServeSpec};
use balance_cli::{execute, resolve, CliError, Command, Format, Target};
use balance_core::analysis::Grouping;
use balance_core::trial::TrialMode;
use balance_core::ModelKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "balance", version, about = "Stick-balancing models, analyses and the tracking service")]
struct Cli {
    /// Worker threads for ensemble commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one model and write the requested channels.
    Simulate(Run<SimulateFlags>),
    /// Largest Lyapunov exponent at one gain.
    Lyapunov(Run<LyapunovFlags>),
    /// Seed-averaged exponent on a grid of gains.
    Sweep(Run<SweepFlags>),
    /// Find the gain whose exponent hits a target.
    Calibrate(Run<CalibrateFlags>),
    /// Welch spectrum of the balancing error and its two-regime slope fit.
    Spectrum(Run<SpectrumFlags>),
    /// Balancing-error RMS over many realizations.
    RmsEnsemble(Run<RmsFlags>),
    /// Density ratio of coupled to single error velocities.
    VelocityRatio(Run<VelocityFlags>),
    /// Short-time cross-correlation of tip and base velocity.
    Stcc(Run<StccFlags>),
    /// Density of first dominant STCC peaks over many realizations.
    PeakDensity(Run<PeakDensityFlags>),
    /// Run one tracking session over WebSocket.
    Serve(Run<ServeFlags>),
    /// Correlation time and RMS report of recorded trials.
    AnalyzeTrials(Run<AnalyzeFlags>),
}

#[derive(Args)]
struct Run<F: Args> {
    /// JSON spec or manifest merged under the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "BALANCE_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// File stem of the outputs.
    #[arg(long)]
    name: Option<String>,
    /// Exit 0 even if a run blew up.
    #[arg(long)]
    allow_divergence: bool,
    #[command(flatten)]
    flags: F,
}

#[derive(Args, Serialize)]
struct ModelFlags {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct LyapunovCfgFlags {
    /// s.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    renorm_every: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    /// headline | with_history
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    step_halving: Option<bool>,
}

#[derive(Args, Serialize)]
struct SimulateFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Comma-separated channel labels.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<String>>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    initial_error: Option<f64>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct LyapunovFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    lyapunov: LyapunovCfgFlags,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct SweepFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    /// lo,hi
    #[arg(long, value_delimiter = ',')]
    beta_range: Option<Vec<f64>>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    lyapunov: LyapunovCfgFlags,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct CalibrateFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    target: Option<f64>,
    /// lo,hi
    #[arg(long, value_delimiter = ',')]
    bracket: Option<Vec<f64>>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    lambda_tol: Option<f64>,
    #[arg(long)]
    width_tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    lyapunov: LyapunovCfgFlags,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct SpectrumFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    segment_len: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    /// lo,hi in Hz
    #[arg(long, value_delimiter = ',')]
    band: Option<Vec<f64>>,
    #[arg(long)]
    initial_error: Option<f64>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct RmsFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Realizations.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct VelocityFlags {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta_single: Option<f64>,
    #[arg(long)]
    beta_coupled: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    central: Option<f64>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct StccFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    max_lag: Option<f64>,
    #[arg(long)]
    symmetric: Option<bool>,
    #[arg(long)]
    hop: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    search: Option<Vec<f64>>,
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct PeakDensityFlags {
    #[arg(long)]
    kind: Option<ModelKind>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    hop: Option<f64>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    search: Option<Vec<f64>>,
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct ServeFlags {
    #[arg(long)]
    mode: Option<TrialMode>,
    #[arg(long)]
    code: Option<String>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_duration: Option<f64>,
    #[arg(long)]
    countdown: Option<u32>,
    #[arg(long)]
    initial_tip: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial_bases: Option<Vec<f64>>,
}

#[derive(Args, Serialize)]
struct AnalyzeFlags {
    /// Trial files or directories holding them.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    paths: Vec<PathBuf>,
    /// global | mode | subject | subject-mode
    #[arg(long)]
    grouping: Option<Grouping>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    hop: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    search: Option<Vec<f64>>,
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    format: Option<Format>,
}

fn compute<C: Command, F: Args + Serialize>(run: &Run<F>, jobs: usize) -> Result<(), CliError> {
    let spec: C = resolve(run.config.as_deref(), &run.flags)?;
    let target = Target { dir: run.out.clone(), name: run.name.clone(), allow_divergence: run.allow_divergence, jobs };
    let manifest = execute(&spec, &target)?;
    println!("{}", serde_json::to_string(&manifest.result).expect("results serialize"));
    Ok(())
}

fn serve(run: &Run<ServeFlags>) -> Result<(), CliError> {
    let spec: ServeSpec = resolve(run.config.as_deref(), &run.flags)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    rt.block_on(async {
        let interrupted = async {
            // SIGINT ends the session as if the subjects had aborted it
            let _ = tokio::signal::ctrl_c().await;
        };
        run_serve(&spec, &run.out, interrupted).await.map(|_| ())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let jobs = cli.jobs.unwrap_or_else(rayon::current_num_threads);
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("pool is built once");
    }
    let result = match &cli.command {
        Cmd::Simulate(r) => compute::<SimulateSpec, _>(r, jobs),
        Cmd::Lyapunov(r) => compute::<LyapunovSpec, _>(r, jobs),
        Cmd::Sweep(r) => compute::<SweepSpec, _>(r, jobs),
        Cmd::Calibrate(r) => compute::<CalibrateSpec, _>(r, jobs),
        Cmd::Spectrum(r) => compute::<SpectrumSpec, _>(r, jobs),
        Cmd::RmsEnsemble(r) => compute::<RmsEnsembleSpec, _>(r, jobs),
        Cmd::VelocityRatio(r) => compute::<VelocityRatioSpec, _>(r, jobs),
        Cmd::Stcc(r) => compute::<StccSpec, _>(r, jobs),
        Cmd::PeakDensity(r) => compute::<PeakDensitySpec, _>(r, jobs),
        Cmd::AnalyzeTrials(r) => compute::<AnalyzeSpec, _>(r, jobs),
        Cmd::Serve(r) => serve(r),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
