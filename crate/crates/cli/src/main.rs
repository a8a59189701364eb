mod cmd;
mod config;
mod error;
mod out;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "beautykit", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ")"))]
#[command(about = "Makeup-layer curation, verification, rewards and benchmark metrics")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with defaults; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Use the built-in deterministic embedder.
    #[arg(long, global = true)]
    pub stub_provider: bool,
    /// Base URL of an embedding sidecar.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Directory of precomputed `.emb` files.
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    /// Side of the square alignment template in pixels.
    #[arg(long, global = true)]
    pub template_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Paint a random selection of library components onto the standard face.
    ComposeLayer(cmd::ComposeLayer),
    /// Residual layer between a made-up and a bare standard face.
    ExtractLayer(cmd::ExtractLayer),
    /// Warp a layer onto a portrait and composite it.
    ApplyLayer(cmd::ApplyLayer),
    /// Compose layers, apply them to every portrait and emit triplets.
    MakeTriplets(cmd::MakeTriplets),
    /// Makeup-exclusive layer of one portrait.
    Verify(cmd::Verify),
    /// Reward vectors and advantages for a group of generated samples.
    Reward(cmd::Reward),
    /// Group-standardized advantages of a list of rewards.
    Advantages(cmd::Advantages),
    /// Benchmark metrics for one or more method runs.
    Evaluate(cmd::Evaluate),
    /// Composition statistics of a benchmark manifest.
    BenchStats(cmd::BenchStats),
    /// Seeded source/reference pairs from a benchmark manifest.
    Pairs(cmd::Pairs),
    /// Sample the closed-form flow and report terminal statistics.
    FlowDemo(cmd::FlowDemo),
    /// Write synthetic portraits, a component library and manifests.
    SynthFixtures(cmd::SynthFixtures),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.global)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new("config", e.to_string()))?;
    }
    match cli.command {
        Command::ComposeLayer(a) => cmd::compose_layer(&cfg, a),
        Command::ExtractLayer(a) => cmd::extract_layer(&cfg, a),
        Command::ApplyLayer(a) => cmd::apply_layer(&cfg, a),
        Command::MakeTriplets(a) => cmd::make_triplets(&cfg, a),
        Command::Verify(a) => cmd::verify(&cfg, a),
        Command::Reward(a) => cmd::reward(&cfg, a),
        Command::Advantages(a) => cmd::advantages(&cfg, a),
        Command::Evaluate(a) => cmd::evaluate(&cfg, a),
        Command::BenchStats(a) => cmd::bench_stats(&cfg, a),
        Command::Pairs(a) => cmd::pairs(&cfg, a),
        Command::FlowDemo(a) => cmd::flow_demo(&cfg, a),
        Command::SynthFixtures(a) => cmd::synth_fixtures(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
