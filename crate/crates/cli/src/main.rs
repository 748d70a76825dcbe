//! `fieldmap`: simulate scenes, match seeds, run SLAM and reconstruction,
//! and score the results.

mod commands;
mod failure;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fieldmap::association::CostVariant;
use fieldmap::icp::IcpMode;

#[derive(Debug, Parser)]
#[command(name = "fieldmap", version, about = "Seed-landmark SLAM and panicle reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by every command that matches seeds.
#[derive(Debug, Clone, Args)]
pub struct MatchFlags {
    /// Run configuration (TOML); embedded defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// How constellation ratios enter the cost: literal or deviation.
    #[arg(long)]
    pub cost_variant: Option<CostVariant>,
    /// Confidence threshold on the association cost.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene directory.
    Simulate {
        /// Scene configuration (TOML); the default range scene otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Associate seeds within stereo pairs and across consecutive frames.
    Match {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: MatchFlags,
    },
    /// Incremental stereo SLAM over a range scene.
    Slam {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: MatchFlags,
    },
    /// Chained ICP over an orbit scene and fusion into one model.
    Reconstruct {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Registration mode: full-cloud or seed-centers.
        #[arg(long)]
        icp: Option<IcpMode>,
        #[command(flatten)]
        flags: MatchFlags,
    },
    /// Score scenes against their ground truth, optionally with a batch of
    /// freshly generated orbit trials.
    Eval {
        scenes: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of paired ICP trials on generated orbit scenes.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        /// Master seed the trial scenes are drawn from.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write `report.csv`.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        flags: MatchFlags,
    },
    /// Print the published mapping tables and their averages.
    Table1 {
        /// Table data (TOML); the bundled transcription otherwise.
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write CSV copies and `metrics.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("FIELDMAP_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(config.as_deref(), &out, seed),
        Command::Match { scene, out, flags } => commands::match_scene(&scene, &out, &flags),
        Command::Slam { scene, out, flags } => commands::slam(&scene, &out, &flags),
        Command::Reconstruct { scene, out, icp, flags } => commands::reconstruct(&scene, &out, icp, &flags),
        Command::Eval {
            scenes,
            out,
            trials,
            seed,
            csv,
            flags,
        } => commands::eval(&scenes, &out, trials, seed, csv, &flags),
        Command::Table1 { data, config, out } => commands::table1(data.or(config).as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fieldmap: {f}");
            ExitCode::from(f.code())
        }
    }
}
