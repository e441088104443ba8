use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lagflow::commands::{execute, manifest_path, Command, Invocation};

#[derive(Parser)]
#[command(name = "lagflow", version, about = "Lagrangian mean curvature flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve a potential and monitor the preserved quantities.
    Flow(Common),
    /// Run a randomized inequality campaign.
    Verify(Common),
    /// Solve for the invariant cone slope and test its invariance.
    Cone(Common),
    /// Export a booster profile.
    Booster(Common),
    /// Flow homogeneous data towards a self-similar expander.
    Expander(Common),
    /// Regularize sampled initial data.
    Regularize(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Flow(c) => (Command::Flow, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Cone(c) => (Command::Cone, c),
        Sub::Booster(c) => (Command::Booster, c),
        Sub::Expander(c) => (Command::Expander, c),
        Sub::Regularize(c) => (Command::Regularize, c),
    };
    if let Some(threads) = std::env::var("LAGFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let outcome = execute(&Invocation {
        command,
        config: common.config,
        out_dir: common.out.clone(),
        seed: common.seed,
    });
    let failed = outcome.status.code() != 0;
    for line in &outcome.lines {
        if failed {
            eprintln!("{line}");
        } else if !common.quiet {
            println!("{line}");
        }
    }
    if !common.quiet {
        if outcome.manifest.is_some() {
            println!("manifest: {}", manifest_path(&common.out).display());
        }
    }
    ExitCode::from(outcome.status.code() as u8)
}
