use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geoembed::pipeline::{cmd_build, cmd_eval, cmd_select, cmd_sweep, cmd_synth, cmd_train, PipelineConfig};

#[derive(Parser)]
#[command(name = "geoembed", version, about = "Location embeddings from geotagged tags and structured data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// key=value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for all artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build the location x tag association matrix.
    Build(Common),
    /// Rank tags by KL divergence and keep the top K.
    Select(Common),
    /// Train the configured variant and export location vectors.
    Train(Common),
    /// Evaluate the trained vectors on the configured tasks.
    Eval(Common),
    /// Generate a synthetic corpus with planted clusters.
    Synth(Common),
    /// Grid search on the tune split, reporting test metrics of the winner.
    Sweep(Common),
}

fn run(cli: Cli) -> geoembed::Result<()> {
    let (Command::Build(c) | Command::Select(c) | Command::Train(c) | Command::Eval(c) | Command::Synth(c) | Command::Sweep(c)) =
        &cli.command;
    let cfg = PipelineConfig::load(&c.config, &c.out, c.seed)?;
    let out = c.out.as_path();
    log::info!("config hash {} seed {}", cfg.hash(), cfg.seed);
    match cli.command {
        Command::Build(_) => cmd_build(&cfg, out).map(drop),
        Command::Select(_) => cmd_select(&cfg, out).map(drop),
        Command::Train(_) => cmd_train(&cfg, out).map(drop),
        Command::Eval(_) => {
            for r in cmd_eval(&cfg, out)? {
                log::info!("{} {}: F1 {:?} MAE {:?} rho {:?}", r.task, r.variant, r.f1, r.mae, r.rho);
            }
            Ok(())
        }
        Command::Synth(_) => cmd_synth(&cfg, out).map(drop),
        Command::Sweep(_) => cmd_sweep(&cfg, out).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
