use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use codai_cli::config::Config;
use codai_cli::manifest::RunManifest;
use codai_cli::pipeline::{self, Context};
use codai_core::spatial::Level;

#[derive(Parser, Debug)]
#[command(name = "codai", version, about = "Corporate website crawling, digital index scoring and territorial analysis")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Work directory holding every stage's inputs and outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Index scheme: codai, wai2001, sum10 or a scheme defined in the config.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Territorial level for aggregate and cluster.
    #[arg(long, global = true, default_value = "nuts3")]
    level: Level,
    /// Replay this corpus directory instead of fetching.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch every homepage listed in the registry.
    Crawl { registry: PathBuf },
    /// Compute the ten website features.
    Extract,
    /// Normalise features and score the index.
    Index,
    /// Aggregate firms by territorial unit.
    Aggregate,
    /// Cluster the regional aggregates.
    Cluster,
    /// Fit the configured regressions.
    Regress,
    /// Descriptive statistics and correlations.
    Report,
}

fn run(cli: Cli) -> anyhow::Result<RunManifest> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.scheme {
        config.index.scheme = s;
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    config.validate()?;
    let mut ctx = Context::new(config, cli.out);
    ctx.level = cli.level;
    ctx.replay = cli.replay;
    match cli.command {
        Command::Crawl { registry } => pipeline::cmd_crawl(&ctx, &registry),
        Command::Extract => pipeline::cmd_extract(&ctx),
        Command::Index => pipeline::cmd_index(&ctx),
        Command::Aggregate => pipeline::cmd_aggregate(&ctx),
        Command::Cluster => pipeline::cmd_cluster(&ctx),
        Command::Regress => pipeline::cmd_regress(&ctx),
        Command::Report => pipeline::cmd_report(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(m) => {
            let c = &m.counts;
            match m.valid_share {
                Some(share) => println!(
                    "{}: {} of {} valid ({:.1}%), {} output rows",
                    m.stage,
                    c.valid,
                    c.attempted,
                    share * 100.0,
                    c.output_rows
                ),
                None => println!("{}: {} output rows", m.stage, c.output_rows),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
