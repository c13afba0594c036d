use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wdm_cli::modes::fig2_defaults;
use wdm_cli::{run, CliError, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(
    name = "wdm",
    version,
    about = "Particle method experiments for advection-selection-mutation equations"
)]
struct Cli {
    #[command(subcommand)]
    mode: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML). Keys can be overridden by WDM_<SECTION>__<KEY>.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact directory; defaults to output.dir from the config, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep members and particle maps.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory with snapshots and reconstruction frames.
    Simulate(Common),
    /// h-sweep against the oracle, or against the finest run without one.
    Converge(Common),
    /// Long-time cluster and asymptotic-preservation diagnostics.
    Asymptote(Common),
    /// End-to-end reproduction of a figure's scenarios.
    Reproduce {
        figure: Figure,
        #[command(flatten)]
        common: Common,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (mode, common) = match cli.mode {
        Command::Simulate(c) => (Mode::Simulate, c),
        Command::Converge(c) => (Mode::Converge, c),
        Command::Asymptote(c) => (Mode::Asymptote, c),
        Command::Reproduce {
            figure: Figure::Fig2,
            common,
        } => (Mode::ReproduceFig2, common),
    };
    if common.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let cfg = match (&common.config, mode) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Mode::ReproduceFig2) => {
            let text = toml::to_string(&fig2_defaults()).expect("defaults serialize");
            ExperimentConfig::from_toml_with(&text, std::env::vars())?
        }
        (None, _) => return Err(CliError::Usage(format!("{} needs --config <path>", mode.name()))),
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build()
        .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| run(mode, &cfg, &out))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("artifacts: {}", outcome.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wdm: {e}");
            if let CliError::Numerical { report: Some(path), .. } = &e {
                eprintln!("wdm: diagnostic written to {}", path.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
