use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use hannay_cli::{parse_config, run_subcommand, Command, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "hannay", version, about = "Hannay angles and adiabatic gauge potentials of 1-dof families")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Curvature entries over the configured λ points and actions.
    Curvature,
    /// Hannay angle of the loop by line and surface routes.
    Hannay,
    /// Gauge-potential matrix elements by three routes.
    Agp,
    /// Slow-loop dynamics against the geometric routes.
    Verify,
    /// Generalized-oscillator numeric vs closed-form table.
    GenoscTable,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Curvature => Command::Curvature,
            Sub::Hannay => Command::Hannay,
            Sub::Agp => Command::Agp,
            Sub::Verify => Command::Verify,
            Sub::GenoscTable => Command::GenoscTable,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = e.downcast_ref::<hannay_cli::RunError>().map_or(EXIT_CONFIG, |r| r.exit_code());
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let path = cli.config.as_ref().context("--config PATH is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse_config(&text, std::env::vars()).map_err(hannay_cli::RunError::from)?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    if cli.seed.is_some() {
        log::info!("--seed is reserved and has no effect");
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run_subcommand(&cfg, cli.command.into(), &out)?;
    print!("{}", report.failure_lines());
    eprintln!(
        "{}: {} checks, {} failed; wrote {}",
        Command::from(cli.command).name(),
        report.checks.len(),
        report.failures().count(),
        report.csv.display()
    );
    Ok(report.exit_code())
}
