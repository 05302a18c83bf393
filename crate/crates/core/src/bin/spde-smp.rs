use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use spde_smp::runner::{run_from_file, Command, Overrides};

#[derive(Clone, Copy, ValueEnum)]
enum Sub {
    Simulate,
    NoiseCheck,
    SpikeOrders,
    CostExpansion,
    AdjointCheck,
    SmpCheck,
    Optimize,
    Selftest,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        Command::ALL[s as usize]
    }
}

/// Run one study and write its artifacts plus `manifest.json`.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides { seed: cli.seed, paths: cli.paths };
    match run_from_file(cli.command.into(), &cli.config, &cli.out, overrides) {
        Ok(outcome) => {
            println!("{}", outcome.manifest_path.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
