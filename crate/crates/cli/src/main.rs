use clap::{Parser, Subcommand};
use nlirf_cli::config::SCHEMA_HELP;
use nlirf_cli::{load_config, run, summary_table, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nlirf", version, about = "Nonlinear impulse-response experiments", after_long_help = SCHEMA_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config.
    #[command(after_long_help = SCHEMA_HELP)]
    Run {
        config: PathBuf,
        /// Overrides mc.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides io.output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = load_config(&config)?;
    if seed.is_some() {
        cfg.mc.seed = seed;
    }
    if out.is_some() {
        cfg.io.output = out;
    }
    let dir = cfg.output_dir();
    let summary = run(&cfg, &dir)?;
    print!("{}", summary_table(cfg.command.name(), &summary));
    println!("artifacts written to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Cmd::Run { config, seed, out } = cli.command;
    match execute(config, seed, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
