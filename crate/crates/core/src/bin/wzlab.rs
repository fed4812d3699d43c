use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use wzlab::cli::{self, Command, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Paths,
    Lift,
    Solve,
    Davie,
    Converge,
    Diagram,
    Verify,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Paths => Command::Paths,
            Sub::Lift => Command::Lift,
            Sub::Solve => Command::Solve,
            Sub::Davie => Command::Davie,
            Sub::Converge => Command::Converge,
            Sub::Diagram => Command::Diagram,
            Sub::Verify => Command::Verify,
        }
    }
}

/// Wong-Zakai experiments driven by a TOML config.
///
/// Exit codes: 0 success, 1 other error, 2 config error, 3 blow-up, 4 failed check.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `[output] dir` and $WZLAB_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    if let Err(e) = cli::install_interrupt_handler() {
        log::warn!("{e}");
    }
    let opts = RunOptions {
        seed: args.seed,
        out: args.out,
        workers: args.workers,
    };
    let result = cli::run_file(args.command.into(), &args.config, &opts);
    match &result {
        Ok(s) => {
            for c in &s.checks {
                println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{}", s.dir.join(cli::MANIFEST).display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
