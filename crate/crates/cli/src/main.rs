use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weylrat_cli::run::{EXIT_CONFIG, EXIT_OK, EXIT_QUALITY};
use weylrat_cli::{run, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "weylrat", version, about = "Direct and inverse Weyl-Titchmarsh pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides paths.output; default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override grid.n.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Potential → sampled Weyl function.
    Direct,
    /// Weyl CSV → recovered potential.
    Inverse,
    /// Potential → Weyl function → potential, with error report.
    Roundtrip,
    /// Reconstruction through the Weyl set (boundary rows + Weyl points).
    WeylSet,
    /// cos ω of sine-Gordon from boundary data.
    Sg,
    /// Built-in identity checks.
    Selftest,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Direct => Mode::Direct,
            Command::Inverse => Mode::Inverse,
            Command::Roundtrip => Mode::Roundtrip,
            Command::WeylSet => Mode::WeylSet,
            Command::Sg => Mode::Sg,
            Command::Selftest => Mode::Selftest,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, weylrat_cli::CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.grid_n {
        cfg.grid.n = n;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(weylrat_cli::ConfigError::new("--workers", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| weylrat_cli::CliError::Internal(e.to_string()))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.paths.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(&cfg, cli.command.into(), &out, cli.verbose)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    if outcome.failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        for f in &outcome.failures {
            eprintln!("tolerance: {f}");
        }
        Ok(EXIT_QUALITY)
    }
}
