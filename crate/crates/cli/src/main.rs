use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eprbec_cli::{execute, Command, Format, Options};

#[derive(Parser)]
#[command(
    name = "eprbec",
    version,
    about = "EPR steering between two transported bimodal condensates"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file (`key = value [unit]` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write binary wavefunction snapshots.
    #[arg(long, global = true)]
    snapshot: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// No progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Transport protocol for every interaction time.
    Run,
    /// Protocol over the product of the sweep axes.
    Sweep,
    /// Exact four-mode prediction only.
    Oracle,
    /// Atom-loss budget of the overlapped configuration.
    Losses,
    /// Invariant suite on a small grid.
    Check,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Run => Command::Run,
        Cmd::Sweep => Command::Sweep,
        Cmd::Oracle => Command::Oracle,
        Cmd::Losses => Command::Losses,
        Cmd::Check => Command::Check,
    };
    let opts = Options {
        config: cli.config,
        out: cli.out,
        workers: cli.workers,
        snapshot: cli.snapshot,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        quiet: cli.quiet,
    };
    match execute(command, &opts) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("eprbec: {e}");
            ExitCode::from(1)
        }
    }
}
