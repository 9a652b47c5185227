use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use classplay_cli::{CliError, ServeOptions};

#[derive(Parser)]
#[command(name = "classplay", version, about = "Run embodied AI classroom games")]
struct Cli {
    /// Override the lesson seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print only errors and final results.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a lesson config and print its diagnostics.
    Validate { config: PathBuf },
    /// Play a scripted session and print each outcome and the final state.
    Run {
        config: PathBuf,
        script: PathBuf,
        /// Write the session event log (JSONL) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact and Monte-Carlo card values for a surprise_box lesson.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
    },
    /// Print the physical kit a lesson needs.
    Materials { config: PathBuf },
    /// Start the HTTP service.
    Serve {
        /// Port on 127.0.0.1; 0 picks a free one.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of named lessons.
        #[arg(long)]
        config_dir: Option<PathBuf>,
        /// Persist sessions here.
        #[arg(long, conflicts_with = "resume")]
        log_dir: Option<PathBuf>,
        /// Restore sessions from this log directory and keep logging there.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config } => classplay_cli::validate(&config, cli.quiet, out),
        Command::Run { config, script, out: log } => {
            classplay_cli::run(&config, &script, cli.seed, log.as_deref(), cli.quiet, out)
        }
        Command::Simulate { config, rounds } => classplay_cli::simulate(&config, rounds, cli.seed, out),
        Command::Materials { config } => classplay_cli::materials(&config, out),
        Command::Serve {
            port,
            config_dir,
            log_dir,
            resume,
        } => classplay_cli::serve(
            ServeOptions {
                port,
                config_dir,
                log_dir,
                resume,
            },
            cli.quiet,
            out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = dispatch(cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
