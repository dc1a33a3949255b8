use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pdsplit", version, about = "Primal-dual proximal splitting runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solve described by a config file.
    Run {
        config: PathBuf,
        /// Also print the run summary to stdout.
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, verbose } => match pdsplit::cli::run_config(&config) {
            Ok(report) => {
                if verbose {
                    print!("{}", report.summary);
                } else {
                    println!(
                        "{}: {} after {} iterations",
                        config.display(),
                        report.trace.stop_reason.as_str(),
                        report.trace.iterations
                    );
                }
                if let Some(f) = &report.trace.failure {
                    eprintln!("error: numeric failure: {f}");
                }
                ExitCode::from(report.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
