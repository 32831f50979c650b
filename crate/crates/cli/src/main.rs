use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use togglemem_cli::examples::{bundled, description, BUNDLED};
use togglemem_cli::{parse_scenario, run_scenario, RunError};

#[derive(Parser)]
#[command(name = "togglemem", version, about = "Charge-recovery matchline and toggle-memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or the name of a bundled example).
    Run {
        scenario: PathBuf,
        /// Output directory. Defaults to the scenario's `out` key, then `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled example scenarios.
    ListExamples,
}

fn run(scenario: PathBuf, out: Option<PathBuf>) -> Result<(), RunError> {
    let text = match std::fs::read_to_string(&scenario) {
        Ok(t) => t,
        Err(source) => match scenario.to_str().and_then(bundled) {
            Some(t) => t.to_string(),
            None => return Err(RunError::Io { path: scenario, source }),
        },
    };
    let s = parse_scenario(&text)?;
    let dir = out.or_else(|| s.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    let report = run_scenario(&s, &dir)?;
    print!("{}", report.summary);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExamples => {
            for (name, text) in BUNDLED {
                println!("{name:<14}{}", description(text));
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, out } => match run(scenario, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
