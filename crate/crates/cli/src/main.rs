use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pots_cli::{
    parse_config, run_scenario, summarize_dir, verify_trace, CliError, EXIT_ERROR, EXIT_INVALID, EXIT_OK,
    RESULTS_FILE,
};

#[derive(Parser)]
#[command(name = "pots", version, about = "Team-sprint vs proof-of-work energy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sweep cells.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-validate every round of a trace.
    Verify { trace: PathBuf },
    /// Recompute results.csv from the traces in a run directory.
    Summarize { dir: PathBuf },
}

fn run(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run { scenario, out, jobs } => {
            let sc = parse_config(&scenario)?;
            let report = run_scenario(&sc, &out, jobs)?;
            println!("{} cells, results in {}", report.cells.len(), out.join(RESULTS_FILE).display());
            for (id, s) in &report.cells {
                if s.pots.incomplete_rounds > 0 || s.pow.incomplete_rounds > 0 {
                    eprintln!(
                        "{id}: incomplete rounds (pots {}, pow {})",
                        s.pots.incomplete_rounds, s.pow.incomplete_rounds
                    );
                }
            }
            Ok(report.exit_code())
        }
        Command::Verify { trace } => {
            let r = verify_trace(&trace)?;
            println!("records: {}, valid: {}, invalid: {}", r.records, r.valid, r.issues.len());
            for issue in &r.issues {
                let round = issue.round.map_or("-".to_string(), |r| r.to_string());
                println!("line {} round {}: {}", issue.line, round, issue.reasons.join("; "));
            }
            Ok(if r.all_valid() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Summarize { dir } => {
            let csv = summarize_dir(&dir)?;
            std::io::stdout()
                .write_all(&csv)
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap's own usage code would collide with "incomplete rounds"
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
