//! Experiment runner behind the `pots` binary: scenario parsing and sweep
//! expansion, per-cell traces and summaries, `results.csv`, trace audits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pots_core::simnet::{
    audit_trace, header_line, round_line, AuditReport, ExperimentSummary, SimError, Simulation,
    SummaryBuilder, TraceLine,
};
use rayon::prelude::*;

pub mod report;
pub mod scenario;

pub use scenario::{parse_config, parse_config_str, Cell, ScenarioFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

pub const TRACE_FILE: &str = "trace.ndjson";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in {context}: {message}")]
    Config { context: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Trace { path: String, line: usize, message: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("{cell}: {source}")]
    Sim { cell: String, source: SimError },
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    fn csv(e: csv::Error) -> CliError {
        CliError::Csv(e.to_string())
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }
}

/// What a `run` produced, in output order.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub cells: Vec<(String, ExperimentSummary)>,
}

impl RunReport {
    pub fn has_incomplete_rounds(&self) -> bool {
        self.cells.iter().any(|(_, s)| s.pots.incomplete_rounds > 0 || s.pow.incomplete_rounds > 0)
    }

    pub fn exit_code(&self) -> i32 {
        if self.has_incomplete_rounds() {
            EXIT_INCOMPLETE
        } else {
            EXIT_OK
        }
    }
}

/// Runs one cell, streaming its trace to `dir` and writing its summary.
pub fn run_cell(cell: &Cell, dir: &Path) -> Result<ExperimentSummary, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let trace_path = dir.join(TRACE_FILE);
    let mut sim =
        Simulation::new(cell.config.clone()).map_err(|source| CliError::Sim { cell: cell.id(), source })?;
    let mut w = BufWriter::new(File::create(&trace_path).map_err(CliError::io(&trace_path))?);
    w.write_all(header_line(&cell.config).as_bytes()).map_err(CliError::io(&trace_path))?;
    while !sim.is_finished() {
        let rec = sim.step().map_err(|source| CliError::Sim { cell: cell.id(), source })?;
        w.write_all(round_line(&rec).as_bytes()).map_err(CliError::io(&trace_path))?;
    }
    w.flush().map_err(CliError::io(&trace_path))?;

    let summary = sim.summary();
    let summary_path = dir.join(SUMMARY_FILE);
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    fs::write(&summary_path, json).map_err(CliError::io(&summary_path))?;
    Ok(summary)
}

/// Runs every cell (in parallel, `jobs` threads if given) and writes
/// `results.csv` once, in cell order.
pub fn run_scenario(sc: &ScenarioFile, out: &Path, jobs: Option<usize>) -> Result<RunReport, CliError> {
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let work = || -> Result<Vec<ExperimentSummary>, CliError> {
        sc.cells.par_iter().map(|c| run_cell(c, &out.join(&c.scenario).join(c.label()))).collect()
    };
    let summaries = match jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| CliError::Pool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let cells: Vec<(String, ExperimentSummary)> = sc.cells.iter().map(Cell::id).zip(summaries).collect();
    let csv = report::render_csv(cells.iter().map(|(id, s)| (id.as_str(), s)))?;
    let csv_path = out.join(RESULTS_FILE);
    fs::write(&csv_path, csv).map_err(CliError::io(&csv_path))?;
    Ok(RunReport { cells })
}

pub fn verify_trace(path: &Path) -> Result<AuditReport, CliError> {
    let f = File::open(path).map_err(CliError::io(path))?;
    Ok(audit_trace(BufReader::new(f)))
}

/// Recomputes a summary from a trace file alone.
pub fn summarize_trace(path: &Path) -> Result<ExperimentSummary, CliError> {
    let f = File::open(path).map_err(CliError::io(path))?;
    let bad =
        |line: usize, message: String| CliError::Trace { path: path.display().to_string(), line, message };
    let mut builder: Option<SummaryBuilder> = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        match serde_json::from_str::<TraceLine>(&line).map_err(|e| bad(i + 1, e.to_string()))? {
            TraceLine::Header(h) if builder.is_none() => builder = Some(SummaryBuilder::new(h.config)),
            TraceLine::Header(_) => return Err(bad(i + 1, "unexpected header".into())),
            TraceLine::Round(r) => match builder.as_mut() {
                Some(b) => b.add(&r),
                None => return Err(bad(i + 1, "round before header".into())),
            },
        }
    }
    builder.map(|b| b.finish()).ok_or_else(|| bad(1, "empty trace".into()))
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let p = entry.map_err(CliError::io(dir))?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    Ok(out)
}

/// Rebuilds `results.csv` from the traces under a `run` output directory.
pub fn summarize_dir(dir: &Path) -> Result<Vec<u8>, CliError> {
    let mut cells: Vec<(String, String, ExperimentSummary)> = Vec::new();
    for scenario_dir in subdirs(dir)? {
        for cell_dir in subdirs(&scenario_dir)? {
            let trace = cell_dir.join(TRACE_FILE);
            if !trace.is_file() {
                continue;
            }
            let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let scenario = name(&scenario_dir);
            let id = format!("{scenario}/{}", name(&cell_dir));
            cells.push((scenario, id, summarize_trace(&trace)?));
        }
    }
    cells.sort_by(|a, b| {
        scenario::cell_order((&a.0, &a.2.config), (&b.0, &b.2.config)).then_with(|| a.1.cmp(&b.1))
    });
    report::render_csv(cells.iter().map(|(_, id, s)| (id.as_str(), s)))
}
