//! Scenario files: one or more named configs, each optionally swept over
//! `n`, `N`, `mode` and `failure_prob`.

use std::cmp::Ordering;
use std::path::Path;

use pots_core::hashcash::Target;
use pots_core::pow::Mode;
use pots_core::simnet::SimConfig;
use pots_core::U256;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_MAX_CELLS: usize = 256;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub n: Option<Vec<u64>>,
    #[serde(default, rename = "N")]
    pub group_size: Option<Vec<usize>>,
    #[serde(default)]
    pub mode: Option<Vec<Mode>>,
    #[serde(default)]
    pub failure_prob: Option<Vec<f64>>,
}

/// One scenario as written. Only `seed`, `n`, `N`, `rounds` and a target are
/// required.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    pub n: u64,
    #[serde(rename = "N")]
    pub group_size: usize,
    pub rounds: u64,
    #[serde(default)]
    pub target_exponent: Option<u32>,
    /// Arbitrary threshold as 64 hex digits.
    #[serde(default)]
    pub target_hex: Option<String>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub latency_ticks: Option<u64>,
    #[serde(default)]
    pub failure_prob: Option<f64>,
    #[serde(default)]
    pub reward: Option<u64>,
    #[serde(default)]
    pub contributor_count: Option<usize>,
    #[serde(default)]
    pub min_participation: Option<u64>,
    #[serde(default)]
    pub tick_budget: Option<u64>,
    #[serde(default)]
    pub genesis: Option<String>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiFile {
    scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    max_cells: Option<usize>,
}

/// A fully expanded run: one config plus where its outputs go.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scenario: String,
    pub config: SimConfig,
}

impl Cell {
    /// Directory label within the scenario, e.g. `n64-N8-idealized-f0.0`.
    pub fn label(&self) -> String {
        cell_label(&self.config)
    }

    /// `scenario/label`, the CSV key and the output subdirectory.
    pub fn id(&self) -> String {
        format!("{}/{}", self.scenario, self.label())
    }
}

pub fn cell_label(c: &SimConfig) -> String {
    format!("n{}-N{}-{}-f{:?}", c.n, c.group_size, c.mode, c.failure_prob)
}

/// Sort order for cells and CSV rows; numeric on the swept axes.
pub fn cell_order(a: (&str, &SimConfig), b: (&str, &SimConfig)) -> Ordering {
    a.0.cmp(b.0)
        .then(a.1.n.cmp(&b.1.n))
        .then(a.1.group_size.cmp(&b.1.group_size))
        .then((a.1.mode as u8).cmp(&(b.1.mode as u8)))
        .then(a.1.failure_prob.total_cmp(&b.1.failure_prob))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub cells: Vec<Cell>,
    pub max_cells: usize,
}

fn config_err(context: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { context: context.into(), message: message.into() }
}

pub fn parse_config(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    parse_config_str(&text, &path.display().to_string())
}

/// Accepts either a single scenario object or `{"scenarios": [...],
/// "max_cells": k}`.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ScenarioFile, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| config_err(origin, e.to_string()))?;
    let (specs, max_cells) = if value.get("scenarios").is_some() {
        let m: MultiFile = serde_json::from_value(value).map_err(|e| config_err(origin, e.to_string()))?;
        (m.scenarios, m.max_cells.unwrap_or(DEFAULT_MAX_CELLS))
    } else {
        let s: ScenarioSpec = serde_json::from_value(value).map_err(|e| config_err(origin, e.to_string()))?;
        (vec![s], DEFAULT_MAX_CELLS)
    };

    let mut cells = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let name = spec.name.clone().unwrap_or_else(|| format!("s{i}"));
        check_name(&name)?;
        let expanded = expand(spec, &name)?;
        if cells.len() + expanded.len() > max_cells {
            return Err(config_err("max_cells", format!("sweep expands past {max_cells} cells")));
        }
        cells.extend(expanded);
    }
    cells.sort_by(|a, b| cell_order((&a.scenario, &a.config), (&b.scenario, &b.config)));
    if let Some(w) = cells.windows(2).find(|w| w[0].id() == w[1].id()) {
        return Err(config_err("name", format!("duplicate cell {}", w[0].id())));
    }
    Ok(ScenarioFile { cells, max_cells })
}

fn check_name(name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(config_err("name", format!("{name:?} must be non-empty [A-Za-z0-9_.-]")))
    }
}

fn target_of(spec: &ScenarioSpec, name: &str) -> Result<Target, CliError> {
    match (spec.target_exponent, &spec.target_hex) {
        (Some(e), None) => Target::from_exponent(e)
            .map_err(|e| config_err(format!("{name}: target_exponent"), e.to_string())),
        (None, Some(h)) => {
            let t =
                U256::from_hex(h).map_err(|e| config_err(format!("{name}: target_hex"), e.to_string()))?;
            Target::new(t).map_err(|e| config_err(format!("{name}: target_hex"), e.to_string()))
        }
        (None, None) => Err(config_err(
            format!("{name}: target_exponent"),
            "missing field `target_exponent` (or `target_hex`)",
        )),
        (Some(_), Some(_)) => {
            Err(config_err(format!("{name}: target_hex"), "give target_exponent or target_hex, not both"))
        }
    }
}

fn expand(spec: &ScenarioSpec, name: &str) -> Result<Vec<Cell>, CliError> {
    let target = target_of(spec, name)?;
    let genesis = match &spec.genesis {
        Some(h) => U256::from_hex(h).map_err(|e| config_err(format!("{name}: genesis"), e.to_string()))?,
        None => U256::zero(),
    };
    let sweep = spec.sweep.clone().unwrap_or_default();
    let ns = sweep.n.unwrap_or_else(|| vec![spec.n]);
    let gs = sweep.group_size.unwrap_or_else(|| vec![spec.group_size]);
    let modes = sweep.mode.unwrap_or_else(|| vec![spec.mode.unwrap_or(Mode::Idealized)]);
    let fps = sweep.failure_prob.unwrap_or_else(|| vec![spec.failure_prob.unwrap_or(0.0)]);

    let mut cells = Vec::new();
    for &n in &ns {
        for &g in &gs {
            for &mode in &modes {
                for &fp in &fps {
                    let mut c = SimConfig::new(spec.seed, n, g, spec.rounds, target).with_mode(mode);
                    c.failure_prob = fp;
                    c.genesis = genesis;
                    if let Some(v) = spec.latency_ticks {
                        c.latency_ticks = v;
                    }
                    if let Some(v) = spec.reward {
                        c.reward = v;
                    }
                    if let Some(v) = spec.contributor_count {
                        c.contributor_count = v;
                    }
                    if let Some(v) = spec.min_participation {
                        c.min_participation = v;
                    }
                    if let Some(v) = spec.tick_budget {
                        c.tick_budget = v;
                    }
                    let cell = Cell { scenario: name.to_string(), config: c };
                    cell.config.validate().map_err(|e| config_err(cell.id(), e.to_string()))?;
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}
