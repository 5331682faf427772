//! `results.csv`: two rows per cell, PoTS then PoW.

use pots_core::protocol::Protocol;
use pots_core::simnet::ExperimentSummary;

use crate::CliError;

pub const COLUMNS: [&str; 12] = [
    "scenario",
    "protocol",
    "mode",
    "n",
    "N",
    "rounds_completed",
    "total_energy_units",
    "energy_ratio",
    "mean_duration_ticks",
    "reward_min",
    "reward_max",
    "reward_mean",
];

/// Rows for one cell. The PoW row's ratio is its own baseline, 1.0.
pub fn rows(cell_id: &str, s: &ExperimentSummary) -> Vec<[String; 12]> {
    [Protocol::Pots, Protocol::Pow]
        .into_iter()
        .map(|p| {
            let arm = s.arm(p);
            let ratio = match p {
                Protocol::Pots => s.energy_ratio.map_or(String::new(), |r| format!("{r:?}")),
                Protocol::Pow => format!("{:?}", 1.0f64),
            };
            [
                cell_id.to_string(),
                p.to_string(),
                s.config.mode.to_string(),
                s.config.n.to_string(),
                s.config.group_size.to_string(),
                arm.rounds_completed.to_string(),
                arm.total_energy.to_string(),
                ratio,
                format!("{:?}", arm.mean_duration_ticks),
                arm.reward_min().to_string(),
                arm.reward_max().to_string(),
                format!("{:?}", arm.reward_mean()),
            ]
        })
        .collect()
}

/// Renders a CSV from `(cell_id, summary)` pairs already in output order.
pub fn render_csv<'a>(
    cells: impl IntoIterator<Item = (&'a str, &'a ExperimentSummary)>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(CliError::csv)?;
    for (id, s) in cells {
        for row in rows(id, s) {
            w.write_record(&row).map_err(CliError::csv)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Csv(e.to_string()))
}
