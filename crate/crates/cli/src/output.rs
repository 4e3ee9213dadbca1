//! Report emission: fixed-precision CSV tables and full-precision JSON
//! envelopes.
//!
//! CSV is the machine boundary, so every float is printed with six decimals
//! and identical invocations produce byte-identical files. The JSON envelope
//! echoes the canonical scenario and carries full double precision plus a
//! timestamp.

use std::io::Write;

use serde::Serialize;

use maxregret_core::engine::{RegretReport, WeightSearch};
use maxregret_core::state_space::StateGrid;

use crate::CliError;

/// Envelope around any command result for JSON output.
#[derive(Debug, Serialize)]
pub struct ReportEnvelope<S: Serialize, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: String,
    pub command: &'static str,
    pub scenario: S,
    pub result: T,
}

impl<S: Serialize, T: Serialize> ReportEnvelope<S, T> {
    pub fn new(command: &'static str, scenario: S, result: T) -> Self {
        ReportEnvelope {
            tool: "maxregret",
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339(),
            command,
            scenario,
            result,
        }
    }

    pub fn write_json(&self, out: &mut dyn Write) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut *out, self).map_err(CliError::Parse)?;
        writeln!(out)?;
        Ok(())
    }
}

fn fixed(value: f64) -> String {
    format!("{value:.6}")
}

/// Column names for a state tuple: `p0`, `p1`, …
fn state_columns(arity: usize) -> String {
    (0..arity)
        .map(|k| format!("p{k}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Per-state regret table.
pub fn write_state_table(out: &mut dyn Write, report: &RegretReport) -> Result<(), CliError> {
    let arity = report.argmax_state.len();
    let has_std = report.per_state.iter().any(|row| row.std_error.is_some());
    let mut header = format!("{},expected_regret,error_probability", state_columns(arity));
    if has_std {
        header.push_str(",std_error");
    }
    writeln!(out, "{header}")?;
    for row in &report.per_state {
        let mut line: Vec<String> = row.state.iter().copied().map(fixed).collect();
        line.push(fixed(row.expected_regret));
        line.push(fixed(row.error_probability));
        if has_std {
            line.push(fixed(row.std_error.unwrap_or(0.0)));
        }
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Weight-sweep curve.
pub fn write_weight_curve(out: &mut dyn Write, search: &WeightSearch) -> Result<(), CliError> {
    writeln!(out, "weight0,max_regret")?;
    for point in &search.curve {
        writeln!(out, "{},{}", fixed(point.weight0), fixed(point.max_regret))?;
    }
    Ok(())
}

/// Generic name/value rows for scalar results.
pub fn write_named_values(
    out: &mut dyn Write,
    rows: &[(String, String)],
) -> Result<(), CliError> {
    writeln!(out, "name,value")?;
    for (name, value) in rows {
        writeln!(out, "{name},{value}")?;
    }
    Ok(())
}

pub fn named(name: &str, value: f64) -> (String, String) {
    (name.to_string(), fixed(value))
}

/// One state per row, for grid audits.
pub fn write_grid(out: &mut dyn Write, grid: &StateGrid) -> Result<(), CliError> {
    writeln!(out, "{}", state_columns(grid.arity()))?;
    for state in &grid.states {
        let row: Vec<String> = state.iter().copied().map(fixed).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// The weighted-average reproduction table: one row per sample-size pair.
#[derive(Debug, Clone, Serialize)]
pub struct WeightTableRow {
    pub size0: u32,
    pub size1: u32,
    /// Maximum regret at the six canonical weights 0.5, 0.6, …, 1.0.
    pub at_weights: Vec<f64>,
    pub min_max_regret: f64,
    pub best_weight: f64,
}

pub fn write_weight_table(out: &mut dyn Write, rows: &[WeightTableRow]) -> Result<(), CliError> {
    writeln!(
        out,
        "n0,n1,w_0.50,w_0.60,w_0.70,w_0.80,w_0.90,w_1.00,mmr,optimal_weight"
    )?;
    for row in rows {
        let cells: Vec<String> = row.at_weights.iter().copied().map(fixed).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            row.size0,
            row.size1,
            cells.join(","),
            fixed(row.min_max_regret),
            fixed(row.best_weight)
        )?;
    }
    Ok(())
}
