//! Result serialization: trajectory CSV, ensemble/verify JSON documents, and
//! the condensation-study table.
//!
//! Floats are rendered with 17 significant digits so every value round-trips
//! to the identical bit pattern.

use serde_json::{json, Value};
use yardsale_core::{
    CondensationStudy, EnsembleSummary, IncrementReport, MetricsSnapshot, TrajectoryRecord,
};

use crate::config::RunConfigFile;

/// Pinned header of the per-trajectory CSV.
pub const TRAJECTORY_CSV_HEADER: &str = "step,max_wealth,norm_sq,ipr,gini,total,last_stake";

/// 17 significant digits: exact round-trip for every f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_trajectory_csv(record: &TrajectoryRecord) -> String {
    render_snapshots_csv(&record.snapshots)
}

pub fn render_snapshots_csv(snapshots: &[MetricsSnapshot]) -> String {
    let mut out = String::with_capacity(64 * (snapshots.len() + 1));
    out.push_str(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for snap in snapshots {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            snap.step,
            format_float(snap.max_wealth),
            format_float(snap.norm_sq),
            format_float(snap.ipr),
            format_float(snap.gini),
            format_float(snap.total),
            format_float(snap.last_stake),
        ));
    }
    out
}

/// Reads a trajectory CSV back; the header must match bit for bit. The read
/// side of the format contract, exercised by the round-trip tests.
#[allow(dead_code)]
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<MetricsSnapshot>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == TRAJECTORY_CSV_HEADER => {}
        other => return Err(format!("bad trajectory CSV header: {other:?}")),
    }
    let mut snapshots = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(format!("row {}: expected 7 fields, got {}", i + 2, fields.len()));
        }
        let f = |j: usize| -> Result<f64, String> {
            fields[j]
                .parse::<f64>()
                .map_err(|e| format!("row {}: field {}: {e}", i + 2, j + 1))
        };
        snapshots.push(MetricsSnapshot {
            step: fields[0]
                .parse::<u64>()
                .map_err(|e| format!("row {}: step: {e}", i + 2))?,
            max_wealth: f(1)?,
            norm_sq: f(2)?,
            ipr: f(3)?,
            gini: f(4)?,
            total: f(5)?,
            last_stake: f(6)?,
        });
    }
    Ok(snapshots)
}

/// The ensemble summary document: the normalized config echo plus the
/// aggregated statistics (which carry the master seed).
pub fn summary_document(config: &RunConfigFile, summary: &EnsembleSummary) -> Value {
    json!({
        "config": config.to_document(),
        "summary": serde_json::to_value(summary).expect("summary serializes"),
    })
}

/// Wraps any verification report together with the config echo.
pub fn report_document<T: serde::Serialize>(
    config: &RunConfigFile,
    kind: &str,
    report: &T,
) -> Value {
    json!({
        "config": config.to_document(),
        kind: serde_json::to_value(report).expect("report serializes"),
    })
}

pub const INCREMENT_CSV_HEADER: &str = "step,mean_delta_norm_sq,mean_gap,gap_z,mean_target,diff_z";

pub fn render_increment_csv(report: &IncrementReport) -> String {
    let mut out = String::with_capacity(64 * (report.per_step.len() + 1));
    out.push_str(INCREMENT_CSV_HEADER);
    out.push('\n');
    for row in &report.per_step {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.step,
            format_float(row.mean_delta_norm_sq),
            format_float(row.mean_gap),
            format_float(row.gap_z),
            format_float(row.mean_target),
            format_float(row.diff_z),
        ));
    }
    out
}

pub const STUDY_CSV_HEADER: &str = "n_agents,delta,beta,epsilon,n_trajectories,n_condensed,\
mean_steps,median_steps,std_dev,ci3_half_width,min_steps,max_steps";

pub fn render_study_csv(study: &CondensationStudy) -> String {
    let mut out = String::new();
    out.push_str(STUDY_CSV_HEADER);
    out.push('\n');
    for row in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.point.n_agents,
            format_float(row.point.delta),
            format_float(row.point.beta),
            format_float(row.point.epsilon),
            row.n_trajectories,
            row.n_condensed,
            format_float(row.mean_steps),
            format_float(row.median_steps),
            format_float(row.std_dev),
            format_float(row.half_width_3sigma),
            row.min_steps,
            row.max_steps,
        ));
    }
    out
}
