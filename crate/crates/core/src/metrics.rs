//! Coverage accounting for completed runs: inspected counts, flight
//! distance, planning plus flight time, and coverage reached by a given
//! time or distance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::viewgen::ClusterKey;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("percentage denominator is zero")]
    ZeroDenominator,
    #[error("table line {line}: {msg}")]
    Table { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub distance_m: f64,
    pub planning_s: f64,
    pub inspected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Finished,
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scene: String,
    pub status: RunStatus,
    pub object_voxels: usize,
    pub inspectable_voxels: usize,
    pub inspected: usize,
    pub distance_m: f64,
    pub planning_s: f64,
    pub cruise_mps: f64,
    pub iterations: usize,
    pub samples: Vec<Sample>,
    pub uninspectable: Vec<ClusterKey>,
}

impl RunReport {
    /// Mission time: accumulated planning time plus flight at cruise speed.
    pub fn total_time_s(&self) -> f64 {
        self.planning_s + self.distance_m / self.cruise_mps
    }

    pub fn sample_time_s(&self, s: &Sample) -> f64 {
        s.planning_s + s.distance_m / self.cruise_mps
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    Object,
    Inspectable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Distance(f64),
    Time(f64),
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `100 · part / whole`, rounded to two decimals.
pub fn percent(part: usize, whole: usize) -> Result<f64, MetricsError> {
    if whole == 0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok(round2(100.0 * part as f64 / whole as f64))
}

pub fn percent_inspected(report: &RunReport, of: Denominator) -> Result<f64, MetricsError> {
    let whole = match of {
        Denominator::Object => report.object_voxels,
        Denominator::Inspectable => report.inspectable_voxels,
    };
    percent(report.inspected, whole)
}

/// Coverage of inspectable voxels at a time or distance cutoff, taken from
/// the last sample at or before the cutoff. A run with nothing inspectable
/// counts as fully covered.
pub fn percent_at(report: &RunReport, cutoff: Cutoff) -> f64 {
    let within = |s: &Sample| match cutoff {
        Cutoff::Distance(d) => s.distance_m <= d,
        Cutoff::Time(t) => report.sample_time_s(s) <= t,
    };
    let inspected = report
        .samples
        .iter()
        .take_while(|s| within(s))
        .last()
        .map_or(0, |s| s.inspected);
    percent(inspected, report.inspectable_voxels).unwrap_or(100.0)
}

const COLUMNS: [&str; 5] = ["Scene", "ObjectVoxels", "Inspected", "Time(min)", "Distance(m)"];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub scene: String,
    pub object_voxels: usize,
    pub inspected: usize,
    pub time_min: f64,
    pub distance_m: f64,
}

impl TableRow {
    fn cells(&self) -> [String; 5] {
        [
            self.scene.clone(),
            self.object_voxels.to_string(),
            self.inspected.to_string(),
            format!("{:.2}", self.time_min),
            format!("{:.2}", self.distance_m),
        ]
    }
}

fn rows(reports: &[RunReport]) -> Vec<TableRow> {
    let mut rows: Vec<TableRow> = reports
        .iter()
        .map(|r| TableRow {
            scene: r.scene.clone(),
            object_voxels: r.object_voxels,
            inspected: r.inspected,
            time_min: r.total_time_s() / 60.0,
            distance_m: r.distance_m,
        })
        .collect();
    rows.sort_by(|a, b| a.scene.cmp(&b.scene));
    rows
}

pub fn render_csv(reports: &[RunReport]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rows(reports) {
        out.push_str(&r.cells().join(","));
        out.push('\n');
    }
    out
}

pub fn render_markdown(reports: &[RunReport]) -> String {
    let rows: Vec<[String; 5]> = rows(reports).iter().map(TableRow::cells).collect();
    let mut width: [usize; 5] = COLUMNS.map(str::len);
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        out.push('|');
        for (i, c) in cells.iter().enumerate() {
            // scene left aligned, numbers right aligned
            if i == 0 {
                let _ = write!(out, " {:<w$} |", c, w = width[i]);
            } else {
                let _ = write!(out, " {:>w$} |", c, w = width[i]);
            }
        }
        out.push('\n');
    };
    line(&COLUMNS.map(String::from), &mut out);
    out.push('|');
    for (i, w) in width.iter().enumerate() {
        if i == 0 {
            let _ = write!(out, " {} |", "-".repeat(*w));
        } else {
            let _ = write!(out, " {}: |", "-".repeat(w - 1));
        }
    }
    out.push('\n');
    for r in &rows {
        line(r, &mut out);
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<TableRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == COLUMNS.join(",") => {}
        _ => {
            return Err(MetricsError::Table {
                line: 1,
                msg: "unexpected header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let err = |msg: &str| MetricsError::Table {
                line: n + 1,
                msg: msg.into(),
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(err("expected 5 fields"));
            }
            Ok(TableRow {
                scene: f[0].to_string(),
                object_voxels: f[1].parse().map_err(|_| err("bad ObjectVoxels"))?,
                inspected: f[2].parse().map_err(|_| err("bad Inspected"))?,
                time_min: f[3].parse().map_err(|_| err("bad Time"))?,
                distance_m: f[4].parse().map_err(|_| err("bad Distance"))?,
            })
        })
        .collect()
}
