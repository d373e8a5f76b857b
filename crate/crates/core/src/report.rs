//! Rendering of tables, clip indices, graphs and QC flags to files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{emit_dot, graph_json, StateGraph};
use crate::model::InverseInstance;
use crate::qc::QcFlag;
use crate::stats::{AggregateTable, Cell};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Md,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "md" | "markdown" => Ok(OutputFormat::Md),
            other => Err(format!("unknown format `{other}` (expected csv, json or md)")),
        }
    }
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Md];

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Md => "md",
        }
    }

    /// Parses a comma-separated list such as `csv,json`.
    pub fn parse_list(s: &str) -> Result<Vec<OutputFormat>, String> {
        let mut out: Vec<OutputFormat> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err("no output format given".into());
        }
        Ok(out)
    }
}

pub fn format_rho(rho: f64) -> String {
    format!("{rho:.2}")
}

/// Three decimals; anything that would round to 0.000 prints as `<0.001`.
pub fn format_p(p: f64) -> String {
    if p < 0.0005 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

pub fn format_percent(pct: f64) -> String {
    format!("{pct:.1}%")
}

pub fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Empty => String::new(),
        Cell::Text { value } => value.clone(),
        Cell::Count { value } => value.to_string(),
        Cell::Ratio { numerator, denominator } => format!(
            "{numerator}/{denominator} ({})",
            format_percent(100.0 * *numerator as f64 / *denominator as f64)
        ),
        Cell::Rho { value } => format_rho(*value),
        Cell::PValue { value } => format_p(*value),
        Cell::Number { value } => format!("{value:.3}"),
    }
}

pub fn render_csv(table: &AggregateTable) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(format_cell))?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_markdown(table: &AggregateTable) -> String {
    let esc = |s: String| s.replace('|', "\\|");
    let mut out = format!("**{}**\n\n", table.title);
    let _ = writeln!(
        out,
        "| {} |",
        table.columns.iter().cloned().map(esc).collect::<Vec<_>>().join(" | ")
    );
    let _ = writeln!(out, "|{}", "---|".repeat(table.columns.len()));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(format_cell).map(esc).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

pub fn render_json(table: &AggregateTable) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(table)? + "\n")
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ReportError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<dir>/<table.name>.<ext>` for each format and returns the paths.
pub fn render_tables(
    dir: &Path,
    tables: &[AggregateTable],
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    for table in tables {
        for &format in formats {
            let body = match format {
                OutputFormat::Csv => render_csv(table)?,
                OutputFormat::Json => render_json(table)?,
                OutputFormat::Md => render_markdown(table),
            };
            let path = dir.join(format!("{}.{}", table.name, format.extension()));
            write_file(&path, &body)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// One video clip per detected instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRow {
    pub trial_id: String,
    pub task: String,
    pub gesture_id: String,
    pub type_key: String,
    pub start_frame: u32,
    pub end_frame: u32,
    pub duration_seconds: f64,
}

/// Rows sorted by (trial, start frame). The clip spans from the first
/// member's start to the last member's end; `fps` maps a trial id to its
/// frame rate.
pub fn clip_index(instances: &[InverseInstance], fps: impl Fn(&str) -> f64) -> Vec<ClipRow> {
    let mut rows: Vec<ClipRow> = instances
        .iter()
        .map(|inst| {
            let trial_id = inst.trial.as_ref().map(|t| t.trial_id.clone()).unwrap_or_default();
            let (start, end) = (inst.start_frame(), inst.end_frame().max(inst.start_frame()));
            ClipRow {
                task: inst
                    .trial
                    .as_ref()
                    .map(|t| t.task.code().to_string())
                    .unwrap_or_default(),
                gesture_id: inst
                    .gesture
                    .as_ref()
                    .map_or_else(|| "outside".to_string(), |g| g.gesture.to_string()),
                type_key: inst.type_key.label(),
                start_frame: start,
                end_frame: end,
                duration_seconds: f64::from(end - start + 1) / fps(&trial_id),
                trial_id,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (&a.trial_id, a.start_frame, a.end_frame, &a.type_key).cmp(&(
            &b.trial_id,
            b.start_frame,
            b.end_frame,
            &b.type_key,
        ))
    });
    rows
}

/// Serializes rows with a header; an empty slice yields the header only.
pub fn rows_to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const CLIP_HEADER: [&str; 7] = [
    "trial_id",
    "task",
    "gesture_id",
    "type_key",
    "start_frame",
    "end_frame",
    "duration_seconds",
];

pub fn write_clip_index(path: &Path, rows: &[ClipRow]) -> Result<(), ReportError> {
    write_file(path, &rows_to_csv(rows, &CLIP_HEADER)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ReportError> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), ReportError> {
    write_file(path, contents)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FlagRow {
    trial_id: String,
    task: String,
    skill: String,
    gesture_id: String,
    gesture_ordinal: usize,
    gesture_start: u32,
    gesture_end: u32,
    kind: String,
    suggested_gesture: String,
    neighbor: String,
    mps: String,
    note: String,
}

pub fn flags_csv(flags: &[QcFlag]) -> Result<String, ReportError> {
    let rows: Vec<FlagRow> = flags
        .iter()
        .map(|f| FlagRow {
            trial_id: f.trial.trial_id.clone(),
            task: f.trial.task.code().into(),
            skill: f.trial.skill.code().into(),
            gesture_id: f.gesture.gesture.to_string(),
            gesture_ordinal: f.gesture.ordinal,
            gesture_start: f.gesture.start_frame,
            gesture_end: f.gesture.end_frame,
            kind: f.kind.to_string(),
            suggested_gesture: f.suggested_gesture.map(|g| g.to_string()).unwrap_or_default(),
            neighbor: f
                .neighbor
                .as_ref()
                .map(|n| format!("{} {}", n.gesture.gesture, n.side.as_str()))
                .unwrap_or_default(),
            mps: f.mp_list(),
            note: f.note.clone(),
        })
        .collect();
    rows_to_csv(
        &rows,
        &[
            "trial_id",
            "task",
            "skill",
            "gesture_id",
            "gesture_ordinal",
            "gesture_start",
            "gesture_end",
            "kind",
            "suggested_gesture",
            "neighbor",
            "mps",
            "note",
        ],
    )
}

/// Writes `<stem>.dot` and `<stem>.json` for one graph.
pub fn write_graph(dir: &Path, stem: &str, g: &StateGraph) -> Result<(), ReportError> {
    write_file(&dir.join(format!("{stem}.dot")), &emit_dot(g, stem))?;
    write_json(&dir.join(format!("{stem}.json")), &graph_json(g, stem))
}

pub fn histogram_csv(hist: &[(String, usize)]) -> Result<String, ReportError> {
    rows_to_csv(hist, &["sequence", "count"])
}
