//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on validation errors (a JSON report goes to stderr), 2 on
//! usage errors.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{scan_dataset, Corpus, IngestError, LoadReport};
use crate::inverse::{CountingMode, DetectionOptions};
use crate::model::{builtin_canonical_table, CanonicalTable, InverseInstance, Task};
use crate::pipeline::Analysis;
use crate::report::{
    clip_index, flags_csv, histogram_csv, render_tables, rows_to_csv, write_clip_index, write_graph, write_json,
    write_text, OutputFormat, ReportError,
};
use crate::seqops::{sequence_histogram, sequence_key};
use crate::synth::{generate_corpus, write_corpus, CorpusSpec, SynthError};

pub const CONFIG_FILE: &str = "mpscope.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskSelection {
    All,
    One(Task),
}

impl FromStr for TaskSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(TaskSelection::All);
        }
        s.parse().map(TaskSelection::One).map_err(|e| format!("{e}"))
    }
}

impl fmt::Display for TaskSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskSelection::All => f.write_str("all"),
            TaskSelection::One(t) => f.write_str(t.code()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mpscope",
    version,
    about = "Inverse motion-primitive analytics for surgical activity transcripts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub shared: SharedArgs,
}

#[derive(Debug, Args)]
pub struct SharedArgs {
    /// Dataset root (meta.csv plus one directory per task)
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Where outputs are written
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// S, NP, KT or all
    #[arg(long, global = true)]
    pub task: Option<TaskSelection>,
    /// Override the frame rate of every trial
    #[arg(long, global = true)]
    pub fps: Option<f64>,
    /// greedy, pairs or runs
    #[arg(long, global = true)]
    pub counting_mode: Option<CountingMode>,
    /// Keep negating pairs that are part of the canonical sequence
    #[arg(long, global = true)]
    pub no_exclude_canonical: bool,
    /// Comma-separated list of csv, json, md
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Fail instead of warning when trials are incomplete
    #[arg(long, global = true)]
    pub strict: bool,
    /// Drop graph edges seen fewer times than this
    #[arg(long, global = true)]
    pub min_edge_count: Option<u64>,
    /// Config file (defaults to ./mpscope.toml when present)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write per-gesture MP sequences and sequence histograms
    Extract,
    /// Detect inverse MPs; write the clip index and per-gesture instances
    Detect,
    /// Spearman correlation of inverse-MP count and duration with GRS
    Correlate,
    /// State-transition graphs per task, gesture and skill
    Graph,
    /// Boundary and mislabel quality-control flags
    Qc,
    /// Run everything
    Report,
    /// Write a seeded synthetic dataset
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials_per_skill: Option<usize>,
    #[arg(long)]
    pub gestures_per_trial: Option<usize>,
    #[arg(long)]
    pub jitter: Option<u32>,
}

/// Keys accepted in `mpscope.toml`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub task: Option<String>,
    pub fps: Option<f64>,
    pub counting_mode: Option<String>,
    pub exclude_canonical: Option<bool>,
    pub format: Option<String>,
    pub strict: Option<bool>,
    pub min_edge_count: Option<u64>,
    pub seed: Option<u64>,
    pub trials_per_skill: Option<usize>,
    pub gestures_per_trial: Option<usize>,
    pub jitter: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub task: TaskSelection,
    pub fps: Option<f64>,
    pub detection: DetectionOptions,
    pub formats: Vec<OutputFormat>,
    pub strict: bool,
    pub min_edge_count: u64,
    pub synth: CorpusSpec,
}

pub const DEFAULT_OUT_DIR: &str = "mpscope-out";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Ingest(#[from] IngestError),
    #[error("{} trial(s) are incomplete or inconsistent", .0.issues.len())]
    Incomplete(LoadReport),
    #[error("no complete trials found under {0}")]
    Empty(PathBuf),
    #[error("{0}")]
    Report(#[from] ReportError),
    #[error("{0}")]
    Synth(#[from] SynthError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Ingest(_) => "ingest",
            CliError::Incomplete(_) => "incomplete_dataset",
            CliError::Empty(_) => "empty_dataset",
            CliError::Report(_) => "output",
            CliError::Synth(_) => "synth",
        }
    }

    /// Machine-readable report printed on exit code 1.
    pub fn to_json(&self) -> serde_json::Value {
        let issues = match self {
            CliError::Incomplete(r) => serde_json::to_value(&r.issues).unwrap_or_default(),
            _ => serde_json::Value::Array(Vec::new()),
        };
        serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.to_string(),
            "issues": issues,
        })
    }
}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn load_config(explicit: Option<&Path>) -> Result<FileConfig, CliError> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let p = PathBuf::from(CONFIG_FILE);
            if !p.is_file() {
                return Ok(FileConfig::default());
            }
            p
        }
    };
    let text = fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Flags win over the config file, which wins over defaults.
pub fn resolve(shared: &SharedArgs, synth: Option<&SynthArgs>, file: &FileConfig) -> Result<Settings, CliError> {
    let task = match (&shared.task, &file.task) {
        (Some(t), _) => *t,
        (None, Some(s)) => s.parse().map_err(config_err)?,
        (None, None) => TaskSelection::All,
    };
    let counting_mode = match (shared.counting_mode, &file.counting_mode) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse().map_err(config_err)?,
        (None, None) => CountingMode::default(),
    };
    let exclude_canonical = if shared.no_exclude_canonical {
        false
    } else {
        file.exclude_canonical.unwrap_or(true)
    };
    let formats = match shared.format.as_deref().or(file.format.as_deref()) {
        Some(s) => OutputFormat::parse_list(s).map_err(config_err)?,
        None => OutputFormat::ALL.to_vec(),
    };
    let fps = shared.fps.or(file.fps);
    if let Some(f) = fps {
        if !(f.is_finite() && f > 0.0) {
            return Err(config_err(format!("fps must be positive, got {f}")));
        }
    }
    let mut spec = CorpusSpec::new(synth.and_then(|s| s.seed).or(file.seed).unwrap_or(DEFAULT_SEED));
    if let Some(n) = synth.and_then(|s| s.trials_per_skill).or(file.trials_per_skill) {
        spec.trials_per_skill = n;
    }
    if let Some(n) = synth.and_then(|s| s.gestures_per_trial).or(file.gestures_per_trial) {
        spec.gestures_per_trial = n;
    }
    if let Some(j) = synth.and_then(|s| s.jitter).or(file.jitter) {
        spec.boundary_jitter_frames = j;
    }
    if let TaskSelection::One(t) = task {
        spec.tasks = vec![t];
    }
    Ok(Settings {
        data_dir: shared.data_dir.clone().or_else(|| file.data_dir.clone()),
        out_dir: shared
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        task,
        fps,
        detection: DetectionOptions {
            counting_mode,
            exclude_canonical,
            enable_push_pull_rule: true,
        },
        formats,
        strict: shared.strict || file.strict.unwrap_or(false),
        min_edge_count: shared.min_edge_count.or(file.min_edge_count).unwrap_or(1),
        synth: spec,
    })
}

/// Loads the dataset, applies the task filter and fps override. Incomplete
/// trials become warnings, or an error under `--strict`.
pub fn load(settings: &Settings) -> Result<(Corpus, LoadReport), CliError> {
    let dir = settings
        .data_dir
        .clone()
        .ok_or_else(|| config_err("--data-dir is required"))?;
    let (mut corpus, report) = scan_dataset(&dir)?;
    if settings.strict && !report.is_clean() {
        return Err(CliError::Incomplete(report));
    }
    if let TaskSelection::One(task) = settings.task {
        corpus.trials.retain(|t| t.record.task == task);
    }
    if let Some(fps) = settings.fps {
        corpus.trials.iter_mut().for_each(|t| t.record.fps = fps);
    }
    if corpus.trials.is_empty() {
        return Err(CliError::Empty(dir));
    }
    Ok((corpus, report))
}

#[derive(Debug, Serialize)]
struct SequenceRow {
    trial_id: String,
    task: String,
    skill: String,
    gesture_id: String,
    gesture_ordinal: usize,
    start_frame: u32,
    end_frame: u32,
    mp_count: usize,
    sequence: String,
}

#[derive(Debug, Serialize)]
struct GestureInstanceRow {
    trial_id: String,
    task: String,
    skill: String,
    gesture_id: String,
    gesture_ordinal: usize,
    type_key: String,
    start_frame: u32,
    end_frame: u32,
    duration_seconds: f64,
    members: String,
}

#[derive(Debug, Serialize)]
struct FeatureRow {
    trial_id: String,
    task: String,
    skill: String,
    grs_total: f64,
    inverse_count: usize,
    inverse_duration_seconds: f64,
}

fn write_sequences(out: &Path, a: &Analysis, formats: &[OutputFormat]) -> Result<usize, CliError> {
    let rows: Vec<SequenceRow> = a
        .sequences
        .iter()
        .map(|s| SequenceRow {
            trial_id: s.trial.trial_id.clone(),
            task: s.trial.task.code().into(),
            skill: s.trial.skill.code().into(),
            gesture_id: s.gesture.gesture.to_string(),
            gesture_ordinal: s.gesture.ordinal,
            start_frame: s.gesture.start_frame,
            end_frame: s.gesture.end_frame,
            mp_count: s.mps.len(),
            sequence: sequence_key(&s.mps),
        })
        .collect();
    let header = [
        "trial_id",
        "task",
        "skill",
        "gesture_id",
        "gesture_ordinal",
        "start_frame",
        "end_frame",
        "mp_count",
        "sequence",
    ];
    write_text(&out.join("sequences/sequences.csv"), &rows_to_csv(&rows, &header)?)?;
    if formats.contains(&OutputFormat::Json) {
        write_json(&out.join("sequences/sequences.json"), &a.sequences)?;
    }
    let mut groups: Vec<(Task, crate::model::GestureId)> =
        a.sequences.iter().map(|s| (s.trial.task, s.gesture.gesture)).collect();
    groups.sort();
    groups.dedup();
    for (task, g) in &groups {
        let hist = sequence_histogram(&a.sequences, *task, *g);
        write_text(
            &out.join(format!("histograms/{}_{g}.csv", task.code())),
            &histogram_csv(&hist)?,
        )?;
    }
    Ok(rows.len())
}

fn gesture_rows(a: &Analysis, instances: &[InverseInstance]) -> Vec<GestureInstanceRow> {
    let mut rows: Vec<GestureInstanceRow> = instances
        .iter()
        .filter_map(|i| {
            let (trial, g) = (i.trial.as_ref()?, i.gesture.as_ref()?);
            Some(GestureInstanceRow {
                trial_id: trial.trial_id.clone(),
                task: trial.task.code().into(),
                skill: trial.skill.code().into(),
                gesture_id: g.gesture.to_string(),
                gesture_ordinal: g.ordinal,
                type_key: i.type_key.label(),
                start_frame: i.start_frame(),
                end_frame: i.end_frame(),
                duration_seconds: f64::from(i.duration_frames) / a.fps_of(&trial.trial_id),
                members: sequence_key(&i.members),
            })
        })
        .collect();
    rows.sort_by(|x, y| {
        (&x.trial_id, x.gesture_ordinal, x.start_frame, &x.type_key).cmp(&(
            &y.trial_id,
            y.gesture_ordinal,
            y.start_frame,
            &y.type_key,
        ))
    });
    rows
}

fn write_detect(out: &Path, a: &Analysis, table: &CanonicalTable, formats: &[OutputFormat]) -> Result<usize, CliError> {
    let clips = clip_index(&a.trial_instances, |id| a.fps_of(id));
    write_clip_index(&out.join("clips/index.csv"), &clips)?;
    let rows = gesture_rows(a, &a.gesture_instances);
    let header = [
        "trial_id",
        "task",
        "skill",
        "gesture_id",
        "gesture_ordinal",
        "type_key",
        "start_frame",
        "end_frame",
        "duration_seconds",
        "members",
    ];
    write_text(&out.join("clips/by_gesture.csv"), &rows_to_csv(&rows, &header)?)?;
    if formats.contains(&OutputFormat::Json) {
        write_json(&out.join("clips/index.json"), &clips)?;
        write_json(&out.join("clips/by_gesture.json"), &a.gesture_instances)?;
    }
    let mut tables = a.count_tables(table);
    tables.extend(a.coverage_tables());
    render_tables(&out.join("tables"), &tables, formats)?;
    Ok(clips.len())
}

fn write_correlate(out: &Path, a: &Analysis, formats: &[OutputFormat]) -> Result<(), CliError> {
    render_tables(&out.join("tables"), &a.correlation_tables(), formats)?;
    let rows: Vec<FeatureRow> = a
        .features
        .iter()
        .map(|f| FeatureRow {
            trial_id: f.record.trial_id(),
            task: f.record.task.code().into(),
            skill: f.record.skill.code().into(),
            grs_total: f.record.grs_total,
            inverse_count: f.inverse_count,
            inverse_duration_seconds: f.inverse_duration_seconds,
        })
        .collect();
    let header = [
        "trial_id",
        "task",
        "skill",
        "grs_total",
        "inverse_count",
        "inverse_duration_seconds",
    ];
    write_text(&out.join("tables/trial_features.csv"), &rows_to_csv(&rows, &header)?)?;
    Ok(())
}

fn write_graphs(out: &Path, a: &Analysis, table: &CanonicalTable, settings: &Settings) -> Result<usize, CliError> {
    let graphs = a.graphs(table, &settings.detection);
    for ((task, g, skill), graph) in &graphs {
        let stem = format!("{}_{g}_{}", task.code(), skill.code());
        write_graph(&out.join("graphs"), &stem, &graph.pruned(settings.min_edge_count))?;
    }
    Ok(graphs.len())
}

fn write_qc(out: &Path, a: &Analysis, table: &CanonicalTable, formats: &[OutputFormat]) -> Result<usize, CliError> {
    let (flags, boundary) = a.qc(table);
    write_text(&out.join("qc/flags.csv"), &flags_csv(&flags)?)?;
    write_json(&out.join("qc/flags.json"), &flags)?;
    render_tables(&out.join("tables"), &[boundary], formats)?;
    Ok(flags.len())
}

fn write_warnings(out: &Path, report: &LoadReport, err: &mut dyn Write) -> Result<(), CliError> {
    for issue in &report.issues {
        let _ = writeln!(err, "warning: {}: {}", issue.trial_id, issue.reason);
    }
    if !report.is_clean() {
        write_json(&out.join("warnings.json"), &report.issues)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    trials: usize,
    tasks: Vec<&'static str>,
    counting_mode: &'static str,
    exclude_canonical: bool,
    gesture_clips: usize,
    analysed_clips: usize,
    gesture_level_instances: usize,
    trial_level_instances: usize,
    qc_flags: usize,
    graphs: usize,
    /// MPs straddling a gesture boundary, counted in both gestures.
    boundary_mps: usize,
    incomplete_trials: &'a [crate::ingest::InconsistentTrial],
    notes: &'static [&'static str],
}

const REPORT_NOTES: &[&str] = &[
    "MPs that straddle a gesture boundary appear whole in both neighbouring sequences, \
     although the video clip of either gesture shows only part of them.",
];

fn straddler_count(a: &Analysis) -> usize {
    a.trials
        .iter()
        .map(|t| {
            t.mps
                .iter()
                .filter(|m| {
                    t.gestures
                        .iter()
                        .filter(|g| m.intersects(g.start_frame, g.end_frame))
                        .count()
                        > 1
                })
                .count()
        })
        .sum()
}

fn execute(cmd: &Command, settings: &Settings, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let table = builtin_canonical_table();
    let dir = &settings.out_dir;
    if let Command::Synth(_) = cmd {
        let synth = generate_corpus(&settings.synth)?;
        write_corpus(dir, &synth)?;
        let _ = writeln!(
            out,
            "synth: wrote {} trials to {} (seed {})",
            synth.corpus.trials.len(),
            dir.display(),
            synth.seed
        );
        return Ok(());
    }

    let (corpus, load_report) = load(settings)?;
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.clone(),
        source,
    })?;
    write_warnings(dir, &load_report, err)?;
    let a = Analysis::run(&corpus, &table, &settings.detection);
    let fmts = &settings.formats;
    match cmd {
        Command::Extract => {
            let n = write_sequences(dir, &a, fmts)?;
            let _ = writeln!(out, "extract: {n} gesture sequences from {} trials", a.trials.len());
        }
        Command::Detect => {
            let n = write_detect(dir, &a, &table, fmts)?;
            let _ = writeln!(
                out,
                "detect: {n} inverse MPs in {} trials ({} gesture-level)",
                a.trials.len(),
                a.gesture_instances.len()
            );
        }
        Command::Correlate => {
            write_correlate(dir, &a, fmts)?;
            let _ = writeln!(out, "correlate: {} trials", a.trials.len());
        }
        Command::Graph => {
            let n = write_graphs(dir, &a, &table, settings)?;
            let _ = writeln!(out, "graph: {n} graphs");
        }
        Command::Qc => {
            let n = write_qc(dir, &a, &table, fmts)?;
            let _ = writeln!(out, "qc: {n} flags");
        }
        Command::Report => {
            write_sequences(dir, &a, fmts)?;
            let clips = write_detect(dir, &a, &table, fmts)?;
            write_correlate(dir, &a, fmts)?;
            let graphs = write_graphs(dir, &a, &table, settings)?;
            let flags = write_qc(dir, &a, &table, fmts)?;
            let summary = Summary {
                trials: a.trials.len(),
                tasks: a.tasks().iter().map(|t| t.code()).collect(),
                counting_mode: settings.detection.counting_mode.as_str(),
                exclude_canonical: settings.detection.exclude_canonical,
                gesture_clips: a.sequences.len(),
                analysed_clips: a.analysed.len(),
                gesture_level_instances: a.gesture_instances.len(),
                trial_level_instances: clips,
                qc_flags: flags,
                graphs,
                boundary_mps: straddler_count(&a),
                incomplete_trials: &load_report.issues,
                notes: REPORT_NOTES,
            };
            write_json(&dir.join("summary.json"), &summary)?;
            let _ = writeln!(
                out,
                "report: {} trials, {clips} inverse MPs, {flags} QC flags, outputs in {}",
                a.trials.len(),
                dir.display()
            );
        }
        Command::Synth(_) => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    let synth_args = match &cli.command {
        Command::Synth(s) => Some(s),
        _ => None,
    };
    let result = load_config(cli.shared.config.as_deref())
        .and_then(|file| resolve(&cli.shared, synth_args, &file))
        .and_then(|settings| execute(&cli.command, &settings, out, err));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(
                err,
                "{}",
                serde_json::to_string_pretty(&e.to_json()).unwrap_or_default()
            );
            1
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("mpscope").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let cli = parse(&["detect", "--counting-mode", "runs", "--task", "KT"]);
        let file: FileConfig =
            toml::from_str("counting_mode = \"pairs\"\ntask = \"S\"\nexclude_canonical = false\nmin_edge_count = 3\n")
                .unwrap();
        let s = resolve(&cli.shared, None, &file).unwrap();
        assert_eq!(s.detection.counting_mode, CountingMode::MaximalRun);
        assert_eq!(s.task, TaskSelection::One(Task::KnotTying));
        assert!(!s.detection.exclude_canonical);
        assert_eq!(s.min_edge_count, 3);
    }

    #[test]
    fn defaults() {
        let cli = parse(&["report"]);
        let s = resolve(&cli.shared, None, &FileConfig::default()).unwrap();
        assert_eq!(s.detection, DetectionOptions::default());
        assert_eq!(s.task, TaskSelection::All);
        assert_eq!(s.formats, OutputFormat::ALL);
        assert_eq!(s.min_edge_count, 1);
        assert_eq!(s.out_dir, PathBuf::from(DEFAULT_OUT_DIR));
        assert!(!s.strict);
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }

    #[test]
    fn bad_config_values_are_validation_errors() {
        let cli = parse(&["report"]);
        let file: FileConfig = toml::from_str("counting_mode = \"all\"").unwrap();
        assert!(matches!(resolve(&cli.shared, None, &file), Err(CliError::Config(_))));
        let cli = parse(&["report", "--fps", "0"]);
        assert!(matches!(
            resolve(&cli.shared, None, &FileConfig::default()),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["mpscope", "detect", "--bogus"], &mut out, &mut err), 2);
        assert_eq!(run_with(["mpscope", "detect", "--task", "XX"], &mut out, &mut err), 2);
        assert_eq!(run_with(["mpscope"], &mut out, &mut err), 2);
    }

    #[test]
    fn missing_data_dir_exit_1_with_json() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(
            [
                "mpscope",
                "detect",
                "--data-dir",
                "/nonexistent/mpscope",
                "--config",
                "/nonexistent/cfg.toml",
            ],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 1);
        let v: serde_json::Value = serde_json::from_slice(&err).unwrap();
        assert_eq!(v["status"], "error");
        assert_eq!(v["kind"], "config");
    }
}
