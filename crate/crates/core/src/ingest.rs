//! Transcript and metadata parsing, plus the dataset directory walker.
//!
//! Gesture transcript: one `start end Gk` per line.
//! MP transcript: one `start end Verb(Actor, Object)` per line.
//! Metadata: CSV with `task,subject,trial,skill,grs_total`, the six subscore
//! columns and an optional `fps` column.
//!
//! Blank lines and lines starting with `#` are ignored in both transcripts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    transcript_order, Frame, GestureId, GestureInstance, GrsSubscore, ModelError, MotionPrimitive, MpSignature, Skill,
    Subscores, Task, TrialRecord, DEFAULT_FPS,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed line ({reason})")]
    MalformedLine { line: usize, reason: String },
    #[error("line {0}: interval overlaps the previous gesture")]
    OverlapError(usize),
    #[error("line {0}: unknown gesture id")]
    UnknownGesture(usize),
    #[error("line {0}: unknown verb")]
    UnknownVerb(usize),
    #[error("line {0}: overlaps an earlier motion primitive on the same channel")]
    SameChannelOverlap(usize),
    #[error("missing metadata column `{0}`")]
    MissingColumn(String),
    #[error("metadata row {0}: bad skill code")]
    BadSkillCode(usize),
    #[error("metadata row {row}: bad value in column `{column}`")]
    BadValue { row: usize, column: String },
    #[error("metadata: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One trial: metadata, gesture transcript and MP transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialData {
    pub record: TrialRecord,
    pub gestures: Vec<GestureInstance>,
    pub mps: Vec<MotionPrimitive>,
}

impl TrialData {
    pub fn trial_id(&self) -> String {
        self.record.trial_id()
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_frame(tok: &str, line: usize) -> Result<Frame, IngestError> {
    tok.parse().map_err(|_| IngestError::MalformedLine {
        line,
        reason: format!("`{tok}` is not a frame number"),
    })
}

fn parse_interval<'a>(tokens: &mut impl Iterator<Item = &'a str>, line: usize) -> Result<(Frame, Frame), IngestError> {
    let mut next = || {
        tokens.next().ok_or_else(|| IngestError::MalformedLine {
            line,
            reason: "expected `start end label`".into(),
        })
    };
    let start = parse_frame(next()?, line)?;
    let end = parse_frame(next()?, line)?;
    if end < start {
        return Err(IngestError::MalformedLine {
            line,
            reason: format!("end {end} precedes start {start}"),
        });
    }
    Ok((start, end))
}

pub fn parse_gesture_transcript(text: &str) -> Result<Vec<GestureInstance>, IngestError> {
    let mut out: Vec<GestureInstance> = Vec::new();
    for (line, content) in content_lines(text) {
        let mut tokens = content.split_whitespace();
        let (start, end) = parse_interval(&mut tokens, line)?;
        let label = tokens.next().ok_or_else(|| IngestError::MalformedLine {
            line,
            reason: "missing gesture label".into(),
        })?;
        if tokens.next().is_some() {
            return Err(IngestError::MalformedLine {
                line,
                reason: "trailing tokens".into(),
            });
        }
        let gesture: GestureId = label.parse().map_err(|_| IngestError::UnknownGesture(line))?;
        if let Some(prev) = out.last() {
            if start <= prev.end_frame {
                return Err(IngestError::OverlapError(line));
            }
        }
        out.push(GestureInstance {
            gesture,
            start_frame: start,
            end_frame: end,
            ordinal: out.len(),
        });
    }
    Ok(out)
}

pub fn render_gesture_transcript(gestures: &[GestureInstance]) -> String {
    gestures
        .iter()
        .map(|g| format!("{} {} {}\n", g.start_frame, g.end_frame, g.gesture))
        .collect()
}

pub fn parse_mp_transcript(text: &str) -> Result<Vec<MotionPrimitive>, IngestError> {
    let mut parsed: Vec<(usize, MotionPrimitive)> = Vec::new();
    for (line, content) in content_lines(text) {
        let mut tokens = content.splitn(3, char::is_whitespace);
        let (start, end) = parse_interval(&mut tokens, line)?;
        let label = tokens.next().map(str::trim).unwrap_or_default();
        let signature: MpSignature = label.parse().map_err(|e| match e {
            ModelError::UnknownVerb(_) => IngestError::UnknownVerb(line),
            other => IngestError::MalformedLine {
                line,
                reason: other.to_string(),
            },
        })?;
        let mp = MotionPrimitive::new(signature, start, end).map_err(|e| IngestError::MalformedLine {
            line,
            reason: e.to_string(),
        })?;
        parsed.push((line, mp));
    }
    parsed.sort_by(|a, b| transcript_order(&a.1, &b.1));

    let mut last_end: HashMap<_, Frame> = HashMap::new();
    for (line, mp) in &parsed {
        if let Some(&end) = last_end.get(&mp.channel()) {
            if mp.start_frame <= end {
                return Err(IngestError::SameChannelOverlap(*line));
            }
        }
        last_end.insert(mp.channel(), mp.end_frame);
    }
    Ok(parsed.into_iter().map(|(_, mp)| mp).collect())
}

pub fn render_mp_transcript(mps: &[MotionPrimitive]) -> String {
    mps.iter()
        .map(|m| format!("{} {} {}\n", m.start_frame, m.end_frame, m.label()))
        .collect()
}

const META_FIXED: [&str; 5] = ["task", "subject", "trial", "skill", "grs_total"];

pub fn parse_metadata(csv_text: &str) -> Result<Vec<TrialRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let fixed: Vec<usize> = META_FIXED.iter().map(|c| column(c)).collect::<Result<_, _>>()?;
    let subs: Vec<usize> = GrsSubscore::ALL
        .iter()
        .map(|s| column(s.column()))
        .collect::<Result<_, _>>()?;
    let fps_col = column("fps").ok();

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let bad = |name: &str| IngestError::BadValue {
            row,
            column: name.to_string(),
        };
        let number = |idx: usize, name: &str| -> Result<f64, IngestError> {
            field(idx)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(name))
        };

        let task: Task = field(fixed[0]).parse().map_err(|_| bad("task"))?;
        let subject = field(fixed[1]).to_string();
        if subject.is_empty() || !subject.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(bad("subject"));
        }
        let trial_index: u32 = field(fixed[2]).parse().map_err(|_| bad("trial"))?;
        let skill: Skill = field(fixed[3]).parse().map_err(|_| IngestError::BadSkillCode(row))?;
        let grs_total = number(fixed[4], "grs_total")?;
        let mut sub_values = [0.0; 6];
        for (k, (&idx, which)) in subs.iter().zip(GrsSubscore::ALL).enumerate() {
            sub_values[k] = number(idx, which.column())?;
        }
        let fps = match fps_col {
            Some(idx) if !field(idx).is_empty() => {
                let v = number(idx, "fps")?;
                if v <= 0.0 {
                    return Err(bad("fps"));
                }
                v
            }
            _ => DEFAULT_FPS,
        };
        let subscores = Subscores::from_fn(|s| sub_values[s as usize]);
        out.push(TrialRecord {
            task,
            subject,
            trial_index,
            skill,
            grs_total,
            subscores,
            fps,
        });
    }
    Ok(out)
}

pub fn render_metadata(records: &[TrialRecord]) -> String {
    let mut header: Vec<&str> = META_FIXED.to_vec();
    header.extend(GrsSubscore::ALL.iter().map(|s| s.column()));
    header.push("fps");
    let mut out = header.join(",");
    out.push('\n');
    for r in records {
        let mut row = vec![
            r.task.dir_name().to_string(),
            r.subject.clone(),
            r.trial_index.to_string(),
            r.skill.code().to_string(),
            r.grs_total.to_string(),
        ];
        row.extend(GrsSubscore::ALL.iter().map(|&s| r.subscores.get(s).to_string()));
        row.push(r.fps.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// A trial that could not be loaded completely.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InconsistentTrial {
    pub trial_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub issues: Vec<InconsistentTrial>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub trials: Vec<TrialData>,
}

impl Corpus {
    pub fn for_task(&self, task: Task) -> impl Iterator<Item = &TrialData> {
        self.trials.iter().filter(move |t| t.record.task == task)
    }

    pub fn tasks(&self) -> Vec<Task> {
        let set: BTreeSet<Task> = self.trials.iter().map(|t| t.record.task).collect();
        set.into_iter().collect()
    }
}

pub const META_FILE: &str = "meta.csv";
pub const GESTURE_DIR: &str = "gestures";
pub const MP_DIR: &str = "motion_primitives";

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|e| IngestError::io(path, e))
}

fn transcript_stems(dir: &Path) -> Result<BTreeSet<String>, IngestError> {
    let mut stems = BTreeSet::new();
    if !dir.is_dir() {
        return Ok(stems);
    }
    for entry in fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let path = entry.map_err(|e| IngestError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.insert(stem.to_string());
            }
        }
    }
    Ok(stems)
}

/// Walks `<root>/<Task>/{gestures,motion_primitives}/<trial_id>.txt` plus
/// `<root>/meta.csv`. Trials missing a source or failing to parse are listed
/// in the load report rather than dropped silently.
pub fn scan_dataset(root: &Path) -> Result<(Corpus, LoadReport), IngestError> {
    let meta_path = root.join(META_FILE);
    if !root.is_dir() {
        return Err(IngestError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let records = if meta_path.is_file() {
        parse_metadata(&read_to_string(&meta_path)?)?
    } else {
        Vec::new()
    };

    let mut by_id: BTreeMap<String, TrialRecord> = BTreeMap::new();
    let mut report = LoadReport::default();
    for r in records {
        let id = r.trial_id();
        if by_id.insert(id.clone(), r).is_some() {
            report.issues.push(InconsistentTrial {
                trial_id: id,
                reason: "duplicate metadata row".into(),
            });
        }
    }

    let mut trials = Vec::new();
    for task in Task::ALL {
        let task_dir = root.join(task.dir_name());
        let gesture_dir = task_dir.join(GESTURE_DIR);
        let mp_dir = task_dir.join(MP_DIR);
        let gesture_ids = transcript_stems(&gesture_dir)?;
        let mp_ids = transcript_stems(&mp_dir)?;
        let mut ids: BTreeSet<String> = gesture_ids.union(&mp_ids).cloned().collect();
        ids.extend(by_id.values().filter(|r| r.task == task).map(|r| r.trial_id()));

        for id in ids {
            let mut missing = Vec::new();
            let record = by_id.get(&id);
            if record.is_none() {
                missing.push("metadata row");
            }
            if !gesture_ids.contains(&id) {
                missing.push("gesture transcript");
            }
            if !mp_ids.contains(&id) {
                missing.push("motion primitive transcript");
            }
            if !missing.is_empty() {
                report.issues.push(InconsistentTrial {
                    trial_id: id,
                    reason: format!("incomplete: missing {}", missing.join(", ")),
                });
                continue;
            }
            let file = format!("{id}.txt");
            let gestures = parse_gesture_transcript(&read_to_string(&gesture_dir.join(&file))?);
            let mps = parse_mp_transcript(&read_to_string(&mp_dir.join(&file))?);
            match (gestures, mps) {
                (Ok(gestures), Ok(mps)) => trials.push(TrialData {
                    record: record.cloned().expect("checked above"),
                    gestures,
                    mps,
                }),
                (Err(e), _) => report.issues.push(InconsistentTrial {
                    trial_id: id,
                    reason: format!("gesture transcript: {e}"),
                }),
                (_, Err(e)) => report.issues.push(InconsistentTrial {
                    trial_id: id,
                    reason: format!("motion primitive transcript: {e}"),
                }),
            }
        }
    }
    trials.sort_by(|a, b| {
        (a.record.task, &a.record.subject, a.record.trial_index).cmp(&(
            b.record.task,
            &b.record.subject,
            b.record.trial_index,
        ))
    });
    report.issues.sort();
    Ok((Corpus { trials }, report))
}

/// Writes a corpus in the layout read by [`scan_dataset`].
pub fn write_dataset(root: &Path, corpus: &Corpus) -> Result<(), IngestError> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| IngestError::io(p, e));
    let write = |p: &Path, s: &str| fs::write(p, s).map_err(|e| IngestError::io(p, e));
    mkdir(root)?;
    for trial in &corpus.trials {
        let task_dir = root.join(trial.record.task.dir_name());
        let (gdir, mdir) = (task_dir.join(GESTURE_DIR), task_dir.join(MP_DIR));
        mkdir(&gdir)?;
        mkdir(&mdir)?;
        let file = format!("{}.txt", trial.trial_id());
        write(&gdir.join(&file), &render_gesture_transcript(&trial.gestures))?;
        write(&mdir.join(&file), &render_mp_transcript(&trial.mps))?;
    }
    let records: Vec<TrialRecord> = corpus.trials.iter().map(|t| t.record.clone()).collect();
    write(&root.join(META_FILE), &render_metadata(&records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Actor, TargetObject, Verb};

    #[test]
    fn gesture_lines() {
        let g = parse_gesture_transcript("1506 1685 G6").unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].start_frame, g[0].end_frame), (1506, 1685));
        assert_eq!(g[0].gesture.to_string(), "G6");
        assert!(parse_gesture_transcript("").unwrap().is_empty());
        assert!(matches!(
            parse_gesture_transcript("10 5 G2"),
            Err(IngestError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_gesture_transcript("0 10 G1\n10 20 G5"),
            Err(IngestError::OverlapError(2))
        ));
        assert!(matches!(
            parse_gesture_transcript("0 10 G16"),
            Err(IngestError::UnknownGesture(1))
        ));
        assert!(matches!(
            parse_gesture_transcript("0 x G1"),
            Err(IngestError::MalformedLine { .. })
        ));
        let two = parse_gesture_transcript("0 10 G1\n\n11 20 G5\n").unwrap();
        assert_eq!(two[1].ordinal, 1);
    }

    #[test]
    fn mp_lines() {
        let m = parse_mp_transcript("120 180 Grasp(L, Needle)").unwrap();
        assert_eq!(m[0].verb, Verb::Grasp);
        assert_eq!(m[0].actor, Actor::Left);
        assert_eq!((m[0].start_frame, m[0].end_frame), (120, 180));

        let t = parse_mp_transcript("0 10 Touch(Needle, Ring)").unwrap();
        assert_eq!(t[0].actor, Actor::Object(TargetObject::Needle));
        assert_eq!(t[0].object, TargetObject::Ring);

        assert!(matches!(
            parse_mp_transcript("5 9 Hover(L, Needle)"),
            Err(IngestError::UnknownVerb(1))
        ));
        assert!(matches!(
            parse_mp_transcript("0 10 Grasp(L, Needle)\n5 12 Release(L, Needle)"),
            Err(IngestError::SameChannelOverlap(2))
        ));
        // different channels may overlap in time
        let ok = parse_mp_transcript("0 10 Grasp(L, Needle)\n5 12 Release(R, Needle)").unwrap();
        assert_eq!(ok.len(), 2);
    }

    #[test]
    fn mp_lines_sorted_by_start_end_channel() {
        let m = parse_mp_transcript(
            "20 30 Grasp(R, Needle)\n0 10 Touch(L, Thread)\n0 5 Touch(R, Thread)\n0 10 Grasp(L, Needle)",
        )
        .unwrap();
        let labels: Vec<_> = m.iter().map(|x| x.label()).collect();
        assert_eq!(
            labels,
            [
                "Touch(R, Thread)",
                "Grasp(L, Needle)",
                "Touch(L, Thread)",
                "Grasp(R, Needle)"
            ]
        );
    }

    const META: &str = "task,subject,trial,skill,grs_total,respect_for_tissue,suture_needle_handling,time_and_motion,flow_of_operation,overall_performance,quality_of_final_product\n\
Suturing,C,2,N,17,3,3,3,3,3,2\n";

    #[test]
    fn metadata_rows() {
        let r = parse_metadata(META).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].skill, Skill::Novice);
        assert_eq!(r[0].fps, 30.0);
        assert_eq!(r[0].subscores.quality_of_final_product, 2.0);
        assert_eq!(r[0].trial_id(), "Suturing_C002");

        let expert = META.replace(",N,", ",E,");
        assert_eq!(parse_metadata(&expert).unwrap()[0].skill, Skill::Expert);

        let no_grs = META.replace("grs_total", "grs");
        assert!(matches!(parse_metadata(&no_grs), Err(IngestError::MissingColumn(c)) if c == "grs_total"));

        let bad_skill = META.replace(",N,", ",Q,");
        assert!(matches!(parse_metadata(&bad_skill), Err(IngestError::BadSkillCode(1))));
    }

    #[test]
    fn metadata_roundtrip_with_fps() {
        let mut r = parse_metadata(META).unwrap();
        r[0].fps = 25.0;
        assert_eq!(parse_metadata(&render_metadata(&r)).unwrap(), r);
    }
}
