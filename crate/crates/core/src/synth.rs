//! Seeded synthetic corpora. Each gesture realises its canonical pattern
//! back to back; negating "do, undo" pairs are inserted at random and logged
//! so detector recall can be measured.

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{write_dataset, Corpus, IngestError, TrialData};
use crate::model::{
    builtin_canonical_table, Actor, CanonicalTable, GestureId, GestureInstance, InverseInstance, MotionPrimitive,
    MpSignature, Skill, Subscores, TargetObject, Task, TrialRecord, Verb, DEFAULT_FPS,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("insertion rate {0} is outside [0, 1]")]
    InvalidRate(f64),
    #[error("mean MP duration must be positive")]
    ZeroDuration,
    #[error("at least one gesture per trial is required")]
    NoGestures,
    #[error("no canonical patterns for task {0}")]
    NoCanonical(Task),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot serialize ground truth: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub task: Task,
    pub skill: Skill,
    pub subject: String,
    pub trial_index: u32,
    /// Probability of inserting a negating pair before each canonical element.
    pub inverse_insertion_rate: f64,
    pub boundary_jitter_frames: u32,
    pub mean_mp_duration_frames: u32,
    pub gestures_per_trial: usize,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(task: Task, skill: Skill, seed: u64) -> Self {
        SynthParams {
            task,
            skill,
            subject: subjects_for(skill)[0].to_string(),
            trial_index: 1,
            inverse_insertion_rate: default_rate(skill),
            boundary_jitter_frames: 0,
            mean_mp_duration_frames: 20,
            gestures_per_trial: 10,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.inverse_insertion_rate) {
            return Err(SynthError::InvalidRate(self.inverse_insertion_rate));
        }
        if self.mean_mp_duration_frames == 0 {
            return Err(SynthError::ZeroDuration);
        }
        if self.gestures_per_trial == 0 {
            return Err(SynthError::NoGestures);
        }
        Ok(())
    }
}

pub fn default_rate(skill: Skill) -> f64 {
    match skill {
        Skill::Novice => 0.3,
        Skill::Intermediate => 0.15,
        Skill::Expert => 0.05,
    }
}

/// Subject letters grouped by experience level, as in the public dataset.
pub fn subjects_for(skill: Skill) -> &'static [&'static str] {
    match skill {
        Skill::Novice => &["B", "G", "H", "I"],
        Skill::Intermediate => &["C", "F"],
        Skill::Expert => &["D", "E"],
    }
}

/// The order gestures are cycled through when laying out a trial.
pub fn gesture_cycle(task: Task) -> Vec<GestureId> {
    let ids: &[u8] = match task {
        Task::Suturing | Task::NeedlePassing => &[2, 3, 6, 4, 8],
        Task::KnotTying => &[12, 13, 14, 15],
    };
    ids.iter().filter_map(|&n| GestureId::new(n)).collect()
}

/// One inserted negating pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertedPair {
    pub gesture: GestureId,
    pub gesture_ordinal: usize,
    pub first: MotionPrimitive,
    pub second: MotionPrimitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub trial_id: String,
    pub inserted: Vec<InsertedPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrial {
    pub data: TrialData,
    pub truth: TrialTruth,
}

fn sig(verb: Verb, actor: Actor, object: TargetObject) -> MpSignature {
    MpSignature::new(verb, actor, object).expect("tool actors never equal their object")
}

fn random_pair(rng: &mut ChaCha8Rng, task: Task) -> (MpSignature, MpSignature) {
    let tool = if rng.random_bool(0.5) {
        Actor::Left
    } else {
        Actor::Right
    };
    if task != Task::KnotTying && rng.random_bool(0.1) {
        let surface = match task {
            Task::NeedlePassing => TargetObject::Ring,
            _ => TargetObject::Fabric,
        };
        return (
            sig(Verb::Push, Actor::Object(TargetObject::Needle), surface),
            sig(Verb::Pull, tool, TargetObject::Needle),
        );
    }
    let objects: &[TargetObject] = match task {
        Task::KnotTying => &[TargetObject::Thread],
        _ => &[TargetObject::Needle, TargetObject::Thread],
    };
    let object = objects.choose(rng).expect("non-empty").clone();
    // "do, undo" order only, so that the merge rule never absorbs an insertion
    let (a, b) = if rng.random_bool(0.5) {
        (Verb::Touch, Verb::Untouch)
    } else {
        (Verb::Grasp, Verb::Release)
    };
    (sig(a, tool.clone(), object.clone()), sig(b, tool, object))
}

fn grs_from_insertions(rng: &mut ChaCha8Rng, inserted: usize) -> (f64, Subscores) {
    let target = (30.0 - 1.5 * inserted as f64 + rng.random_range(-2.0..=2.0)).clamp(6.0, 30.0);
    let subscores = Subscores::from_fn(|_| (target / 6.0 + rng.random_range(-0.6..=0.6)).round().clamp(1.0, 5.0));
    let total = crate::model::GrsSubscore::ALL.iter().map(|&s| subscores.get(s)).sum();
    (total, subscores)
}

/// Generates one trial with the builtin canonical table.
pub fn generate_trial(params: &SynthParams) -> Result<SynthTrial, SynthError> {
    generate_trial_with(params, &builtin_canonical_table())
}

pub fn generate_trial_with(params: &SynthParams, table: &CanonicalTable) -> Result<SynthTrial, SynthError> {
    params.validate()?;
    let cycle: Vec<GestureId> = gesture_cycle(params.task)
        .into_iter()
        .filter(|g| table.lookup(params.task, *g).is_some())
        .collect();
    if cycle.is_empty() {
        return Err(SynthError::NoCanonical(params.task));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mean = params.mean_mp_duration_frames;
    let (lo, hi) = ((mean / 2).max(1), mean + mean / 2);

    let mut mps = Vec::new();
    let mut truth = Vec::new();
    let mut windows: Vec<(GestureId, u32, u32)> = Vec::new();
    let mut cursor: u32 = 0;
    let place = |cursor: &mut u32, rng: &mut ChaCha8Rng, s: MpSignature| {
        let d = rng.random_range(lo..=hi);
        let mp = MotionPrimitive::new(s, *cursor, *cursor + d - 1).expect("positive duration");
        *cursor += d;
        mp
    };

    for ordinal in 0..params.gestures_per_trial {
        let gesture = cycle[ordinal % cycle.len()];
        let entry = table.lookup(params.task, gesture).expect("filtered above");
        let start = cursor;
        for element in &entry.pattern {
            if rng.random_bool(params.inverse_insertion_rate) {
                let (a, b) = random_pair(&mut rng, params.task);
                let first = place(&mut cursor, &mut rng, a);
                let second = place(&mut cursor, &mut rng, b);
                truth.push(InsertedPair {
                    gesture,
                    gesture_ordinal: ordinal,
                    first: first.clone(),
                    second: second.clone(),
                });
                mps.push(first);
                mps.push(second);
            }
            let mp = place(&mut cursor, &mut rng, element.clone());
            mps.push(mp);
        }
        windows.push((gesture, start, cursor - 1));
    }

    // shift internal boundaries; windows stay non-empty and contiguous
    let j = params.boundary_jitter_frames as i64;
    if j > 0 {
        for i in 0..windows.len() - 1 {
            let delta = rng.random_range(-j..=j);
            let (lo_end, hi_end) = (i64::from(windows[i].1), i64::from(windows[i + 1].2) - 1);
            let end = (i64::from(windows[i].2) + delta).clamp(lo_end, hi_end) as u32;
            windows[i].2 = end;
            windows[i + 1].1 = end + 1;
        }
    }
    let gestures = windows
        .into_iter()
        .enumerate()
        .map(|(ordinal, (gesture, start_frame, end_frame))| GestureInstance {
            gesture,
            start_frame,
            end_frame,
            ordinal,
        })
        .collect();

    let (grs_total, subscores) = grs_from_insertions(&mut rng, truth.len());
    let record = TrialRecord {
        task: params.task,
        subject: params.subject.clone(),
        trial_index: params.trial_index,
        skill: params.skill,
        grs_total,
        subscores,
        fps: DEFAULT_FPS,
    };
    Ok(SynthTrial {
        truth: TrialTruth {
            trial_id: record.trial_id(),
            inserted: truth,
        },
        data: TrialData { record, gestures, mps },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub tasks: Vec<Task>,
    pub trials_per_skill: usize,
    pub rates: [f64; 3],
    pub boundary_jitter_frames: u32,
    pub mean_mp_duration_frames: u32,
    pub gestures_per_trial: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(seed: u64) -> Self {
        CorpusSpec {
            tasks: Task::ALL.to_vec(),
            trials_per_skill: 4,
            rates: Skill::ALL.map(default_rate),
            boundary_jitter_frames: 0,
            mean_mp_duration_frames: 20,
            gestures_per_trial: 10,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub truth: Vec<TrialTruth>,
    pub seed: u64,
}

/// Trials for every (task, skill), subjects assigned round-robin. Per-trial
/// seeds are drawn from one stream seeded with `spec.seed`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<SynthCorpus, SynthError> {
    let table = builtin_canonical_table();
    let mut seeds = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trials = Vec::new();
    let mut truth = Vec::new();
    for &task in &spec.tasks {
        for (s, skill) in Skill::ALL.into_iter().enumerate() {
            let subjects = subjects_for(skill);
            for k in 0..spec.trials_per_skill {
                let params = SynthParams {
                    task,
                    skill,
                    subject: subjects[k % subjects.len()].to_string(),
                    trial_index: (k / subjects.len()) as u32 + 1,
                    inverse_insertion_rate: spec.rates[s],
                    boundary_jitter_frames: spec.boundary_jitter_frames,
                    mean_mp_duration_frames: spec.mean_mp_duration_frames,
                    gestures_per_trial: spec.gestures_per_trial,
                    seed: seeds.random(),
                };
                let t = generate_trial_with(&params, &table)?;
                trials.push(t.data);
                truth.push(t.truth);
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
    truth.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    Ok(SynthCorpus {
        corpus: Corpus { trials },
        truth,
        seed: spec.seed,
    })
}

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Serialize)]
struct TruthFile<'a> {
    seed: u64,
    trials: &'a [TrialTruth],
}

/// Writes the dataset layout plus `truth.json`.
pub fn write_corpus(root: &Path, synth: &SynthCorpus) -> Result<(), SynthError> {
    write_dataset(root, &synth.corpus)?;
    let json = serde_json::to_string_pretty(&TruthFile {
        seed: synth.seed,
        trials: &synth.truth,
    })?;
    let path = root.join(TRUTH_FILE);
    fs::write(&path, json + "\n").map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Inserted pairs with at least one MP among the members of a detected
/// instance of the same trial, over all inserted pairs.
pub fn recall(truth: &[TrialTruth], detected: &[InverseInstance]) -> (usize, usize) {
    let mut found = 0;
    let mut total = 0;
    for t in truth {
        let members: Vec<&MotionPrimitive> = detected
            .iter()
            .filter(|i| i.trial.as_ref().is_some_and(|r| r.trial_id == t.trial_id))
            .flat_map(|i| &i.members)
            .collect();
        for pair in &t.inserted {
            total += 1;
            if members.iter().any(|m| **m == pair.first || **m == pair.second) {
                found += 1;
            }
        }
    }
    (found, total)
}
