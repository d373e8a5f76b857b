//! Inverse MP detection.
//!
//! Two MPs form an inverse candidate when they are adjacent in their channel
//! projection and their verbs negate each other (Touch/Untouch,
//! Grasp/Release, either order), or when a `Push(Needle, Fabric|Ring)` is
//! directly followed by a `Pull(tool, Needle)` among the needle-interaction
//! MPs. Candidates whose members both belong to the first greedy match of the
//! gesture's canonical pattern are suppressed. Runs of chained candidates are
//! then counted according to [`CountingMode`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::TrialData;
use crate::model::{
    Actor, CanonicalEntry, CanonicalTable, GestureInstance, InverseInstance, InverseKind, InverseTypeKey,
    MotionPrimitive, MpSignature, TargetObject, TrialRef, Verb,
};
use crate::seqops::MpSequence;

pub use crate::seqops::channel_project;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CountingMode {
    /// Consume members left to right: a run of k MPs yields k/2 instances.
    #[default]
    GreedyNonOverlapping,
    /// Every adjacent negating pair: a run of k MPs yields k-1 instances.
    AllAdjacentPairs,
    /// One instance per maximal run.
    MaximalRun,
}

impl CountingMode {
    pub const ALL: [CountingMode; 3] = [
        CountingMode::GreedyNonOverlapping,
        CountingMode::AllAdjacentPairs,
        CountingMode::MaximalRun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CountingMode::GreedyNonOverlapping => "greedy",
            CountingMode::AllAdjacentPairs => "pairs",
            CountingMode::MaximalRun => "runs",
        }
    }
}

impl fmt::Display for CountingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CountingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(CountingMode::GreedyNonOverlapping),
            "pairs" => Ok(CountingMode::AllAdjacentPairs),
            "runs" => Ok(CountingMode::MaximalRun),
            other => Err(format!(
                "unknown counting mode `{other}` (expected greedy, pairs or runs)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionOptions {
    pub counting_mode: CountingMode,
    pub exclude_canonical: bool,
    pub enable_push_pull_rule: bool,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        DetectionOptions {
            counting_mode: CountingMode::GreedyNonOverlapping,
            exclude_canonical: true,
            enable_push_pull_rule: true,
        }
    }
}

/// Greedy left-to-right subsequence match of `pattern` in `seq`, frames
/// ignored. Returns the matched indices; a partial match returns the prefix
/// of the pattern that was found.
pub fn canonical_match(seq: &[MotionPrimitive], pattern: &[MpSignature]) -> Vec<usize> {
    let mut matched = Vec::with_capacity(pattern.len());
    let mut want = pattern.iter().peekable();
    for (i, mp) in seq.iter().enumerate() {
        match want.peek() {
            Some(sig) if mp.matches(sig) => {
                matched.push(i);
                want.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    matched
}

fn channel_kind(a: Verb) -> InverseKind {
    match a {
        Verb::Touch | Verb::Untouch => InverseKind::TouchUntouch,
        _ => InverseKind::GraspRelease,
    }
}

fn is_needle_push(mp: &MotionPrimitive) -> bool {
    mp.verb == Verb::Push
        && matches!(&mp.actor, Actor::Object(o) if *o == TargetObject::Needle)
        && mp.object.is_fabric_or_ring()
}

fn is_needle_pull(mp: &MotionPrimitive) -> bool {
    mp.verb == Verb::Pull && mp.actor.is_tool() && mp.object == TargetObject::Needle
}

/// Indices of one run of chained candidates, in order.
fn emit_runs(
    lane: &[usize],
    is_candidate: impl Fn(usize, usize) -> bool,
    mode: CountingMode,
    out: &mut Vec<Vec<usize>>,
) {
    let mut j = 0;
    while j + 1 < lane.len() {
        if !is_candidate(lane[j], lane[j + 1]) {
            j += 1;
            continue;
        }
        let start = j;
        while j + 1 < lane.len() && is_candidate(lane[j], lane[j + 1]) {
            j += 1;
        }
        // run covers lane[start..=j]
        let run = &lane[start..=j];
        match mode {
            CountingMode::GreedyNonOverlapping => {
                out.extend(run.chunks_exact(2).map(|p| p.to_vec()));
            }
            CountingMode::AllAdjacentPairs => {
                out.extend(run.windows(2).map(|p| p.to_vec()));
            }
            CountingMode::MaximalRun => out.push(run.to_vec()),
        }
    }
}

fn type_key_for(mps: &[MotionPrimitive], members: &[usize]) -> InverseTypeKey {
    let first = &mps[members[0]];
    if first.verb == Verb::Push {
        let pull = &mps[members[1]];
        InverseTypeKey {
            kind: InverseKind::PushPull,
            actor: pull.actor.clone(),
            object: first.object.class(),
        }
    } else {
        InverseTypeKey {
            kind: channel_kind(first.verb),
            actor: first.actor.clone(),
            object: first.object.class(),
        }
    }
}

/// Core detector over a transcript with a per-MP canonical mask.
fn detect_masked(
    mps: &[MotionPrimitive],
    canonical: &[bool],
    opts: &DetectionOptions,
) -> Vec<(InverseTypeKey, Vec<usize>)> {
    let suppressed = |a: usize, b: usize| opts.exclude_canonical && canonical[a] && canonical[b];
    let mut runs: Vec<Vec<usize>> = Vec::new();

    // channel lanes, in order of first appearance
    let mut lanes: Vec<Vec<usize>> = Vec::new();
    for (i, mp) in mps.iter().enumerate() {
        match lanes
            .iter_mut()
            .find(|lane| mps[lane[0]].actor == mp.actor && mps[lane[0]].object == mp.object)
        {
            Some(lane) => lane.push(i),
            None => lanes.push(vec![i]),
        }
    }
    for lane in &lanes {
        emit_runs(
            lane,
            |a, b| mps[a].verb.negates(mps[b].verb) && !suppressed(a, b),
            opts.counting_mode,
            &mut runs,
        );
    }

    if opts.enable_push_pull_rule {
        let lane: Vec<usize> = (0..mps.len())
            .filter(|&i| is_needle_push(&mps[i]) || is_needle_pull(&mps[i]))
            .collect();
        emit_runs(
            &lane,
            |a, b| is_needle_push(&mps[a]) && is_needle_pull(&mps[b]) && !suppressed(a, b),
            opts.counting_mode,
            &mut runs,
        );
    }

    let mut out: Vec<(InverseTypeKey, Vec<usize>)> = runs.into_iter().map(|m| (type_key_for(mps, &m), m)).collect();
    out.sort_by(|a, b| {
        let (ma, mb) = (&mps[a.1[0]], &mps[b.1[0]]);
        (ma.start_frame, ma.end_frame, a.1[0])
            .cmp(&(mb.start_frame, mb.end_frame, b.1[0]))
            .then_with(|| a.1.cmp(&b.1))
    });
    out
}

fn build_instance(
    mps: &[MotionPrimitive],
    type_key: InverseTypeKey,
    members: &[usize],
    trial: Option<TrialRef>,
    gesture: Option<GestureInstance>,
) -> InverseInstance {
    let members: Vec<MotionPrimitive> = members.iter().map(|&i| mps[i].clone()).collect();
    InverseInstance {
        type_key,
        duration_frames: members.iter().map(MotionPrimitive::duration_frames).sum(),
        members,
        trial,
        gesture,
    }
}

fn mask_for(len: usize, matched: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut mask = vec![false; len];
    for i in matched {
        mask[i] = true;
    }
    mask
}

/// Detects inverse MPs in one merged MP sequence. The returned instances
/// carry no trial or gesture context.
pub fn detect_inverse(
    seq: &[MotionPrimitive],
    canonical: Option<&CanonicalEntry>,
    opts: &DetectionOptions,
) -> Vec<InverseInstance> {
    let matched = match canonical {
        Some(entry) if opts.exclude_canonical => canonical_match(seq, &entry.pattern),
        _ => Vec::new(),
    };
    let mask = mask_for(seq.len(), matched);
    detect_masked(seq, &mask, opts)
        .into_iter()
        .map(|(key, members)| build_instance(seq, key, &members, None, None))
        .collect()
}

/// Gesture-level detection: uses the gesture's own canonical entry and
/// attributes every instance to that gesture.
pub fn detect_sequence(seq: &MpSequence, table: &CanonicalTable, opts: &DetectionOptions) -> Vec<InverseInstance> {
    let entry = table.lookup(seq.trial.task, seq.gesture.gesture);
    detect_inverse(&seq.mps, entry, opts)
        .into_iter()
        .map(|mut inst| {
            inst.trial = Some(seq.trial.clone());
            inst.gesture = Some(seq.gesture.clone());
            inst
        })
        .collect()
}

/// Trial-level detection over the full merged transcript, including MPs in
/// gestures without a canonical entry. Canonical exclusion is applied per
/// gesture window; each instance is attributed to the gesture containing its
/// first member's start frame (falling back to the first gesture the member
/// intersects), or to none.
pub fn detect_inverse_trial(
    trial: &TrialData,
    table: &CanonicalTable,
    opts: &DetectionOptions,
) -> Vec<InverseInstance> {
    let mps = &trial.mps;
    let mut mask = vec![false; mps.len()];
    if opts.exclude_canonical {
        for g in &trial.gestures {
            let Some(entry) = table.lookup(trial.record.task, g.gesture) else {
                continue;
            };
            let window: Vec<usize> = (0..mps.len())
                .filter(|&i| mps[i].intersects(g.start_frame, g.end_frame))
                .collect();
            let sub: Vec<MotionPrimitive> = window.iter().map(|&i| mps[i].clone()).collect();
            for k in canonical_match(&sub, &entry.pattern) {
                mask[window[k]] = true;
            }
        }
    }
    let trial_ref = trial.record.trial_ref();
    detect_masked(mps, &mask, opts)
        .into_iter()
        .map(|(key, members)| {
            let first = &mps[members[0]];
            let gesture = trial
                .gestures
                .iter()
                .find(|g| g.contains(first.start_frame))
                .or_else(|| {
                    trial
                        .gestures
                        .iter()
                        .find(|g| first.intersects(g.start_frame, g.end_frame))
                })
                .cloned();
            build_instance(mps, key, &members, Some(trial_ref.clone()), gesture)
        })
        .collect()
}

pub fn instance_duration_seconds(inst: &InverseInstance, fps: f64) -> f64 {
    f64::from(inst.duration_frames) / fps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_canonical_table, GestureId, Skill, Subscores, Task, TrialRecord};

    fn mp(label: &str, s: u32, e: u32) -> MotionPrimitive {
        MotionPrimitive::new(label.parse().unwrap(), s, e).unwrap()
    }

    fn seq(labels: &[&str]) -> Vec<MotionPrimitive> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| mp(l, 10 * i as u32, 10 * i as u32 + 9))
            .collect()
    }

    fn opts(mode: CountingMode) -> DetectionOptions {
        DetectionOptions {
            counting_mode: mode,
            ..Default::default()
        }
    }

    fn entry(task: Task, g: u8) -> CanonicalEntry {
        builtin_canonical_table()
            .lookup(task, GestureId::new(g).unwrap())
            .unwrap()
            .clone()
    }

    #[test]
    fn channel_projection() {
        let s = seq(&["Grasp(L, Needle)", "Push(R, Needle)", "Release(L, Needle)"]);
        let p = channel_project(&s);
        assert_eq!(p.len(), 2);
        let l = &p[&s[0].channel()];
        assert_eq!(
            l.iter().map(|m| m.verb).collect::<Vec<_>>(),
            [Verb::Grasp, Verb::Release]
        );
        assert!(channel_project(&[]).is_empty());

        let g8 = entry(Task::Suturing, 8);
        let s: Vec<_> = g8
            .pattern
            .iter()
            .enumerate()
            .map(|(i, p)| MotionPrimitive::new(p.clone(), i as u32 * 5, i as u32 * 5 + 4).unwrap())
            .collect();
        let p = channel_project(&s);
        let verbs = |label: &str| -> Vec<Verb> {
            p[&label.parse::<MpSignature>().unwrap().channel()]
                .iter()
                .map(|m| m.verb)
                .collect()
        };
        assert_eq!(verbs("Grasp(L, Needle)"), [Verb::Grasp, Verb::Release]);
        assert_eq!(verbs("Grasp(R, Needle)"), [Verb::Release, Verb::Grasp]);
    }

    #[test]
    fn touch_untouch_touch_in_suturing_g2() {
        let s = seq(&[
            "Touch(Needle, Fabric)",
            "Untouch(Needle, Fabric)",
            "Touch(Needle, Fabric)",
        ]);
        let g2 = entry(Task::Suturing, 2);
        let found = detect_inverse(&s, Some(&g2), &DetectionOptions::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].type_key.label(), "Touch(Needle, F/R) Untouch(Needle, F/R)");
        assert_eq!(found[0].duration_frames, 20);

        let pairs = detect_inverse(&s, Some(&g2), &opts(CountingMode::AllAdjacentPairs));
        assert_eq!(pairs.len(), 2);
        let runs = detect_inverse(&s, Some(&g2), &opts(CountingMode::MaximalRun));
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].members.len(), 3);
    }

    #[test]
    fn canonical_g8_is_fully_suppressed() {
        let g8 = entry(Task::Suturing, 8);
        let s = seq(&[
            "Grasp(L, Needle)",
            "Release(R, Needle)",
            "Grasp(R, Needle)",
            "Release(L, Needle)",
        ]);
        assert!(detect_inverse(&s, Some(&g8), &DetectionOptions::default()).is_empty());
        let no_excl = DetectionOptions {
            exclude_canonical: false,
            ..Default::default()
        };
        // both the (L, N) Grasp/Release and the (R, N) Release/Grasp pairs
        assert_eq!(detect_inverse(&s, Some(&g8), &no_excl).len(), 2);
    }

    #[test]
    fn push_pull_rule() {
        let s = seq(&["Push(Needle, Fabric)", "Pull(R, Needle)"]);
        let found = detect_inverse(&s, None, &DetectionOptions::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].type_key.label(), "Push(Needle, F/R) Pull(R, Needle)");

        let off = DetectionOptions {
            enable_push_pull_rule: false,
            ..Default::default()
        };
        assert!(detect_inverse(&s, None, &off).is_empty());

        // reversed order is not an extraction
        let s = seq(&["Pull(R, Needle)", "Push(Needle, Ring)"]);
        assert!(detect_inverse(&s, None, &DetectionOptions::default()).is_empty());
        // Push(R, Needle) is a tool push, not a needle push
        let s = seq(&["Push(R, Needle)", "Pull(R, Needle)"]);
        assert!(detect_inverse(&s, None, &DetectionOptions::default()).is_empty());
    }

    #[test]
    fn interleaved_channel_does_not_break_adjacency() {
        let s = seq(&["Grasp(L, Needle)", "Grasp(R, Needle)", "Release(L, Needle)"]);
        let found = detect_inverse(&s, None, &DetectionOptions::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].type_key.label(), "Grasp(L, Needle) Release(L, Needle)");
        // but an intervening MP on the same channel does
        let s = seq(&["Grasp(L, Needle)", "Pull(L, Needle)", "Release(L, Needle)"]);
        assert!(detect_inverse(&s, None, &DetectionOptions::default()).is_empty());
    }

    #[test]
    fn run_counts_per_mode() {
        let s = seq(&[
            "Grasp(L, Thread)",
            "Release(L, Thread)",
            "Grasp(L, Thread)",
            "Release(L, Thread)",
            "Grasp(L, Thread)",
        ]);
        let count = |m| detect_inverse(&s, None, &opts(m)).len();
        assert_eq!(count(CountingMode::GreedyNonOverlapping), 2);
        assert_eq!(count(CountingMode::AllAdjacentPairs), 4);
        assert_eq!(count(CountingMode::MaximalRun), 1);
    }

    fn trial(gestures: &[(u32, u32, u8)], mps: Vec<MotionPrimitive>) -> TrialData {
        TrialData {
            record: TrialRecord {
                task: Task::Suturing,
                subject: "D".into(),
                trial_index: 3,
                skill: Skill::Expert,
                grs_total: 25.0,
                subscores: Subscores::from_fn(|_| 4.0),
                fps: 30.0,
            },
            gestures: gestures
                .iter()
                .enumerate()
                .map(|(i, &(s, e, g))| GestureInstance {
                    gesture: GestureId::new(g).unwrap(),
                    start_frame: s,
                    end_frame: e,
                    ordinal: i,
                })
                .collect(),
            mps,
        }
    }

    #[test]
    fn trial_level_counts_gestures_without_canonical_entry() {
        let t = trial(
            &[(0, 100, 1)],
            vec![mp("Grasp(R, Needle)", 10, 20), mp("Release(R, Needle)", 21, 40)],
        );
        let found = detect_inverse_trial(&t, &builtin_canonical_table(), &DetectionOptions::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].gesture.as_ref().unwrap().gesture.number(), 1);
        assert_eq!(found[0].trial.as_ref().unwrap().trial_id, "Suturing_D003");

        let empty = trial(&[(0, 100, 1)], vec![]);
        assert!(detect_inverse_trial(&empty, &builtin_canonical_table(), &DetectionOptions::default()).is_empty());
    }

    #[test]
    fn trial_level_exclusion_is_per_window() {
        // G6 then G4 in Suturing: Release(R,N) (G6 canonical) then Grasp(R,N) (G4 canonical)
        let t = trial(
            &[(0, 49, 6), (50, 100, 4)],
            vec![
                mp("Grasp(L, Needle)", 0, 10),
                mp("Release(R, Needle)", 11, 20),
                mp("Pull(L, Needle)", 21, 49),
                mp("Grasp(R, Needle)", 50, 60),
                mp("Release(L, Needle)", 61, 70),
            ],
        );
        let table = builtin_canonical_table();
        assert!(detect_inverse_trial(&t, &table, &DetectionOptions::default()).is_empty());
        let off = DetectionOptions {
            exclude_canonical: false,
            ..Default::default()
        };
        assert_eq!(detect_inverse_trial(&t, &table, &off).len(), 1);
    }

    #[test]
    fn outside_attribution() {
        let t = trial(
            &[(100, 200, 2)],
            vec![mp("Grasp(R, Thread)", 0, 5), mp("Release(R, Thread)", 6, 9)],
        );
        let found = detect_inverse_trial(&t, &builtin_canonical_table(), &DetectionOptions::default());
        assert_eq!(found.len(), 1);
        assert!(found[0].gesture.is_none());
    }

    #[test]
    fn durations() {
        let s = vec![mp("Grasp(L, Needle)", 0, 29), mp("Release(L, Needle)", 30, 89)];
        let found = detect_inverse(&s, None, &DetectionOptions::default());
        assert_eq!(instance_duration_seconds(&found[0], 30.0), 3.0);
        assert_eq!(instance_duration_seconds(&found[0], 25.0), 90.0 / 25.0);
    }

    #[test]
    fn counting_mode_parsing() {
        for m in CountingMode::ALL {
            assert_eq!(m.as_str().parse::<CountingMode>().unwrap(), m);
        }
        assert!("all".parse::<CountingMode>().is_err());
    }
}
