//! Transcript normalization and per-gesture MP sequence extraction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ingest::TrialData;
use crate::model::{transcript_order, ChannelKey, GestureId, GestureInstance, MotionPrimitive, Task, TrialRef, Verb};

/// The MPs whose intervals intersect one gesture instance's window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpSequence {
    pub trial: TrialRef,
    pub gesture: GestureInstance,
    pub mps: Vec<MotionPrimitive>,
}

/// Partitions MPs by channel, keeping transcript order inside each channel.
pub fn channel_project(mps: &[MotionPrimitive]) -> BTreeMap<ChannelKey, Vec<MotionPrimitive>> {
    let mut out: BTreeMap<ChannelKey, Vec<MotionPrimitive>> = BTreeMap::new();
    for mp in mps {
        out.entry(mp.channel()).or_default().push(mp.clone());
    }
    out
}

fn merged_verb(first: Verb, second: Verb) -> Option<Verb> {
    match (first, second) {
        (Verb::Touch, Verb::Grasp) => Some(Verb::Grasp),
        (Verb::Release, Verb::Untouch) => Some(Verb::Release),
        _ => None,
    }
}

fn merge_pass(channel: &[MotionPrimitive]) -> Option<Vec<MotionPrimitive>> {
    let mut out = Vec::with_capacity(channel.len());
    let mut changed = false;
    let mut i = 0;
    while i < channel.len() {
        if let Some(next) = channel.get(i + 1) {
            let cur = &channel[i];
            if let Some(verb) = merged_verb(cur.verb, next.verb) {
                out.push(MotionPrimitive {
                    verb,
                    start_frame: cur.start_frame,
                    end_frame: next.end_frame,
                    ..next.clone()
                });
                changed = true;
                i += 2;
                continue;
            }
        }
        out.push(channel[i].clone());
        i += 1;
    }
    changed.then_some(out)
}

/// Folds `Touch` into a directly following `Grasp`, and a trailing `Untouch`
/// into the preceding `Release`, on each channel, until nothing changes.
/// "Directly following" is judged on the channel's own subsequence, so MPs of
/// other channels interleaved in time never block a merge.
pub fn merge_touch_grasp(mps: &[MotionPrimitive]) -> Vec<MotionPrimitive> {
    let mut out = Vec::with_capacity(mps.len());
    for (_, mut channel) in channel_project(mps) {
        while let Some(next) = merge_pass(&channel) {
            channel = next;
        }
        out.extend(channel);
    }
    out.sort_by(transcript_order);
    out
}

/// Returns a copy of the trial with a merged MP transcript.
pub fn normalize_trial(trial: &TrialData) -> TrialData {
    TrialData {
        record: trial.record.clone(),
        gestures: trial.gestures.clone(),
        mps: merge_touch_grasp(&trial.mps),
    }
}

/// One sequence per gesture instance. Membership is inclusive interval
/// intersection, so an MP straddling a boundary lands in both neighbours.
pub fn extract_sequences(trial: &TrialData) -> Vec<MpSequence> {
    let trial_ref = trial.record.trial_ref();
    trial
        .gestures
        .iter()
        .map(|g| MpSequence {
            trial: trial_ref.clone(),
            gesture: g.clone(),
            mps: trial
                .mps
                .iter()
                .filter(|mp| mp.intersects(g.start_frame, g.end_frame))
                .cloned()
                .collect(),
        })
        .collect()
}

pub const EMPTY_SEQUENCE_KEY: &str = "∅";

pub fn sequence_key(mps: &[MotionPrimitive]) -> String {
    if mps.is_empty() {
        return EMPTY_SEQUENCE_KEY.to_string();
    }
    mps.iter().map(|m| m.label()).collect::<Vec<_>>().join(", ")
}

/// Counts identical sequence keys among instances of `(task, gesture)`,
/// sorted by descending count, then key.
pub fn sequence_histogram(seqs: &[MpSequence], task: Task, gesture: GestureId) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for s in seqs
        .iter()
        .filter(|s| s.trial.task == task && s.gesture.gesture == gesture)
    {
        *counts.entry(sequence_key(&s.mps)).or_default() += 1;
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Skill, Subscores, TrialRecord};
    use proptest::prelude::*;

    fn mp(label: &str, s: u32, e: u32) -> MotionPrimitive {
        MotionPrimitive::new(label.parse().unwrap(), s, e).unwrap()
    }

    fn labels(mps: &[MotionPrimitive]) -> Vec<(String, u32, u32)> {
        mps.iter().map(|m| (m.label(), m.start_frame, m.end_frame)).collect()
    }

    #[test]
    fn merge_examples() {
        let out = merge_touch_grasp(&[mp("Touch(L, Needle)", 10, 20), mp("Grasp(L, Needle)", 21, 40)]);
        assert_eq!(labels(&out), [("Grasp(L, Needle)".to_string(), 10, 40)]);

        let out = merge_touch_grasp(&[mp("Release(R, Needle)", 5, 8), mp("Untouch(R, Needle)", 9, 12)]);
        assert_eq!(labels(&out), [("Release(R, Needle)".to_string(), 5, 12)]);

        let input = [mp("Touch(L, Needle)", 10, 20), mp("Grasp(R, Needle)", 21, 40)];
        assert_eq!(merge_touch_grasp(&input), input.to_vec());
    }

    #[test]
    fn merge_ignores_interleaved_channels() {
        let out = merge_touch_grasp(&[
            mp("Touch(L, Needle)", 0, 5),
            mp("Grasp(R, Thread)", 6, 9),
            mp("Grasp(L, Needle)", 10, 15),
        ]);
        assert_eq!(
            labels(&out),
            [
                ("Grasp(L, Needle)".to_string(), 0, 15),
                ("Grasp(R, Thread)".to_string(), 6, 9)
            ]
        );
    }

    #[test]
    fn merge_reaches_fixpoint_on_stacked_touches() {
        let out = merge_touch_grasp(&[
            mp("Touch(L, Needle)", 0, 5),
            mp("Touch(L, Needle)", 6, 9),
            mp("Grasp(L, Needle)", 10, 15),
            mp("Release(L, Needle)", 16, 20),
            mp("Untouch(L, Needle)", 21, 22),
            mp("Untouch(L, Needle)", 23, 24),
        ]);
        assert_eq!(
            labels(&out),
            [
                ("Grasp(L, Needle)".to_string(), 0, 15),
                ("Release(L, Needle)".to_string(), 16, 24)
            ]
        );
    }

    fn trial(gestures: &[(u32, u32, &str)], mps: Vec<MotionPrimitive>) -> TrialData {
        TrialData {
            record: TrialRecord {
                task: Task::NeedlePassing,
                subject: "B".into(),
                trial_index: 1,
                skill: Skill::Novice,
                grs_total: 10.0,
                subscores: Subscores::from_fn(|_| 2.0),
                fps: 30.0,
            },
            gestures: gestures
                .iter()
                .enumerate()
                .map(|(i, &(s, e, g))| GestureInstance {
                    gesture: g.parse().unwrap(),
                    start_frame: s,
                    end_frame: e,
                    ordinal: i,
                })
                .collect(),
            mps,
        }
    }

    #[test]
    fn extraction_is_boundary_inclusive() {
        let t = trial(
            &[(0, 99, "G2"), (100, 200, "G3"), (201, 300, "G6")],
            vec![
                mp("Touch(Needle, Ring)", 10, 50),
                mp("Grasp(L, Needle)", 90, 250),
                mp("Release(R, Needle)", 201, 210),
                mp("Pull(L, Needle)", 200, 205),
            ],
        );
        let seqs = extract_sequences(&t);
        let has = |i: usize, l: &str| seqs[i].mps.iter().any(|m| m.label() == l);
        for i in 0..3 {
            assert!(has(i, "Grasp(L, Needle)"), "straddler missing from gesture {i}");
        }
        assert!(!has(1, "Release(R, Needle)"), "MP at 201 is outside [100,200]");
        assert!(has(1, "Pull(L, Needle)"), "single shared frame intersects");
        assert!(has(2, "Pull(L, Needle)"));
    }

    #[test]
    fn keys_and_histograms() {
        assert_eq!(
            sequence_key(&[mp("Release(R, Needle)", 0, 1), mp("Pull(L, Needle)", 2, 3)]),
            "Release(R, Needle), Pull(L, Needle)"
        );
        assert_eq!(sequence_key(&[]), "∅");
        assert_eq!(sequence_key(&[mp("Grasp(R, Needle)", 0, 1)]), "Grasp(R, Needle)");

        let t = trial(
            &[(0, 9, "G6"), (10, 19, "G6"), (20, 29, "G6"), (30, 39, "G2")],
            vec![
                mp("Release(R, Needle)", 0, 4),
                mp("Release(R, Needle)", 10, 14),
                mp("Pull(L, Needle)", 20, 24),
            ],
        );
        let seqs = extract_sequences(&t);
        let g6: GestureId = "G6".parse().unwrap();
        let h = sequence_histogram(&seqs, Task::NeedlePassing, g6);
        assert_eq!(
            h,
            [
                ("Release(R, Needle)".to_string(), 2),
                ("Pull(L, Needle)".to_string(), 1)
            ]
        );
        assert!(sequence_histogram(&[], Task::NeedlePassing, g6).is_empty());
        let g2 = sequence_histogram(&seqs, Task::NeedlePassing, "G2".parse().unwrap());
        assert_eq!(g2, [("∅".to_string(), 1)]);
    }

    fn arb_channel_transcript() -> impl Strategy<Value = Vec<MotionPrimitive>> {
        let labels = [
            "Touch(L, Needle)",
            "Untouch(L, Needle)",
            "Grasp(L, Needle)",
            "Release(L, Needle)",
            "Touch(R, Needle)",
            "Grasp(R, Needle)",
            "Release(R, Needle)",
            "Untouch(R, Needle)",
        ];
        prop::collection::vec((0usize..labels.len(), 1u32..6, 0u32..3), 0..30).prop_map(move |items| {
            let mut clock = [0u32; 2];
            let mut out: Vec<_> = items
                .into_iter()
                .map(|(l, dur, gap)| {
                    let label = labels[l];
                    let c = usize::from(label.contains("(R"));
                    let start = clock[c] + gap;
                    clock[c] = start + dur;
                    mp(label, start, start + dur - 1)
                })
                .collect();
            out.sort_by(transcript_order);
            out
        })
    }

    proptest! {
        #[test]
        fn merge_idempotent(t in arb_channel_transcript()) {
            let once = merge_touch_grasp(&t);
            prop_assert_eq!(merge_touch_grasp(&once), once);
        }
    }
}
