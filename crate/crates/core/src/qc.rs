//! Annotation quality checks: MPs leaking in from neighbouring gestures and
//! probable gesture mislabels. Flags are advisory; nothing is rewritten.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::inverse::canonical_match;
use crate::model::{CanonicalTable, GestureId, GestureInstance, MotionPrimitive, MpSignature, Task, TrialRef};
use crate::seqops::MpSequence;
use crate::stats::{AggregateTable, Cell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QcKind {
    BoundaryLeakage,
    SignatureMismatch,
    TrailingCanonical,
    RepeatedCanonical,
}

impl QcKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QcKind::BoundaryLeakage => "BoundaryLeakage",
            QcKind::SignatureMismatch => "SignatureMismatch",
            QcKind::TrailingCanonical => "TrailingCanonical",
            QcKind::RepeatedCanonical => "RepeatedCanonical",
        }
    }
}

impl fmt::Display for QcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSide {
    Before,
    After,
}

impl NeighborSide {
    pub fn as_str(self) -> &'static str {
        match self {
            NeighborSide::Before => "before",
            NeighborSide::After => "after",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborRef {
    pub side: NeighborSide,
    pub gesture: GestureInstance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcFlag {
    pub trial: TrialRef,
    pub gesture: GestureInstance,
    pub kind: QcKind,
    /// Offending MPs, with their frame intervals.
    pub mps: Vec<MotionPrimitive>,
    pub suggested_gesture: Option<GestureId>,
    pub neighbor: Option<NeighborRef>,
    pub note: String,
}

impl QcFlag {
    pub fn mp_list(&self) -> String {
        self.mps
            .iter()
            .map(|m| format!("{} [{}-{}]", m.label(), m.start_frame, m.end_frame))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn sort_flags(flags: &mut [QcFlag]) {
    flags.sort_by(|a, b| {
        (
            &a.trial.trial_id,
            a.gesture.start_frame,
            a.kind,
            a.gesture.ordinal,
            &a.note,
        )
            .cmp(&(
                &b.trial.trial_id,
                b.gesture.start_frame,
                b.kind,
                b.gesture.ordinal,
                &b.note,
            ))
    });
}

/// Groups sequences by trial, each trial ordered by gesture ordinal.
fn by_trial(sequences: &[MpSequence]) -> BTreeMap<&str, Vec<&MpSequence>> {
    let mut out: BTreeMap<&str, Vec<&MpSequence>> = BTreeMap::new();
    for s in sequences {
        out.entry(s.trial.trial_id.as_str()).or_default().push(s);
    }
    for v in out.values_mut() {
        v.sort_by_key(|s| s.gesture.ordinal);
    }
    out
}

fn pattern_has(pattern: &[MpSignature], mp: &MotionPrimitive) -> bool {
    pattern.iter().any(|sig| mp.matches(sig))
}

fn is_exactly_canonical(seq: &MpSequence, table: &CanonicalTable) -> bool {
    table.lookup(seq.trial.task, seq.gesture.gesture).is_some_and(|e| {
        e.pattern.len() == seq.mps.len() && seq.mps.iter().zip(&e.pattern).all(|(m, sig)| m.matches(sig))
    })
}

/// Boundary leakage: MPs inside a clip that belong to the canonical pattern
/// of the actual previous or next gesture instance but not to the clip's own
/// pattern. MPs that straddle the shared boundary are expected duplicates and
/// are skipped. Only gestures with a canonical entry are checked, on both
/// sides.
pub fn boundary_flags(sequences: &[MpSequence], table: &CanonicalTable) -> Vec<QcFlag> {
    let mut flags = Vec::new();
    for seqs in by_trial(sequences).values() {
        for (i, seq) in seqs.iter().enumerate() {
            let Some(own) = table.lookup(seq.trial.task, seq.gesture.gesture) else {
                continue;
            };
            if is_exactly_canonical(seq, table) {
                continue;
            }
            let neighbors = [
                (NeighborSide::Before, i.checked_sub(1).map(|j| seqs[j])),
                (NeighborSide::After, seqs.get(i + 1).copied()),
            ];
            for (side, neighbor) in neighbors {
                let Some(nb) = neighbor else { continue };
                let Some(nb_entry) = table.lookup(nb.trial.task, nb.gesture.gesture) else {
                    continue;
                };
                let leaked: Vec<MotionPrimitive> = seq
                    .mps
                    .iter()
                    .filter(|m| !m.intersects(nb.gesture.start_frame, nb.gesture.end_frame))
                    .filter(|m| pattern_has(&nb_entry.pattern, m) && !pattern_has(&own.pattern, m))
                    .cloned()
                    .collect();
                if leaked.is_empty() {
                    continue;
                }
                flags.push(QcFlag {
                    trial: seq.trial.clone(),
                    gesture: seq.gesture.clone(),
                    kind: QcKind::BoundaryLeakage,
                    mps: leaked,
                    suggested_gesture: None,
                    neighbor: Some(NeighborRef {
                        side,
                        gesture: nb.gesture.clone(),
                    }),
                    note: format!(
                        "canonical MPs of the {} {} {}",
                        nb.gesture.gesture,
                        side.as_str(),
                        seq.gesture.gesture
                    ),
                });
            }
        }
    }
    sort_flags(&mut flags);
    flags
}

/// Frequency of each leaked MP per (task, gesture, neighbour gesture, side).
pub fn boundary_table(flags: &[QcFlag]) -> AggregateTable {
    let mut counts: BTreeMap<(Task, GestureId, String, GestureId, NeighborSide), u64> = BTreeMap::new();
    for f in flags.iter().filter(|f| f.kind == QcKind::BoundaryLeakage) {
        let Some(nb) = &f.neighbor else { continue };
        for m in &f.mps {
            *counts
                .entry((f.trial.task, f.gesture.gesture, m.label(), nb.gesture.gesture, nb.side))
                .or_default() += 1;
        }
    }
    let mut rows: Vec<_> = counts.into_iter().collect();
    rows.sort_by(|a, b| {
        (a.0 .0, a.0 .1)
            .cmp(&(b.0 .0, b.0 .1))
            .then(b.1.cmp(&a.1))
            .then(a.0.cmp(&b.0))
    });
    AggregateTable {
        name: "boundary_mps".into(),
        title: "MPs of neighbouring gestures found in each gesture".into(),
        columns: ["Task", "Gesture", "MP", "Neighbor", "Count"]
            .map(String::from)
            .to_vec(),
        rows: rows
            .into_iter()
            .map(|((task, g, label, nb, side), n)| {
                vec![
                    Cell::text(task.display_name()),
                    Cell::text(g.to_string()),
                    Cell::text(label),
                    Cell::text(format!("{nb} {}", side.as_str())),
                    Cell::count(n),
                ]
            })
            .collect(),
    }
}

pub fn boundary_mp_report(sequences: &[MpSequence], table: &CanonicalTable) -> (Vec<QcFlag>, AggregateTable) {
    let flags = boundary_flags(sequences, table);
    let agg = boundary_table(&flags);
    (flags, agg)
}

/// MP signatures that occur in exactly one canonical pattern of `task`,
/// mapped to that gesture.
pub fn signature_mps(table: &CanonicalTable, task: Task) -> HashMap<MpSignature, GestureId> {
    let mut seen: HashMap<MpSignature, Vec<GestureId>> = HashMap::new();
    for entry in table.for_task(task) {
        for sig in &entry.pattern {
            let owners = seen.entry(sig.clone()).or_default();
            if !owners.contains(&entry.gesture) {
                owners.push(entry.gesture);
            }
        }
    }
    seen.into_iter()
        .filter(|(_, owners)| owners.len() == 1)
        .map(|(sig, owners)| (sig, owners[0]))
        .collect()
}

fn disjoint_full_matches(mps: &[MotionPrimitive], pattern: &[MpSignature]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < mps.len() {
        let m = canonical_match(&mps[offset..], pattern);
        if m.len() < pattern.len() || m.is_empty() {
            break;
        }
        let last = *m.last().expect("non-empty");
        out.push(m.iter().map(|k| k + offset).collect());
        offset += last + 1;
    }
    out
}

fn signature_mismatch(seq: &MpSequence, sigs: &HashMap<MpSignature, GestureId>) -> Vec<QcFlag> {
    let inside =
        |m: &&MotionPrimitive| m.start_frame >= seq.gesture.start_frame && m.end_frame <= seq.gesture.end_frame;
    let mut by_owner: BTreeMap<GestureId, Vec<MotionPrimitive>> = BTreeMap::new();
    for m in seq.mps.iter().filter(inside) {
        if let Some(&owner) = sigs.get(&m.signature()) {
            if owner != seq.gesture.gesture {
                by_owner.entry(owner).or_default().push(m.clone());
            }
        }
    }
    by_owner
        .into_iter()
        .map(|(owner, mps)| QcFlag {
            trial: seq.trial.clone(),
            gesture: seq.gesture.clone(),
            kind: QcKind::SignatureMismatch,
            note: format!("{} clip contains MPs unique to {owner}", seq.gesture.gesture),
            mps,
            suggested_gesture: Some(owner),
            neighbor: None,
        })
        .collect()
}

fn trailing_canonical(seq: &MpSequence, table: &CanonicalTable) -> Option<QcFlag> {
    let own = table.lookup(seq.trial.task, seq.gesture.gesture)?;
    // the labelled pattern may lose a leading straddler
    let own_tail = if own.pattern.len() >= 2 {
        &own.pattern[1..]
    } else {
        &own.pattern[..]
    };
    // trailing straddlers are boundary duplicates, not part of this clip's suffix
    let mps: Vec<MotionPrimitive> = seq
        .mps
        .iter()
        .filter(|m| m.end_frame <= seq.gesture.end_frame)
        .cloned()
        .collect();
    let mut best: Option<(usize, GestureId)> = None;
    for other in table.for_task(seq.trial.task) {
        let k = other.pattern.len();
        if other.gesture == own.gesture || k == 0 || k >= mps.len() {
            continue;
        }
        let (prefix, suffix) = mps.split_at(mps.len() - k);
        if !suffix.iter().zip(&other.pattern).all(|(m, sig)| m.matches(sig)) {
            continue;
        }
        if canonical_match(prefix, own_tail).len() < own_tail.len() {
            continue;
        }
        if best.is_none_or(|(bk, bg)| k > bk || (k == bk && other.gesture < bg)) {
            best = Some((k, other.gesture));
        }
    }
    let (k, suggested) = best?;
    Some(QcFlag {
        trial: seq.trial.clone(),
        gesture: seq.gesture.clone(),
        kind: QcKind::TrailingCanonical,
        mps: mps[mps.len() - k..].to_vec(),
        suggested_gesture: Some(suggested),
        neighbor: None,
        note: format!(
            "{} clip ends with the full canonical sequence of {suggested}",
            seq.gesture.gesture
        ),
    })
}

fn repeated_canonical(seq: &MpSequence, table: &CanonicalTable) -> Option<QcFlag> {
    let own = table.lookup(seq.trial.task, seq.gesture.gesture)?;
    let matches = disjoint_full_matches(&seq.mps, &own.pattern);
    if matches.len() < 2 {
        return None;
    }
    Some(QcFlag {
        trial: seq.trial.clone(),
        gesture: seq.gesture.clone(),
        kind: QcKind::RepeatedCanonical,
        mps: matches.iter().flatten().map(|&i| seq.mps[i].clone()).collect(),
        suggested_gesture: None,
        neighbor: None,
        note: format!(
            "canonical sequence of {} occurs {} times",
            seq.gesture.gesture,
            matches.len()
        ),
    })
}

/// Signature mismatches, trailing canonical sequences of another gesture and
/// repeated canonical sequences, over clips of gestures with a canonical
/// entry. MPs straddling the clip window are ignored by the signature rule.
pub fn flag_mislabels(sequences: &[MpSequence], table: &CanonicalTable) -> Vec<QcFlag> {
    let mut sig_cache: HashMap<Task, HashMap<MpSignature, GestureId>> = HashMap::new();
    let mut flags = Vec::new();
    for seq in sequences {
        if table.lookup(seq.trial.task, seq.gesture.gesture).is_none() || is_exactly_canonical(seq, table) {
            continue;
        }
        let sigs = sig_cache
            .entry(seq.trial.task)
            .or_insert_with(|| signature_mps(table, seq.trial.task));
        flags.extend(signature_mismatch(seq, sigs));
        flags.extend(trailing_canonical(seq, table));
        flags.extend(repeated_canonical(seq, table));
    }
    sort_flags(&mut flags);
    flags
}

/// Every QC flag for the given sequences, sorted.
pub fn run_qc(sequences: &[MpSequence], table: &CanonicalTable) -> (Vec<QcFlag>, AggregateTable) {
    let (mut flags, agg) = boundary_mp_report(sequences, table);
    flags.extend(flag_mislabels(sequences, table));
    sort_flags(&mut flags);
    (flags, agg)
}
