//! Brute-force reference implementations used by the integration tests.
//! Nothing here calls into the detector or merge code under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use mpscope::model::{Actor, MotionPrimitive, MpSignature, TargetObject, Verb};
use rand::seq::IndexedRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Greedy,
    Pairs,
    Runs,
}

fn same_channel(a: &MotionPrimitive, b: &MotionPrimitive) -> bool {
    a.actor == b.actor && a.object == b.object
}

fn negating(a: Verb, b: Verb) -> bool {
    use Verb::*;
    matches!(
        (a, b),
        (Touch, Untouch) | (Untouch, Touch) | (Grasp, Release) | (Release, Grasp)
    )
}

fn needle_push(m: &MotionPrimitive) -> bool {
    m.verb == Verb::Push
        && m.actor == Actor::Object(TargetObject::Needle)
        && matches!(m.object, TargetObject::Fabric | TargetObject::Ring)
}

fn needle_pull(m: &MotionPrimitive) -> bool {
    m.verb == Verb::Pull && matches!(m.actor, Actor::Left | Actor::Right) && m.object == TargetObject::Needle
}

fn object_class(o: &TargetObject) -> String {
    match o {
        TargetObject::Fabric | TargetObject::Ring => "F/R".into(),
        other => other.to_string(),
    }
}

/// First greedy subsequence match of `pattern`, possibly partial.
pub fn oracle_canonical_mask(seq: &[MotionPrimitive], pattern: &[MpSignature]) -> Vec<bool> {
    let mut mask = vec![false; seq.len()];
    let mut next = 0;
    for (i, m) in seq.iter().enumerate() {
        if next == pattern.len() {
            break;
        }
        let p = &pattern[next];
        if m.verb == p.verb && m.actor == p.actor && m.object == p.object {
            mask[i] = true;
            next += 1;
        }
    }
    mask
}

/// Every candidate pair `(i, j)`, i < j, by direct pairwise search.
pub fn oracle_candidates(seq: &[MotionPrimitive], mask: Option<&[bool]>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            let (a, b) = (&seq[i], &seq[j]);
            let channel =
                same_channel(a, b) && negating(a.verb, b.verb) && (i + 1..j).all(|k| !same_channel(&seq[k], a));
            let push_pull =
                needle_push(a) && needle_pull(b) && (i + 1..j).all(|k| !(needle_push(&seq[k]) || needle_pull(&seq[k])));
            if !(channel || push_pull) {
                continue;
            }
            if mask.is_some_and(|m| m[i] && m[j]) {
                continue;
            }
            out.push((i, j));
        }
    }
    out
}

pub fn oracle_label(seq: &[MotionPrimitive], members: &[usize]) -> String {
    let first = &seq[members[0]];
    let o = object_class(&first.object);
    if first.verb == Verb::Push {
        return format!("Push(Needle, {o}) Pull({}, Needle)", seq[members[1]].actor);
    }
    let a = &first.actor;
    match first.verb {
        Verb::Touch | Verb::Untouch => format!("Touch({a}, {o}) Untouch({a}, {o})"),
        _ => format!("Grasp({a}, {o}) Release({a}, {o})"),
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Reference detector output: (type label, member indices), sorted.
pub fn oracle_detect(
    seq: &[MotionPrimitive],
    pattern: Option<&[MpSignature]>,
    mode: OracleMode,
) -> Vec<(String, Vec<usize>)> {
    let mask = pattern.map(|p| oracle_canonical_mask(seq, p));
    oracle_group(seq, &oracle_candidates(seq, mask.as_deref()), mode)
}

/// Counts precomputed candidate pairs under `mode`.
pub fn oracle_group(seq: &[MotionPrimitive], cands: &[(usize, usize)], mode: OracleMode) -> Vec<(String, Vec<usize>)> {
    let groups: Vec<Vec<usize>> = match mode {
        OracleMode::Pairs => cands.iter().map(|&(i, j)| vec![i, j]).collect(),
        OracleMode::Greedy => {
            let mut used = vec![false; seq.len()];
            let mut sorted = cands.to_vec();
            sorted.sort();
            let mut out = Vec::new();
            for (i, j) in sorted {
                if !used[i] && !used[j] {
                    used[i] = true;
                    used[j] = true;
                    out.push(vec![i, j]);
                }
            }
            out
        }
        OracleMode::Runs => {
            let mut parent: Vec<usize> = (0..seq.len()).collect();
            for &(i, j) in cands {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
            let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &(i, j) in cands {
                for x in [i, j] {
                    let r = find(&mut parent, x);
                    comps.entry(r).or_default().push(x);
                }
            }
            comps
                .into_values()
                .map(|mut v| {
                    v.sort();
                    v.dedup();
                    v
                })
                .collect()
        }
    };
    let mut out: Vec<(String, Vec<usize>)> = groups.into_iter().map(|g| (oracle_label(seq, &g), g)).collect();
    out.sort();
    out
}

/// Reference merge: repeatedly fold the first mergeable adjacent pair of
/// any channel until none is left.
pub fn oracle_merge(mps: &[MotionPrimitive]) -> Vec<MotionPrimitive> {
    let mut cur = mps.to_vec();
    'outer: loop {
        for i in 0..cur.len() {
            let Some(j) = (i + 1..cur.len()).find(|&j| same_channel(&cur[i], &cur[j])) else {
                continue;
            };
            let merged = match (cur[i].verb, cur[j].verb) {
                (Verb::Touch, Verb::Grasp) => Verb::Grasp,
                (Verb::Release, Verb::Untouch) => Verb::Release,
                _ => continue,
            };
            let mut m = cur[j].clone();
            m.verb = merged;
            m.start_frame = cur[i].start_frame;
            cur.remove(j);
            cur[i] = m;
            continue 'outer;
        }
        break;
    }
    cur
}

pub fn sig(label: &str) -> MpSignature {
    label.parse().unwrap()
}

/// All MP signatures over the six verbs, actors {L, R, Needle} and objects
/// {Needle, Thread, Fabric, Ring}, minus Needle acting on itself.
pub fn full_alphabet() -> Vec<MpSignature> {
    let actors = [Actor::Left, Actor::Right, Actor::Object(TargetObject::Needle)];
    let objects = [
        TargetObject::Needle,
        TargetObject::Thread,
        TargetObject::Fabric,
        TargetObject::Ring,
    ];
    let mut out = Vec::new();
    for verb in Verb::ALL {
        for actor in &actors {
            for object in &objects {
                if let Ok(s) = MpSignature::new(verb, actor.clone(), object.clone()) {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// MPs laid end to end: MP `i` covers frames `[2i, 2i + 1]`.
pub fn sequential(sigs: &[&MpSignature]) -> Vec<MotionPrimitive> {
    sigs.iter()
        .enumerate()
        .map(|(i, s)| MotionPrimitive::new((*s).clone(), 2 * i as u32, 2 * i as u32 + 1).unwrap())
        .collect()
}

/// Calls `f` with every sequence of length `0..=max_len` over `alphabet`.
pub fn for_each_sequence(alphabet: &[MpSignature], max_len: usize, mut f: impl FnMut(&[&MpSignature])) {
    let mut idx: Vec<usize> = Vec::with_capacity(max_len);
    let mut buf: Vec<&MpSignature> = Vec::with_capacity(max_len);
    for len in 0..=max_len {
        idx.clear();
        idx.resize(len, 0);
        loop {
            buf.clear();
            buf.extend(idx.iter().map(|&i| &alphabet[i]));
            f(&buf);
            let mut pos = len;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < alphabet.len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX || len == 0 {
                break;
            }
        }
    }
}

/// A transcript with per-channel non-overlapping MPs, channels interleaved
/// and overlapping in time, in transcript order.
pub fn random_transcript(rng: &mut impl Rng, alphabet: &[MpSignature], max_len: usize) -> Vec<MotionPrimitive> {
    let len = rng.random_range(0..=max_len);
    let mut clocks: BTreeMap<String, u32> = BTreeMap::new();
    let mut out: Vec<MotionPrimitive> = (0..len)
        .map(|_| {
            let s = alphabet.choose(rng).unwrap().clone();
            let key = format!("{}|{}", s.actor, s.object);
            let clock = clocks.entry(key).or_insert_with(|| rng.random_range(0..20));
            let start = *clock + rng.random_range(0..4);
            let end = start + rng.random_range(0..12);
            *clock = end + 1;
            MotionPrimitive::new(s, start, end).unwrap()
        })
        .collect();
    out.sort_by(|a, b| {
        (a.start_frame, a.end_frame, a.channel().to_string(), a.verb).cmp(&(
            b.start_frame,
            b.end_frame,
            b.channel().to_string(),
            b.verb,
        ))
    });
    out
}
