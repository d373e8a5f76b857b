//! MP state-transition graphs and their DOT / JSON renderings.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::inverse::{canonical_match, DetectionOptions};
use crate::model::{CanonicalEntry, MpSignature};
use crate::seqops::MpSequence;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum Node {
    Start,
    Mp(MpSignature),
    End,
}

impl Node {
    pub fn name(&self) -> String {
        match self {
            Node::Start => "START".into(),
            Node::Mp(sig) => sig.label(),
            Node::End => "END".into(),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFlag {
    Canonical,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeData {
    pub count: u64,
    pub flag: Option<EdgeFlag>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateGraph {
    pub edges: BTreeMap<(Node, Node), EdgeData>,
    pub sequence_count: u64,
}

impl StateGraph {
    pub fn nodes(&self) -> Vec<Node> {
        let mut nodes: Vec<Node> = self.edges.keys().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        nodes.sort();
        nodes.dedup();
        nodes
    }

    pub fn count(&self, from: &Node, to: &Node) -> u64 {
        self.edges.get(&(from.clone(), to.clone())).map_or(0, |e| e.count)
    }

    pub fn flag(&self, from: &Node, to: &Node) -> Option<EdgeFlag> {
        self.edges.get(&(from.clone(), to.clone())).and_then(|e| e.flag)
    }

    pub fn in_count(&self, node: &Node) -> u64 {
        self.edges
            .iter()
            .filter(|((_, b), _)| b == node)
            .map(|(_, e)| e.count)
            .sum()
    }

    pub fn out_count(&self, node: &Node) -> u64 {
        self.edges
            .iter()
            .filter(|((a, _), _)| a == node)
            .map(|(_, e)| e.count)
            .sum()
    }

    /// Drops edges below `min_count`; flow conservation may no longer hold.
    pub fn pruned(&self, min_count: u64) -> StateGraph {
        StateGraph {
            edges: self
                .edges
                .iter()
                .filter(|(_, e)| e.count >= min_count)
                .map(|(k, e)| (k.clone(), e.clone()))
                .collect(),
            sequence_count: self.sequence_count,
        }
    }

    fn bump(&mut self, from: Node, to: Node) {
        self.edges
            .entry((from, to))
            .or_insert(EdgeData { count: 0, flag: None })
            .count += 1;
    }
}

/// Counts START -> mp1 -> ... -> mpk -> END transitions over all sequences.
/// Nodes are labels, so frame intervals are dropped.
pub fn build_state_graph(sequences: &[MpSequence]) -> StateGraph {
    let mut g = StateGraph::default();
    for seq in sequences {
        g.sequence_count += 1;
        let mut prev = Node::Start;
        for mp in &seq.mps {
            let next = Node::Mp(mp.signature());
            g.bump(prev, next.clone());
            prev = next;
        }
        g.bump(prev, Node::End);
    }
    g
}

fn is_inverse_edge(a: &MpSignature, b: &MpSignature, opts: &DetectionOptions) -> bool {
    let same_channel = a.actor == b.actor && a.object == b.object;
    (same_channel && a.verb.negates(b.verb)) || (opts.enable_push_pull_rule && a.is_needle_push() && b.is_needle_pull())
}

/// Flags canonical-chain edges green and negating-pair edges red. An edge on
/// the chain is never flagged inverse.
pub fn annotate_graph(g: &StateGraph, canonical: Option<&CanonicalEntry>, opts: &DetectionOptions) -> StateGraph {
    let chain: Vec<(Node, Node)> = canonical
        .map(|e| {
            e.pattern
                .windows(2)
                .map(|w| (Node::Mp(w[0].clone()), Node::Mp(w[1].clone())))
                .collect()
        })
        .unwrap_or_default();
    let mut out = g.clone();
    for ((a, b), data) in out.edges.iter_mut() {
        data.flag = if chain.iter().any(|(x, y)| x == a && y == b) {
            Some(EdgeFlag::Canonical)
        } else {
            match (a, b) {
                (Node::Mp(x), Node::Mp(y)) if is_inverse_edge(x, y, opts) => Some(EdgeFlag::Inverse),
                _ => None,
            }
        };
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn emit_dot(g: &StateGraph, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(name));
    out.push_str("  rankdir=LR;\n");
    for node in g.nodes() {
        let shape = match node {
            Node::Mp(_) => "box",
            _ => "ellipse",
        };
        let _ = writeln!(out, "  {} [shape={shape}];", quote(&node.name()));
    }
    let mut edges: Vec<(&(Node, Node), &EdgeData)> = g.edges.iter().collect();
    edges.sort_by_key(|(k, _)| (k.0.name(), k.1.name()));
    for ((a, b), data) in edges {
        let color = match data.flag {
            Some(EdgeFlag::Canonical) => "green",
            Some(EdgeFlag::Inverse) => "red",
            None => "black",
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\", color=\"{color}\"];",
            quote(&a.name()),
            quote(&b.name()),
            data.count
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdgeJson {
    pub from: String,
    pub to: String,
    pub count: u64,
    pub flag: Option<EdgeFlag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub name: String,
    pub sequence_count: u64,
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdgeJson>,
}

pub fn graph_json(g: &StateGraph, name: &str) -> GraphJson {
    GraphJson {
        name: name.to_string(),
        sequence_count: g.sequence_count,
        nodes: g.nodes().iter().map(Node::name).collect(),
        edges: g
            .edges
            .iter()
            .map(|((a, b), e)| GraphEdgeJson {
                from: a.name(),
                to: b.name(),
                count: e.count,
                flag: e.flag,
            })
            .collect(),
    }
}

/// Most frequent START-to-END walk, choosing the heaviest outgoing edge at
/// each step (ties by label) and never revisiting a node.
pub fn dominant_path(g: &StateGraph) -> Vec<Node> {
    let mut path = vec![Node::Start];
    let mut cur = Node::Start;
    while cur != Node::End {
        let next = g
            .edges
            .iter()
            .filter(|((a, b), _)| *a == cur && !path.contains(b))
            .max_by(|x, y| x.1.count.cmp(&y.1.count).then_with(|| y.0 .1.cmp(&x.0 .1)))
            .map(|((_, b), _)| b.clone());
        match next {
            Some(n) => {
                path.push(n.clone());
                cur = n;
            }
            None => break,
        }
    }
    path
}

/// True when the canonical pattern appears as a contiguous chain in `path`.
pub fn path_contains_chain(path: &[Node], chain: &[MpSignature]) -> bool {
    if chain.is_empty() {
        return true;
    }
    let want: Vec<Node> = chain.iter().cloned().map(Node::Mp).collect();
    path.windows(want.len()).any(|w| w == want.as_slice())
}

/// Share of sequences whose greedy canonical match is complete.
pub fn canonical_completion_rate(sequences: &[MpSequence], entry: &CanonicalEntry) -> Option<f64> {
    if sequences.is_empty() {
        return None;
    }
    let full = sequences
        .iter()
        .filter(|s| canonical_match(&s.mps, &entry.pattern).len() == entry.pattern.len())
        .count();
    Some(full as f64 / sequences.len() as f64)
}
