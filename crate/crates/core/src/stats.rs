//! Aggregation of inverse-MP results into tables, and Spearman rank
//! correlation against GRS scores.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::ingest::TrialData;
use crate::inverse::{detect_inverse_trial, instance_duration_seconds, DetectionOptions};
use crate::model::{
    CanonicalTable, CorrelationResult, GestureId, GrsSubscore, InverseInstance, InverseTypeKey, Skill, Task,
    TrialRecord,
};
use crate::seqops::MpSequence;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("at least 3 paired observations are required, got {0}")]
    TooFewObservations(usize),
    #[error("paired inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("an input is constant; the rank correlation is undefined")]
    DegenerateInput,
}

/// One table cell. JSON renderings keep full precision; text renderings
/// apply the report number formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cell {
    Empty,
    Text { value: String },
    Count { value: u64 },
    Ratio { numerator: u64, denominator: u64 },
    Rho { value: f64 },
    PValue { value: f64 },
    Number { value: f64 },
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text { value: s.into() }
    }

    pub fn count(n: u64) -> Cell {
        Cell::Count { value: n }
    }

    /// A ratio cell, or an empty cell when the denominator is zero.
    pub fn ratio(numerator: u64, denominator: u64) -> Cell {
        if denominator == 0 {
            Cell::Empty
        } else {
            Cell::Ratio { numerator, denominator }
        }
    }

    pub fn as_count(&self) -> Option<u64> {
        match self {
            Cell::Count { value } => Some(*value),
            _ => None,
        }
    }
}

/// A rectangular table: `columns` are headers, each row has one cell per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    /// File stem used when the table is written out.
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl AggregateTable {
    pub fn column(&self, header: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == header)
    }

    pub fn row(&self, label: &str) -> Option<&[Cell]> {
        self.rows
            .iter()
            .find(|r| matches!(r.first(), Some(Cell::Text { value }) if value == label))
            .map(Vec::as_slice)
    }

    pub fn cell(&self, row_label: &str, column: &str) -> Option<&Cell> {
        let c = self.column(column)?;
        self.row(row_label)?.get(c)
    }
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom,
/// via the regularized incomplete beta function.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Spearman's rho with average-rank ties and a two-sided p-value from the
/// t approximation `t = rho * sqrt((n - 2) / (1 - rho^2))`, `n - 2` df.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or(StatsError::DegenerateInput)?
        .clamp(-1.0, 1.0);
    Ok(CorrelationResult {
        rho,
        p_value: rho_p_value(rho, n),
        n,
    })
}

/// p-value for a given rho and sample size; `|rho| = 1` yields 0.
pub fn rho_p_value(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    student_t_two_sided(rho * (df / denom).sqrt(), df)
}

/// Per-trial inverse-MP totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFeatures {
    pub record: TrialRecord,
    pub inverse_count: usize,
    pub inverse_duration_seconds: f64,
}

/// Runs trial-level detection on a merged trial and sums count and duration.
pub fn trial_features(trial: &TrialData, table: &CanonicalTable, opts: &DetectionOptions) -> TrialFeatures {
    let found = detect_inverse_trial(trial, table, opts);
    TrialFeatures {
        record: trial.record.clone(),
        inverse_count: found.len(),
        inverse_duration_seconds: found
            .iter()
            .map(|i| instance_duration_seconds(i, trial.record.fps))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feature {
    Count,
    DurationSeconds,
}

impl Feature {
    pub fn value(self, f: &TrialFeatures) -> f64 {
        match self {
            Feature::Count => f.inverse_count as f64,
            Feature::DurationSeconds => f.inverse_duration_seconds,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Feature::Count => "count",
            Feature::DurationSeconds => "duration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrsItem {
    Subscore(GrsSubscore),
    Total,
}

impl GrsItem {
    pub fn all() -> Vec<GrsItem> {
        let mut items: Vec<GrsItem> = GrsSubscore::ALL.into_iter().map(GrsItem::Subscore).collect();
        items.push(GrsItem::Total);
        items
    }

    pub fn value(self, r: &TrialRecord) -> f64 {
        match self {
            GrsItem::Subscore(s) => r.subscores.get(s),
            GrsItem::Total => r.grs_total,
        }
    }
}

impl fmt::Display for GrsItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrsItem::Subscore(s) => f.write_str(s.display_name()),
            GrsItem::Total => f.write_str("GRS Score"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub item: GrsItem,
    pub result: Result<CorrelationResult, StatsError>,
}

/// Seven rows (six subscores, then the GRS total) over the trials of `task`.
pub fn correlate_grs(trials: &[TrialFeatures], feature: Feature, task: Task) -> Vec<CorrelationRow> {
    let of_task: Vec<&TrialFeatures> = trials.iter().filter(|t| t.record.task == task).collect();
    let xs: Vec<f64> = of_task.iter().map(|t| feature.value(t)).collect();
    GrsItem::all()
        .into_iter()
        .map(|item| {
            let ys: Vec<f64> = of_task.iter().map(|t| item.value(&t.record)).collect();
            CorrelationRow {
                item,
                result: spearman(&xs, &ys),
            }
        })
        .collect()
}

/// Side-by-side rho/p table for several tasks.
pub fn correlation_table(per_task: &[(Task, Vec<CorrelationRow>)], feature: Feature) -> AggregateTable {
    let mut columns = vec!["GRS Subscore".to_string()];
    for (task, _) in per_task {
        columns.push(format!("{task} rho"));
        columns.push(format!("{task} p-value"));
    }
    let rows = GrsItem::all()
        .into_iter()
        .map(|item| {
            let mut row = vec![Cell::text(item.to_string())];
            for (_, results) in per_task {
                match results.iter().find(|r| r.item == item).map(|r| &r.result) {
                    Some(Ok(c)) => {
                        row.push(Cell::Rho { value: c.rho });
                        row.push(Cell::PValue { value: c.p_value });
                    }
                    _ => row.extend([Cell::Empty, Cell::Empty]),
                }
            }
            row
        })
        .collect();
    let what = match feature {
        Feature::Count => "total number",
        Feature::DurationSeconds => "total duration",
    };
    AggregateTable {
        name: format!("correlation_{}", feature.slug()),
        title: format!("Spearman correlation between GRS scores and the {what} of inverse MPs per trial"),
        columns,
        rows,
    }
}

/// Counts per (inverse type, gesture) with row and column totals. Rows
/// follow the standard type order; columns are `gestures` plus any other
/// gesture seen, and `outside` for unattributed instances when present.
pub fn count_by_type_and_gesture(instances: &[InverseInstance], gestures: &[GestureId]) -> AggregateTable {
    let mut gestures: BTreeSet<GestureId> = gestures.iter().copied().collect();
    gestures.extend(instances.iter().filter_map(|i| i.gesture.as_ref().map(|g| g.gesture)));
    let has_outside = instances.iter().any(|i| i.gesture.is_none());

    let mut types: BTreeSet<InverseTypeKey> = InverseTypeKey::standard_order().into_iter().collect();
    types.extend(instances.iter().map(|i| i.type_key.clone()));

    let mut counts: BTreeMap<(InverseTypeKey, Option<GestureId>), u64> = BTreeMap::new();
    for inst in instances {
        *counts
            .entry((inst.type_key.clone(), inst.gesture.as_ref().map(|g| g.gesture)))
            .or_default() += 1;
    }

    let mut col_keys: Vec<Option<GestureId>> = gestures.into_iter().map(Some).collect();
    if has_outside {
        col_keys.push(None);
    }
    let mut columns = vec!["Inverse MP".to_string()];
    columns.extend(
        col_keys
            .iter()
            .map(|g| g.map_or_else(|| "outside".to_string(), |g| g.to_string())),
    );
    columns.push("Total".into());

    let mut col_totals = vec![0u64; col_keys.len()];
    let mut rows = Vec::new();
    for ty in &types {
        let mut row = vec![Cell::text(ty.label())];
        let mut total = 0;
        for (c, g) in col_keys.iter().enumerate() {
            let n = counts.get(&(ty.clone(), *g)).copied().unwrap_or(0);
            col_totals[c] += n;
            total += n;
            row.push(Cell::count(n));
        }
        row.push(Cell::count(total));
        rows.push(row);
    }
    let mut total_row = vec![Cell::text("Total")];
    total_row.extend(col_totals.iter().map(|&n| Cell::count(n)));
    total_row.push(Cell::count(col_totals.iter().sum()));
    rows.push(total_row);

    AggregateTable {
        name: "inverse_by_type_and_gesture".into(),
        title: "Number of inverse MPs in each gesture".into(),
        columns,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverageGrouping {
    GestureByTask,
    SkillByTask,
}

/// Clips with at least one instance over all clips.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub with_inverse: u64,
    pub total: u64,
}

impl Coverage {
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.with_inverse as f64 / self.total as f64)
    }

    fn add(&mut self, other: Coverage) {
        self.with_inverse += other.with_inverse;
        self.total += other.total;
    }
}

fn flagged_clips(instances: &[InverseInstance]) -> HashSet<(String, usize)> {
    instances
        .iter()
        .filter_map(|i| Some((i.trial.as_ref()?.trial_id.clone(), i.gesture.as_ref()?.ordinal)))
        .collect()
}

/// Coverage per (task, column key) where the key is picked by `key`.
pub fn coverage_counts<K: Ord>(
    sequences: &[MpSequence],
    instances: &[InverseInstance],
    key: impl Fn(&MpSequence) -> K,
) -> BTreeMap<(Task, K), Coverage> {
    let flagged = flagged_clips(instances);
    let mut out: BTreeMap<(Task, K), Coverage> = BTreeMap::new();
    for s in sequences {
        let hit = flagged.contains(&(s.trial.trial_id.clone(), s.gesture.ordinal));
        out.entry((s.trial.task, key(s))).or_default().add(Coverage {
            with_inverse: u64::from(hit),
            total: 1,
        });
    }
    out
}

fn coverage_table<K: Ord + Copy>(
    counts: BTreeMap<(Task, K), Coverage>,
    keys: Vec<K>,
    key_label: impl Fn(K) -> String,
    task_total_column: bool,
) -> (Vec<String>, Vec<Vec<Cell>>) {
    let tasks: BTreeSet<Task> = counts.keys().map(|(t, _)| *t).collect();
    let mut columns = vec!["Task".to_string()];
    columns.extend(keys.iter().map(|&k| key_label(k)));
    if task_total_column {
        columns.push("Total".into());
    }
    let ratio = |c: Coverage| Cell::ratio(c.with_inverse, c.total);

    let mut rows = Vec::new();
    let mut col_totals = vec![Coverage::default(); keys.len()];
    for &task in &tasks {
        let mut row = vec![Cell::text(task.display_name())];
        let mut row_total = Coverage::default();
        for (c, &k) in keys.iter().enumerate() {
            let cov = counts.get(&(task, k)).copied().unwrap_or_default();
            col_totals[c].add(cov);
            row_total.add(cov);
            row.push(ratio(cov));
        }
        if task_total_column {
            row.push(ratio(row_total));
        }
        rows.push(row);
    }
    let mut total_row = vec![Cell::text("Total")];
    total_row.extend(col_totals.iter().map(|&c| ratio(c)));
    if task_total_column {
        let mut all = Coverage::default();
        col_totals.iter().for_each(|&c| all.add(c));
        total_row.push(ratio(all));
    }
    rows.push(total_row);
    (columns, rows)
}

/// Number and share of gesture clips containing at least one inverse MP.
/// `instances` must carry trial and gesture attribution (gesture-level
/// detection output).
pub fn clip_coverage(
    sequences: &[MpSequence],
    instances: &[InverseInstance],
    group_by: CoverageGrouping,
) -> AggregateTable {
    match group_by {
        CoverageGrouping::GestureByTask => {
            let counts = coverage_counts(sequences, instances, |s| s.gesture.gesture);
            let keys: Vec<GestureId> = counts
                .keys()
                .map(|(_, g)| *g)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let (columns, rows) = coverage_table(counts, keys, |g| g.to_string(), false);
            AggregateTable {
                name: "clip_coverage_by_gesture".into(),
                title: "Gesture clips with one or more inverse MPs, by gesture".into(),
                columns,
                rows,
            }
        }
        CoverageGrouping::SkillByTask => {
            let counts = coverage_counts(sequences, instances, |s| s.trial.skill);
            let (columns, rows) = coverage_table(counts, Skill::ALL.to_vec(), |s: Skill| s.to_string(), true);
            AggregateTable {
                name: "clip_coverage_by_skill".into(),
                title: "Gesture clips with one or more inverse MPs, by experience level".into(),
                columns,
                rows,
            }
        }
    }
}

/// Keeps only the clips of gestures that have a canonical entry for their task.
pub fn analysed_sequences(sequences: &[MpSequence], table: &CanonicalTable) -> Vec<MpSequence> {
    sequences
        .iter()
        .filter(|s| table.lookup(s.trial.task, s.gesture.gesture).is_some())
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        builtin_canonical_table, Actor, GestureInstance, InverseKind, MotionPrimitive, ObjectClass, Subscores, TrialRef,
    };

    #[test]
    fn perfect_monotone() {
        let r = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.p_value, 0.0);
        let r = spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap();
        assert_eq!(r.rho, -1.0);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert_eq!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateInput)
        );
        assert_eq!(
            spearman(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::TooFewObservations(2))
        );
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch(3, 2))
        );
        assert_eq!(
            spearman(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::NonFinite)
        );
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0, 3.0]), [1.5, 1.5, 3.0, 4.0]);
        assert_eq!(average_ranks(&[2.0, 1.0, 4.0, 4.0]), [2.0, 1.0, 3.5, 3.5]);
    }

    #[test]
    fn tied_example_matches_hand_computation() {
        // ranks x = [1.5,1.5,3,4], y = [2,1,3.5,3.5]; sxy = 4.0, sxx = syy = 4.5
        let r = spearman(&[1.0, 1.0, 2.0, 3.0], &[2.0, 1.0, 4.0, 4.0]).unwrap();
        assert!((r.rho - 4.0 / 4.5).abs() < 1e-12, "{}", r.rho);
    }

    #[test]
    fn reference_p_values() {
        assert!(
            (rho_p_value(-0.33, 28) - 0.087).abs() <= 0.001,
            "{}",
            rho_p_value(-0.33, 28)
        );
        assert!(
            (rho_p_value(-0.19, 28) - 0.33).abs() <= 0.01,
            "{}",
            rho_p_value(-0.19, 28)
        );
    }

    #[test]
    fn t_distribution_known_values() {
        // t = 2.0, df = 10: two-sided p = 0.07338803477074...
        assert!((student_t_two_sided(2.0, 10.0) - 0.073_388_034_770_740_8).abs() < 1e-10);
        // df = 1 is Cauchy: p = 1 - 2 atan(t) / pi
        let t: f64 = 1.7;
        let cauchy = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
        assert!((student_t_two_sided(t, 1.0) - cauchy).abs() < 1e-12);
        assert_eq!(student_t_two_sided(0.0, 5.0), 1.0);
    }

    fn record(task: Task, skill: Skill, grs: f64) -> TrialRecord {
        TrialRecord {
            task,
            subject: "B".into(),
            trial_index: grs as u32,
            skill,
            grs_total: grs,
            subscores: Subscores::from_fn(|s| grs / 6.0 + s as usize as f64 * 0.01),
            fps: 30.0,
        }
    }

    #[test]
    fn correlate_anti_monotone_feature() {
        let trials: Vec<TrialFeatures> = (1..=10)
            .map(|i| TrialFeatures {
                record: record(Task::KnotTying, Skill::Novice, 6.0 + i as f64),
                inverse_count: 20 - i,
                inverse_duration_seconds: 100.0 / i as f64,
            })
            .collect();
        for feature in [Feature::Count, Feature::DurationSeconds] {
            let rows = correlate_grs(&trials, feature, Task::KnotTying);
            assert_eq!(rows.len(), 7);
            assert_eq!(rows[6].item, GrsItem::Total);
            for r in rows {
                assert_eq!(r.result.unwrap().rho, -1.0);
            }
        }
        let none = correlate_grs(&trials, Feature::Count, Task::Suturing);
        assert!(none.iter().all(|r| r.result == Err(StatsError::TooFewObservations(0))));
    }

    fn instance(trial: &str, gesture: u8, ordinal: usize, kind: InverseKind, actor: Actor) -> InverseInstance {
        InverseInstance {
            type_key: InverseTypeKey {
                kind,
                actor,
                object: ObjectClass::Needle,
            },
            members: vec![
                MotionPrimitive::new("Grasp(L, Needle)".parse().unwrap(), 0, 1).unwrap(),
                MotionPrimitive::new("Release(L, Needle)".parse().unwrap(), 2, 3).unwrap(),
            ],
            trial: Some(TrialRef {
                trial_id: trial.into(),
                task: Task::KnotTying,
                skill: Skill::Novice,
            }),
            gesture: Some(GestureInstance {
                gesture: GestureId::new(gesture).unwrap(),
                start_frame: 0,
                end_frame: 10,
                ordinal,
            }),
            duration_frames: 4,
        }
    }

    #[test]
    fn type_by_gesture_counts() {
        let table = builtin_canonical_table();
        let empty = count_by_type_and_gesture(&[], &table.all_gestures());
        assert_eq!(empty.rows.len(), 15);
        assert_eq!(empty.columns.len(), 11);
        assert!(empty.rows.iter().flat_map(|r| &r[1..]).all(|c| c.as_count() == Some(0)));

        let insts = vec![
            instance("t", 8, 0, InverseKind::GraspRelease, Actor::Left),
            instance("t", 8, 1, InverseKind::GraspRelease, Actor::Left),
        ];
        let t = count_by_type_and_gesture(&insts, &table.gestures(Task::Suturing));
        let label = "Grasp(L, Needle) Release(L, Needle)";
        assert_eq!(t.cell(label, "G8"), Some(&Cell::count(2)));
        assert_eq!(t.cell(label, "Total"), Some(&Cell::count(2)));
        assert_eq!(t.cell("Total", "Total"), Some(&Cell::count(2)));
    }

    fn sequence(trial: &str, gesture: u8, ordinal: usize, skill: Skill) -> MpSequence {
        MpSequence {
            trial: TrialRef {
                trial_id: trial.into(),
                task: Task::KnotTying,
                skill,
            },
            gesture: GestureInstance {
                gesture: GestureId::new(gesture).unwrap(),
                start_frame: 0,
                end_frame: 10,
                ordinal,
            },
            mps: vec![],
        }
    }

    #[test]
    fn coverage_tables() {
        let seqs = vec![sequence("t", 15, 0, Skill::Novice), sequence("t", 15, 1, Skill::Novice)];
        let insts = vec![
            instance("t", 15, 1, InverseKind::GraspRelease, Actor::Right),
            instance("t", 15, 1, InverseKind::TouchUntouch, Actor::Right),
        ];
        let by_g = clip_coverage(&seqs, &insts, CoverageGrouping::GestureByTask);
        assert_eq!(
            by_g.cell("Knot Tying", "G15"),
            Some(&Cell::Ratio {
                numerator: 1,
                denominator: 2
            })
        );
        let by_s = clip_coverage(&seqs, &insts, CoverageGrouping::SkillByTask);
        assert_eq!(by_s.cell("Knot Tying", "Expert"), Some(&Cell::Empty));
        assert_eq!(
            by_s.cell("Total", "Total"),
            Some(&Cell::Ratio {
                numerator: 1,
                denominator: 2
            })
        );
    }
}
