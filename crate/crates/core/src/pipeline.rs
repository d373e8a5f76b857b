//! The full analysis over a loaded corpus: merge, extract, detect, aggregate.

use std::collections::BTreeMap;

use crate::graphs::{annotate_graph, build_state_graph, StateGraph};
use crate::ingest::{Corpus, TrialData};
use crate::inverse::{detect_inverse_trial, detect_sequence, DetectionOptions};
use crate::model::{CanonicalTable, GestureId, InverseInstance, Skill, Task};
use crate::qc::{run_qc, QcFlag};
use crate::seqops::{extract_sequences, normalize_trial, MpSequence};
use crate::stats::{
    analysed_sequences, clip_coverage, correlate_grs, correlation_table, count_by_type_and_gesture, trial_features,
    AggregateTable, CorrelationRow, CoverageGrouping, Feature, TrialFeatures,
};

#[derive(Debug, Clone)]
pub struct Analysis {
    /// Trials with merged MP transcripts.
    pub trials: Vec<TrialData>,
    /// One sequence per gesture instance, all gestures.
    pub sequences: Vec<MpSequence>,
    /// Sequences of gestures that have a canonical entry.
    pub analysed: Vec<MpSequence>,
    /// Gesture-level detections over `analysed`.
    pub gesture_instances: Vec<InverseInstance>,
    /// Trial-level detections over whole transcripts.
    pub trial_instances: Vec<InverseInstance>,
    pub features: Vec<TrialFeatures>,
}

impl Analysis {
    pub fn run(corpus: &Corpus, table: &CanonicalTable, opts: &DetectionOptions) -> Analysis {
        let trials: Vec<TrialData> = corpus.trials.iter().map(normalize_trial).collect();
        let sequences: Vec<MpSequence> = trials.iter().flat_map(extract_sequences).collect();
        let analysed = analysed_sequences(&sequences, table);
        let gesture_instances = analysed.iter().flat_map(|s| detect_sequence(s, table, opts)).collect();
        let trial_instances = trials
            .iter()
            .flat_map(|t| detect_inverse_trial(t, table, opts))
            .collect();
        let features = trials.iter().map(|t| trial_features(t, table, opts)).collect();
        Analysis {
            trials,
            sequences,
            analysed,
            gesture_instances,
            trial_instances,
            features,
        }
    }

    pub fn tasks(&self) -> Vec<Task> {
        let mut t: Vec<Task> = self.trials.iter().map(|t| t.record.task).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn fps_of(&self, trial_id: &str) -> f64 {
        self.trials
            .iter()
            .find(|t| t.trial_id() == trial_id)
            .map_or(crate::model::DEFAULT_FPS, |t| t.record.fps)
    }

    /// Per-task type-by-gesture counts, then the all-task table.
    pub fn count_tables(&self, table: &CanonicalTable) -> Vec<AggregateTable> {
        let mut out = Vec::new();
        for task in self.tasks() {
            let insts: Vec<InverseInstance> = self
                .gesture_instances
                .iter()
                .filter(|i| i.trial.as_ref().is_some_and(|r| r.task == task))
                .cloned()
                .collect();
            let mut t = count_by_type_and_gesture(&insts, &table.gestures(task));
            t.name = format!("{}_{}", t.name, task.code());
            t.title = format!("{} ({})", t.title, task.display_name());
            out.push(t);
        }
        out.push(count_by_type_and_gesture(
            &self.gesture_instances,
            &table.all_gestures(),
        ));
        out
    }

    pub fn coverage_tables(&self) -> Vec<AggregateTable> {
        [CoverageGrouping::GestureByTask, CoverageGrouping::SkillByTask]
            .into_iter()
            .map(|g| clip_coverage(&self.analysed, &self.gesture_instances, g))
            .collect()
    }

    pub fn correlations(&self, feature: Feature) -> Vec<(Task, Vec<CorrelationRow>)> {
        self.tasks()
            .into_iter()
            .map(|task| (task, correlate_grs(&self.features, feature, task)))
            .collect()
    }

    pub fn correlation_tables(&self) -> Vec<AggregateTable> {
        [Feature::Count, Feature::DurationSeconds]
            .into_iter()
            .map(|f| correlation_table(&self.correlations(f), f))
            .collect()
    }

    /// Annotated graphs keyed by (task, gesture, skill).
    pub fn graphs(
        &self,
        table: &CanonicalTable,
        opts: &DetectionOptions,
    ) -> BTreeMap<(Task, GestureId, Skill), StateGraph> {
        let mut groups: BTreeMap<(Task, GestureId, Skill), Vec<MpSequence>> = BTreeMap::new();
        for s in &self.sequences {
            groups
                .entry((s.trial.task, s.gesture.gesture, s.trial.skill))
                .or_default()
                .push(s.clone());
        }
        groups
            .into_iter()
            .map(|((task, g, skill), seqs)| {
                let graph = annotate_graph(&build_state_graph(&seqs), table.lookup(task, g), opts);
                ((task, g, skill), graph)
            })
            .collect()
    }

    pub fn qc(&self, table: &CanonicalTable) -> (Vec<QcFlag>, AggregateTable) {
        run_qc(&self.sequences, table)
    }
}
