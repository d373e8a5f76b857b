//! Motion-primitive (MP) sequence analytics for annotated surgical activity
//! transcripts: merging, per-gesture extraction, inverse-MP detection,
//! rank correlation with skill scores, state graphs and annotation QC.

pub mod cli;
pub mod graphs;
pub mod ingest;
pub mod inverse;
pub mod model;
pub mod pipeline;
pub mod qc;
pub mod report;
pub mod seqops;
pub mod stats;
pub mod synth;

pub use ingest::{Corpus, TrialData};
pub use inverse::{detect_inverse, CountingMode, DetectionOptions};
pub use model::{
    builtin_canonical_table, CanonicalTable, GestureId, InverseInstance, MotionPrimitive, MpSignature, Skill, Task,
};
pub use pipeline::Analysis;
