//! Domain types shared by every analysis stage: motion primitives (MPs),
//! gestures, trial metadata, the surgeon-defined canonical MP table and the
//! inverse-MP type keys used for reporting.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame index at the trial's frame rate. Intervals are inclusive on both ends.
pub type Frame = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("malformed motion primitive label `{0}`")]
    BadLabel(String),
    #[error("invalid object name `{0}`")]
    BadObject(String),
    #[error("unknown gesture `{0}` (expected G1..G15)")]
    UnknownGesture(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown skill code `{0}`")]
    UnknownSkill(String),
    #[error("interval end {end} precedes start {start}")]
    InvalidInterval { start: Frame, end: Frame },
    #[error("actor and target are the same object in `{0}`")]
    ActorIsTarget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verb {
    Touch,
    Untouch,
    Grasp,
    Release,
    Push,
    Pull,
}

impl Verb {
    pub const ALL: [Verb; 6] = [
        Verb::Touch,
        Verb::Untouch,
        Verb::Grasp,
        Verb::Release,
        Verb::Push,
        Verb::Pull,
    ];

    /// The verb that undoes this one on the same channel. Push and Pull have
    /// no channel inverse; they only pair through the needle-extraction rule.
    pub fn inverse(self) -> Option<Verb> {
        match self {
            Verb::Touch => Some(Verb::Untouch),
            Verb::Untouch => Some(Verb::Touch),
            Verb::Grasp => Some(Verb::Release),
            Verb::Release => Some(Verb::Grasp),
            Verb::Push | Verb::Pull => None,
        }
    }

    pub fn negates(self, other: Verb) -> bool {
        self.inverse() == Some(other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Touch => "Touch",
            Verb::Untouch => "Untouch",
            Verb::Grasp => "Grasp",
            Verb::Release => "Release",
            Verb::Push => "Push",
            Verb::Pull => "Pull",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ModelError::UnknownVerb(s.to_string()))
    }
}

/// Object affected by (or, for needle interactions, performing) an MP.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetObject {
    Needle,
    Thread,
    Fabric,
    Ring,
    Other(String),
}

impl TargetObject {
    pub fn as_str(&self) -> &str {
        match self {
            TargetObject::Needle => "Needle",
            TargetObject::Thread => "Thread",
            TargetObject::Fabric => "Fabric",
            TargetObject::Ring => "Ring",
            TargetObject::Other(name) => name,
        }
    }

    /// Reporting class: Fabric and Ring collapse to `F/R`.
    pub fn class(&self) -> ObjectClass {
        match self {
            TargetObject::Needle => ObjectClass::Needle,
            TargetObject::Thread => ObjectClass::Thread,
            TargetObject::Fabric | TargetObject::Ring => ObjectClass::FabricOrRing,
            TargetObject::Other(name) => ObjectClass::Other(name.clone()),
        }
    }

    pub fn is_fabric_or_ring(&self) -> bool {
        matches!(self, TargetObject::Fabric | TargetObject::Ring)
    }
}

fn valid_token(s: &str) -> bool {
    !s.is_empty()
        && s.trim() == s
        && !s
            .chars()
            .any(|c| matches!(c, '(' | ')' | ',' | '"') || c.is_control() || c.is_whitespace())
}

impl FromStr for TargetObject {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Needle" => TargetObject::Needle,
            "Thread" => TargetObject::Thread,
            "Fabric" => TargetObject::Fabric,
            "Ring" => TargetObject::Ring,
            // L and R name tools, never targets
            "L" | "R" => return Err(ModelError::BadObject(s.to_string())),
            other if valid_token(other) => TargetObject::Other(other.to_string()),
            other => return Err(ModelError::BadObject(other.to_string())),
        })
    }
}

impl TryFrom<String> for TargetObject {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TargetObject> for String {
    fn from(o: TargetObject) -> String {
        o.as_str().to_string()
    }
}

impl fmt::Display for TargetObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ObjectClass {
    Needle,
    Thread,
    FabricOrRing,
    Other(String),
}

impl ObjectClass {
    pub fn as_str(&self) -> &str {
        match self {
            ObjectClass::Needle => "Needle",
            ObjectClass::Thread => "Thread",
            ObjectClass::FabricOrRing => "F/R",
            ObjectClass::Other(name) => name,
        }
    }
}

impl TryFrom<String> for ObjectClass {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "F/R" {
            return Ok(ObjectClass::FabricOrRing);
        }
        Ok(s.parse::<TargetObject>()?.class())
    }
}

impl From<ObjectClass> for String {
    fn from(o: ObjectClass) -> String {
        o.as_str().to_string()
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The moving entity of an MP: the left tool, the right tool, or an object
/// (as in `Touch(Needle, Fabric)`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Actor {
    Left,
    Right,
    Object(TargetObject),
}

impl Actor {
    pub fn is_tool(&self) -> bool {
        matches!(self, Actor::Left | Actor::Right)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Actor::Left => "L",
            Actor::Right => "R",
            Actor::Object(o) => o.as_str(),
        }
    }
}

impl FromStr for Actor {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L" => Ok(Actor::Left),
            "R" => Ok(Actor::Right),
            other => Ok(Actor::Object(other.parse()?)),
        }
    }
}

impl TryFrom<String> for Actor {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Actor> for String {
    fn from(a: Actor) -> String {
        a.as_str().to_string()
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A (actor, object) pair. Adjacency for inverse detection is judged within
/// one channel. Fabric and Ring are distinct channels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelKey {
    pub actor: Actor,
    pub object: TargetObject,
}

impl fmt::Display for ChannelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.actor, self.object)
    }
}

/// A frameless `Verb(Actor, Object)` triple, used for canonical patterns,
/// graph states and signature matching.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MpSignature {
    pub verb: Verb,
    pub actor: Actor,
    pub object: TargetObject,
}

impl MpSignature {
    pub fn new(verb: Verb, actor: Actor, object: TargetObject) -> Result<Self, ModelError> {
        if let Actor::Object(a) = &actor {
            if *a == object {
                return Err(ModelError::ActorIsTarget(format!("{verb}({a}, {object})")));
            }
        }
        Ok(MpSignature { verb, actor, object })
    }

    pub fn channel(&self) -> ChannelKey {
        ChannelKey {
            actor: self.actor.clone(),
            object: self.object.clone(),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// `Push(Needle, Fabric|Ring)`, the first half of a needle extraction.
    pub fn is_needle_push(&self) -> bool {
        self.verb == Verb::Push && self.actor == Actor::Object(TargetObject::Needle) && self.object.is_fabric_or_ring()
    }

    /// `Pull(tool, Needle)`, the second half of a needle extraction.
    pub fn is_needle_pull(&self) -> bool {
        self.verb == Verb::Pull && self.actor.is_tool() && self.object == TargetObject::Needle
    }
}

impl fmt::Display for MpSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.verb, self.actor, self.object)
    }
}

impl FromStr for MpSignature {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadLabel(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let verb: Verb = s[..open].trim().parse()?;
        let (actor, object) = inner.split_once(',').ok_or_else(bad)?;
        let actor: Actor = actor.trim().parse().map_err(|_| bad())?;
        let object: TargetObject = object.trim().parse().map_err(|_| bad())?;
        MpSignature::new(verb, actor, object)
    }
}

impl TryFrom<String> for MpSignature {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MpSignature> for String {
    fn from(s: MpSignature) -> String {
        s.to_string()
    }
}

/// One labeled MP occurrence with an inclusive frame interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub verb: Verb,
    pub actor: Actor,
    pub object: TargetObject,
    pub start_frame: Frame,
    pub end_frame: Frame,
}

impl MotionPrimitive {
    pub fn new(signature: MpSignature, start_frame: Frame, end_frame: Frame) -> Result<Self, ModelError> {
        if end_frame < start_frame {
            return Err(ModelError::InvalidInterval {
                start: start_frame,
                end: end_frame,
            });
        }
        Ok(MotionPrimitive {
            verb: signature.verb,
            actor: signature.actor,
            object: signature.object,
            start_frame,
            end_frame,
        })
    }

    pub fn signature(&self) -> MpSignature {
        MpSignature {
            verb: self.verb,
            actor: self.actor.clone(),
            object: self.object.clone(),
        }
    }

    pub fn matches(&self, sig: &MpSignature) -> bool {
        self.verb == sig.verb && self.actor == sig.actor && self.object == sig.object
    }

    pub fn channel(&self) -> ChannelKey {
        ChannelKey {
            actor: self.actor.clone(),
            object: self.object.clone(),
        }
    }

    pub fn duration_frames(&self) -> u32 {
        self.end_frame - self.start_frame + 1
    }

    pub fn intersects(&self, start: Frame, end: Frame) -> bool {
        self.start_frame <= end && start <= self.end_frame
    }

    pub fn label(&self) -> String {
        mp_label(self)
    }
}

/// Renders `Verb(Actor, Object)`, e.g. `Grasp(L, Needle)`.
pub fn mp_label(mp: &MotionPrimitive) -> String {
    format!("{}({}, {})", mp.verb, mp.actor, mp.object)
}

/// Sort key used for transcript ordering: start, end, then channel label.
pub(crate) fn transcript_order(a: &MotionPrimitive, b: &MotionPrimitive) -> Ordering {
    a.start_frame
        .cmp(&b.start_frame)
        .then(a.end_frame.cmp(&b.end_frame))
        .then_with(|| a.channel().to_string().cmp(&b.channel().to_string()))
        .then(a.verb.cmp(&b.verb))
}

/// JIGSAWS gesture vocabulary, `G1` through `G15`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GestureId(u8);

impl GestureId {
    pub fn new(n: u8) -> Option<GestureId> {
        (1..=15).contains(&n).then_some(GestureId(n))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = GestureId> {
        (1..=15).map(GestureId)
    }
}

impl fmt::Display for GestureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.0)
    }
}

impl FromStr for GestureId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('G')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) && !d.starts_with('0'))
            .and_then(|d| d.parse::<u8>().ok())
            .and_then(GestureId::new)
            .ok_or_else(|| ModelError::UnknownGesture(s.to_string()))
    }
}

impl TryFrom<String> for GestureId {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<GestureId> for String {
    fn from(g: GestureId) -> String {
        g.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GestureInstance {
    pub gesture: GestureId,
    pub start_frame: Frame,
    pub end_frame: Frame,
    /// Zero-based position within the trial's gesture transcript.
    pub ordinal: usize,
}

impl GestureInstance {
    pub fn contains(&self, frame: Frame) -> bool {
        self.start_frame <= frame && frame <= self.end_frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Suturing,
    NeedlePassing,
    KnotTying,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Suturing, Task::NeedlePassing, Task::KnotTying];

    pub fn code(self) -> &'static str {
        match self {
            Task::Suturing => "S",
            Task::NeedlePassing => "NP",
            Task::KnotTying => "KT",
        }
    }

    /// Directory name used in dataset layouts and trial ids.
    pub fn dir_name(self) -> &'static str {
        match self {
            Task::Suturing => "Suturing",
            Task::NeedlePassing => "Needle_Passing",
            Task::KnotTying => "Knot_Tying",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Task::Suturing => "Suturing",
            Task::NeedlePassing => "Needle Passing",
            Task::KnotTying => "Knot Tying",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Task {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | ' ' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "s" | "suturing" => Ok(Task::Suturing),
            "np" | "needlepassing" => Ok(Task::NeedlePassing),
            "kt" | "knottying" => Ok(Task::KnotTying),
            _ => Err(ModelError::UnknownTask(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Skill {
    Novice,
    Intermediate,
    Expert,
}

impl Skill {
    pub const ALL: [Skill; 3] = [Skill::Novice, Skill::Intermediate, Skill::Expert];

    pub fn code(self) -> &'static str {
        match self {
            Skill::Novice => "N",
            Skill::Intermediate => "I",
            Skill::Expert => "E",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Skill::Novice => "Novice",
            Skill::Intermediate => "Intermediate",
            Skill::Expert => "Expert",
        })
    }
}

impl FromStr for Skill {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" | "novice" => Ok(Skill::Novice),
            "i" | "intermediate" => Ok(Skill::Intermediate),
            "e" | "expert" => Ok(Skill::Expert),
            _ => Err(ModelError::UnknownSkill(s.to_string())),
        }
    }
}

/// The six modified-OSATS subscores that make up the GRS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GrsSubscore {
    RespectForTissue,
    SutureNeedleHandling,
    TimeAndMotion,
    FlowOfOperation,
    OverallPerformance,
    QualityOfFinalProduct,
}

impl GrsSubscore {
    pub const ALL: [GrsSubscore; 6] = [
        GrsSubscore::RespectForTissue,
        GrsSubscore::SutureNeedleHandling,
        GrsSubscore::TimeAndMotion,
        GrsSubscore::FlowOfOperation,
        GrsSubscore::OverallPerformance,
        GrsSubscore::QualityOfFinalProduct,
    ];

    /// Column name in the metadata CSV.
    pub fn column(self) -> &'static str {
        match self {
            GrsSubscore::RespectForTissue => "respect_for_tissue",
            GrsSubscore::SutureNeedleHandling => "suture_needle_handling",
            GrsSubscore::TimeAndMotion => "time_and_motion",
            GrsSubscore::FlowOfOperation => "flow_of_operation",
            GrsSubscore::OverallPerformance => "overall_performance",
            GrsSubscore::QualityOfFinalProduct => "quality_of_final_product",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            GrsSubscore::RespectForTissue => "Respect for tissue",
            GrsSubscore::SutureNeedleHandling => "Suture/needle handling",
            GrsSubscore::TimeAndMotion => "Time and motion",
            GrsSubscore::FlowOfOperation => "Flow of operation",
            GrsSubscore::OverallPerformance => "Overall performance",
            GrsSubscore::QualityOfFinalProduct => "Quality of final product",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subscores {
    pub respect_for_tissue: f64,
    pub suture_needle_handling: f64,
    pub time_and_motion: f64,
    pub flow_of_operation: f64,
    pub overall_performance: f64,
    pub quality_of_final_product: f64,
}

impl Subscores {
    pub fn from_fn(mut f: impl FnMut(GrsSubscore) -> f64) -> Self {
        Subscores {
            respect_for_tissue: f(GrsSubscore::RespectForTissue),
            suture_needle_handling: f(GrsSubscore::SutureNeedleHandling),
            time_and_motion: f(GrsSubscore::TimeAndMotion),
            flow_of_operation: f(GrsSubscore::FlowOfOperation),
            overall_performance: f(GrsSubscore::OverallPerformance),
            quality_of_final_product: f(GrsSubscore::QualityOfFinalProduct),
        }
    }

    pub fn get(&self, which: GrsSubscore) -> f64 {
        match which {
            GrsSubscore::RespectForTissue => self.respect_for_tissue,
            GrsSubscore::SutureNeedleHandling => self.suture_needle_handling,
            GrsSubscore::TimeAndMotion => self.time_and_motion,
            GrsSubscore::FlowOfOperation => self.flow_of_operation,
            GrsSubscore::OverallPerformance => self.overall_performance,
            GrsSubscore::QualityOfFinalProduct => self.quality_of_final_product,
        }
    }
}

pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task: Task,
    pub subject: String,
    pub trial_index: u32,
    pub skill: Skill,
    pub grs_total: f64,
    pub subscores: Subscores,
    pub fps: f64,
}

impl TrialRecord {
    /// `<TaskDir>_<Subject><NNN>`, e.g. `Suturing_C002`.
    pub fn trial_id(&self) -> String {
        trial_id(self.task, &self.subject, self.trial_index)
    }

    pub fn trial_ref(&self) -> TrialRef {
        TrialRef {
            trial_id: self.trial_id(),
            task: self.task,
            skill: self.skill,
        }
    }
}

pub fn trial_id(task: Task, subject: &str, trial_index: u32) -> String {
    format!("{}_{}{:03}", task.dir_name(), subject, trial_index)
}

/// Lightweight back-reference from derived records to their trial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialRef {
    pub trial_id: String,
    pub task: Task,
    pub skill: Skill,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalEntry {
    pub task: Task,
    pub gesture: GestureId,
    pub pattern: Vec<MpSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalTable {
    entries: Vec<CanonicalEntry>,
}

impl CanonicalTable {
    /// Builds a table, rejecting empty patterns and duplicate (task, gesture) keys.
    pub fn new(entries: Vec<CanonicalEntry>) -> Result<Self, String> {
        for (i, e) in entries.iter().enumerate() {
            if e.pattern.is_empty() {
                return Err(format!("empty pattern for {} {}", e.task, e.gesture));
            }
            if entries[..i].iter().any(|o| o.task == e.task && o.gesture == e.gesture) {
                return Err(format!("duplicate entry for {} {}", e.task, e.gesture));
            }
        }
        Ok(CanonicalTable { entries })
    }

    pub fn entries(&self) -> &[CanonicalEntry] {
        &self.entries
    }

    pub fn lookup(&self, task: Task, gesture: GestureId) -> Option<&CanonicalEntry> {
        self.entries.iter().find(|e| e.task == task && e.gesture == gesture)
    }

    pub fn for_task(&self, task: Task) -> impl Iterator<Item = &CanonicalEntry> {
        self.entries.iter().filter(move |e| e.task == task)
    }

    /// Gestures with a canonical pattern for `task`, ascending.
    pub fn gestures(&self, task: Task) -> Vec<GestureId> {
        let mut g: Vec<_> = self.for_task(task).map(|e| e.gesture).collect();
        g.sort();
        g
    }

    /// Gestures analysed in any task, ascending.
    pub fn all_gestures(&self) -> Vec<GestureId> {
        let mut g: Vec<_> = self.entries.iter().map(|e| e.gesture).collect();
        g.sort();
        g.dedup();
        g
    }
}

impl Default for CanonicalTable {
    fn default() -> Self {
        builtin_canonical_table()
    }
}

/// The surgeon-defined MP sequences for the dry-lab tasks (14 entries).
pub fn builtin_canonical_table() -> CanonicalTable {
    use Task::*;
    const ROWS: [(Task, u8, &str); 14] = [
        (Suturing, 2, "Touch(Needle, Fabric)"),
        (
            NeedlePassing,
            2,
            "Release(L, Needle); Touch(Needle, Ring); Push(Needle, Ring)",
        ),
        (Suturing, 3, "Touch(Needle, Fabric); Push(R, Needle); Grasp(L, Needle)"),
        (NeedlePassing, 3, "Grasp(L, Needle)"),
        (Suturing, 4, "Grasp(R, Needle); Release(L, Needle)"),
        (NeedlePassing, 4, "Grasp(R, Needle)"),
        (Suturing, 6, "Grasp(L, Needle); Release(R, Needle); Pull(L, Needle)"),
        (NeedlePassing, 6, "Release(R, Needle); Pull(L, Needle)"),
        (
            Suturing,
            8,
            "Grasp(L, Needle); Release(R, Needle); Grasp(R, Needle); Release(L, Needle)",
        ),
        (NeedlePassing, 8, "Release(R, Needle); Grasp(R, Needle)"),
        (KnotTying, 12, "Grasp(L, Thread); Release(R, Thread)"),
        (KnotTying, 13, "Pull(L, Thread); Touch(R, Thread)"),
        (KnotTying, 14, "Grasp(R, Thread)"),
        (KnotTying, 15, "Pull(L, Thread); Pull(R, Thread)"),
    ];
    let entries = ROWS
        .iter()
        .map(|&(task, g, pattern)| CanonicalEntry {
            task,
            gesture: GestureId(g),
            pattern: pattern
                .split(';')
                .map(|p| p.parse().expect("builtin canonical label"))
                .collect(),
        })
        .collect();
    CanonicalTable::new(entries).expect("builtin canonical table is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InverseKind {
    TouchUntouch,
    GraspRelease,
    /// `Push(Needle, F/R)` followed by `Pull(tool, Needle)`.
    PushPull,
}

/// Report row key of an inverse MP. For channel pairs `actor`/`object` are
/// the channel (object collapsed to its class); for push-pull pairs `actor`
/// is the pulling tool and `object` the class of the pushed-into target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InverseTypeKey {
    pub kind: InverseKind,
    pub actor: Actor,
    pub object: ObjectClass,
}

impl InverseTypeKey {
    pub fn label(&self) -> String {
        let (a, o) = (self.actor.as_str(), self.object.as_str());
        match self.kind {
            InverseKind::TouchUntouch => format!("Touch({a}, {o}) Untouch({a}, {o})"),
            InverseKind::GraspRelease => format!("Grasp({a}, {o}) Release({a}, {o})"),
            InverseKind::PushPull => format!("Push(Needle, {o}) Pull({a}, Needle)"),
        }
    }

    /// The 14 row keys in report order.
    pub fn standard_order() -> Vec<InverseTypeKey> {
        use InverseKind::*;
        let key = |kind, actor: Actor, object| InverseTypeKey { kind, actor, object };
        let needle = || Actor::Object(TargetObject::Needle);
        let mut keys = Vec::with_capacity(14);
        for object in [ObjectClass::Needle, ObjectClass::Thread, ObjectClass::FabricOrRing] {
            for kind in [TouchUntouch, GraspRelease] {
                for actor in [Actor::Left, Actor::Right] {
                    keys.push(key(kind, actor, object.clone()));
                }
            }
        }
        keys.push(key(TouchUntouch, needle(), ObjectClass::FabricOrRing));
        keys.push(key(PushPull, Actor::Right, ObjectClass::FabricOrRing));
        keys
    }

    fn standard_position(&self) -> usize {
        Self::standard_order()
            .iter()
            .position(|k| k == self)
            .unwrap_or(usize::MAX)
    }
}

impl Ord for InverseTypeKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.standard_position()
            .cmp(&other.standard_position())
            .then_with(|| self.label().cmp(&other.label()))
    }
}

impl PartialOrd for InverseTypeKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for InverseTypeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A detected inverse MP. `members` holds the negating pair in transcript
/// order; under maximal-run counting it holds the whole run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InverseInstance {
    pub type_key: InverseTypeKey,
    pub members: Vec<MotionPrimitive>,
    pub trial: Option<TrialRef>,
    pub gesture: Option<GestureInstance>,
    pub duration_frames: u32,
}

impl InverseInstance {
    pub fn start_frame(&self) -> Frame {
        self.members.first().map_or(0, |m| m.start_frame)
    }

    pub fn end_frame(&self) -> Frame {
        self.members.last().map_or(0, |m| m.end_frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(s: &str) -> MpSignature {
        s.parse().unwrap()
    }

    #[test]
    fn verb_inverse_is_involution_on_negating_verbs() {
        for v in [Verb::Touch, Verb::Untouch, Verb::Grasp, Verb::Release] {
            assert_eq!(v.inverse().and_then(Verb::inverse), Some(v));
        }
        assert_eq!(Verb::Push.inverse(), None);
        assert_eq!(Verb::Pull.inverse(), None);
        assert!(!Verb::Push.negates(Verb::Pull));
    }

    #[test]
    fn labels() {
        let mp = MotionPrimitive::new(sig("Grasp(L, Needle)"), 0, 1).unwrap();
        assert_eq!(mp_label(&mp), "Grasp(L, Needle)");
        assert_eq!(sig("Touch(Needle, Fabric)").label(), "Touch(Needle, Fabric)");
        assert_eq!(sig("Push(Needle,Ring)").label(), "Push(Needle, Ring)");
        assert_eq!(sig("Touch(Needle, Ring)").actor, Actor::Object(TargetObject::Needle));
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            "Hover(L, Needle)".parse::<MpSignature>(),
            Err(ModelError::UnknownVerb(_))
        ));
        assert!("Grasp(L Needle)".parse::<MpSignature>().is_err());
        assert!("Grasp(L, Needle".parse::<MpSignature>().is_err());
        assert!(matches!(
            "Touch(Needle, Needle)".parse::<MpSignature>(),
            Err(ModelError::ActorIsTarget(_))
        ));
        assert_eq!(sig("Grasp(R, Knot)").object, TargetObject::Other("Knot".to_string()));
    }

    #[test]
    fn object_classes() {
        assert_eq!(TargetObject::Fabric.class(), ObjectClass::FabricOrRing);
        assert_eq!(TargetObject::Ring.class(), ObjectClass::FabricOrRing);
        assert_eq!(TargetObject::Thread.class(), ObjectClass::Thread);
        assert_ne!(sig("Touch(L, Fabric)").channel(), sig("Touch(L, Ring)").channel());
    }

    #[test]
    fn gesture_ids() {
        assert_eq!("G6".parse::<GestureId>().unwrap().number(), 6);
        for bad in ["G0", "G16", "g3", "G", "6", "G06"] {
            assert!(bad.parse::<GestureId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builtin_table_rows() {
        let t = builtin_canonical_table();
        assert_eq!(t.entries().len(), 14);
        let labels = |task, g: u8| -> Option<Vec<String>> {
            t.lookup(task, GestureId::new(g).unwrap())
                .map(|e| e.pattern.iter().map(|p| p.label()).collect())
        };
        assert_eq!(
            labels(Task::Suturing, 8).unwrap(),
            [
                "Grasp(L, Needle)",
                "Release(R, Needle)",
                "Grasp(R, Needle)",
                "Release(L, Needle)"
            ]
        );
        assert_eq!(
            labels(Task::NeedlePassing, 2).unwrap(),
            ["Release(L, Needle)", "Touch(Needle, Ring)", "Push(Needle, Ring)"]
        );
        assert_eq!(
            labels(Task::KnotTying, 15).unwrap(),
            ["Pull(L, Thread)", "Pull(R, Thread)"]
        );
        assert_eq!(labels(Task::Suturing, 1), None);
        assert_eq!(labels(Task::KnotTying, 2), None);
        for task in [Task::Suturing, Task::NeedlePassing] {
            assert_eq!(
                t.gestures(task).iter().map(|g| g.number()).collect::<Vec<_>>(),
                [2, 3, 4, 6, 8]
            );
        }
        assert_eq!(
            t.gestures(Task::KnotTying)
                .iter()
                .map(|g| g.number())
                .collect::<Vec<_>>(),
            [12, 13, 14, 15]
        );
    }

    #[test]
    fn standard_type_order() {
        let labels: Vec<String> = InverseTypeKey::standard_order().iter().map(|k| k.label()).collect();
        assert_eq!(labels.len(), 14);
        assert_eq!(labels[0], "Touch(L, Needle) Untouch(L, Needle)");
        assert_eq!(labels[1], "Touch(R, Needle) Untouch(R, Needle)");
        assert_eq!(labels[2], "Grasp(L, Needle) Release(L, Needle)");
        assert_eq!(labels[7], "Grasp(R, Thread) Release(R, Thread)");
        assert_eq!(labels[8], "Touch(L, F/R) Untouch(L, F/R)");
        assert_eq!(labels[12], "Touch(Needle, F/R) Untouch(Needle, F/R)");
        assert_eq!(labels[13], "Push(Needle, F/R) Pull(R, Needle)");
    }

    #[test]
    fn serde_uses_labels() {
        let mp = MotionPrimitive::new(sig("Grasp(L, Needle)"), 3, 9).unwrap();
        let json = serde_json::to_string(&mp).unwrap();
        assert!(json.contains("\"actor\":\"L\""), "{json}");
        let back: MotionPrimitive = serde_json::from_str(&json).unwrap();
        assert_eq!(back, mp);
    }

    #[test]
    fn task_and_skill_parsing() {
        assert_eq!("NP".parse::<Task>().unwrap(), Task::NeedlePassing);
        assert_eq!("Knot_Tying".parse::<Task>().unwrap(), Task::KnotTying);
        assert_eq!("E".parse::<Skill>().unwrap(), Skill::Expert);
        assert_eq!("novice".parse::<Skill>().unwrap(), Skill::Novice);
        assert!("X".parse::<Skill>().is_err());
    }
}
