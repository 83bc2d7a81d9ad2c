//! Static pattern detection for states that own do-activities.
//!
//! Each such state is classified along a small set of axes (location,
//! outgoing trigger kinds, self-signaling, accepting, deferring, conflicts,
//! internal transitions). The classification selects one or more patterns,
//! and each pattern carries a fixed row of issues with a severity per cell.
//! Guards are ignored: a guarded transition counts as possibly enabled.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{CompiledModel, EngineError, VId, VKind};
use crate::model::{Block, Destination, MachineModel, NodeKind, SourceSpan, TransitionKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    P10,
    P11,
}

impl PatternId {
    pub const ALL: [PatternId; 11] = [
        PatternId::P1,
        PatternId::P2,
        PatternId::P3,
        PatternId::P4,
        PatternId::P5,
        PatternId::P6,
        PatternId::P7,
        PatternId::P8,
        PatternId::P9,
        PatternId::P10,
        PatternId::P11,
    ];

    pub fn title(self) -> &'static str {
        match self {
            PatternId::P1 => "do-activity in a simple state",
            PatternId::P2 => "simple state left by a completion transition",
            PatternId::P3 => "do-activity signaling its own state",
            PatternId::P4 => "simple state with internal transitions",
            PatternId::P5 => "do-activity accepting events",
            PatternId::P6 => "do-activity accepting events the state defers",
            PatternId::P7 => "do-activity in a composite state",
            PatternId::P8 => "do-activity in a substate",
            PatternId::P9 => "do-activities accepting events at several levels",
            PatternId::P10 => "composite state deferring what its do-activity accepts",
            PatternId::P11 => "do-activity among orthogonal regions",
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueId {
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
    I8,
    I9,
    I10,
    I11,
    I12,
    I13,
    I14,
    I15,
    I16,
    I17,
    I18,
}

impl IssueId {
    pub const ALL: [IssueId; 18] = [
        IssueId::I1,
        IssueId::I2,
        IssueId::I3,
        IssueId::I4,
        IssueId::I5,
        IssueId::I6,
        IssueId::I7,
        IssueId::I8,
        IssueId::I9,
        IssueId::I10,
        IssueId::I11,
        IssueId::I12,
        IssueId::I13,
        IssueId::I14,
        IssueId::I15,
        IssueId::I16,
        IssueId::I17,
        IssueId::I18,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IssueId::I1 => "lateStart",
            IssueId::I2 => "concurrentInternalTransition",
            IssueId::I3 => "substateExpectsDoPartsFinished",
            IssueId::I4 => "concurrentSubstate",
            IssueId::I5 => "loseEventWhileInDo",
            IssueId::I6 => "selfSignalReorder",
            IssueId::I7 => "lateAccepterReg",
            IssueId::I8 => "smCompeteForEvents",
            IssueId::I9 => "deferredEventsPriority",
            IssueId::I10 => "multipleEventsDeferred",
            IssueId::I11 => "deferOverridingTransition",
            IssueId::I12 => "deferIsConfigSensitive",
            IssueId::I13 => "stealDeferredEvents",
            IssueId::I14 => "abortEvenBeforeRun",
            IssueId::I15 => "abortDuringAction",
            IssueId::I16 => "doActivityForever",
            IssueId::I17 => "abortWithoutWaitPoint",
            IssueId::I18 => "completionNeedsRegionInFinalState",
        }
    }
}

impl fmt::Display for IssueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Ordered so that a higher value is more severe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Slight,
    Applicable,
    Important,
}

impl Severity {
    pub fn parse(s: &str) -> Option<Severity> {
        match s {
            "important" => Some(Severity::Important),
            "applicable" => Some(Severity::Applicable),
            "slight" => Some(Severity::Slight),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Severity::Important => '●',
            Severity::Applicable => '◐',
            Severity::Slight => '○',
        }
    }
}

impl Default for Severity {
    fn default() -> Self {
        Severity::Applicable
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Important => "important",
            Severity::Applicable => "applicable",
            Severity::Slight => "slight",
        })
    }
}

/// The issue row of `p`, in issue order. Unlisted issues do not apply.
pub fn table(p: PatternId) -> &'static [(IssueId, Severity)] {
    use IssueId::*;
    use Severity::*;
    match p {
        PatternId::P1 => &[(I1, Important), (I14, Important), (I15, Important)],
        PatternId::P2 => &[(I5, Important), (I9, Slight), (I10, Slight), (I14, Slight), (I15, Slight), (I16, Important)],
        PatternId::P3 => &[(I6, Important), (I9, Slight), (I10, Slight), (I14, Slight), (I15, Slight)],
        PatternId::P4 => &[(I1, Applicable), (I2, Important), (I3, Applicable), (I14, Slight), (I15, Slight)],
        PatternId::P5 => {
            &[(I1, Applicable), (I7, Important), (I8, Important), (I14, Applicable), (I15, Applicable), (I17, Important)]
        }
        PatternId::P6 => &[
            (I1, Applicable),
            (I7, Applicable),
            (I8, Applicable),
            (I9, Important),
            (I10, Important),
            (I11, Important),
            (I12, Slight),
            (I14, Applicable),
            (I15, Applicable),
            (I17, Slight),
        ],
        PatternId::P7 => &[
            (I1, Applicable),
            (I2, Applicable),
            (I3, Important),
            (I4, Important),
            (I7, Slight),
            (I8, Slight),
            (I14, Slight),
            (I15, Slight),
            (I17, Slight),
            (I18, Important),
        ],
        PatternId::P8 => {
            &[(I1, Applicable), (I7, Slight), (I8, Applicable), (I14, Applicable), (I15, Applicable), (I17, Slight), (I18, Slight)]
        }
        PatternId::P9 => &[
            (I1, Slight),
            (I3, Applicable),
            (I4, Applicable),
            (I7, Applicable),
            (I8, Applicable),
            (I14, Slight),
            (I15, Slight),
            (I17, Slight),
            (I18, Applicable),
        ],
        PatternId::P10 => &[
            (I1, Slight),
            (I3, Applicable),
            (I4, Applicable),
            (I7, Applicable),
            (I8, Slight),
            (I9, Applicable),
            (I10, Slight),
            (I11, Applicable),
            (I12, Important),
            (I13, Important),
            (I14, Slight),
            (I15, Slight),
            (I17, Slight),
            (I18, Slight),
        ],
        PatternId::P11 => &[
            (I1, Slight),
            (I3, Applicable),
            (I4, Applicable),
            (I7, Applicable),
            (I8, Slight),
            (I14, Slight),
            (I15, Slight),
            (I17, Slight),
            (I18, Applicable),
        ],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Simple,
    /// Composite state without do-activities below it.
    CompositeParent,
    /// Substate of a composite state whose ancestors have no do-activity.
    CompositeChild,
    /// Do-activities both here and at another level of the same hierarchy.
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Triggers {
    None,
    External,
    Completion,
    Both,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axes {
    pub location: Location,
    /// The state or one of its ancestors has two or more regions.
    pub orthogonal: bool,
    pub triggers: Triggers,
    pub self_signaling: bool,
    pub accepts: bool,
    pub defers: bool,
    /// An accepted signal also triggers a transition from this state, an
    /// ancestor or a descendant.
    pub conflicting: bool,
    pub internal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub pattern: PatternId,
    /// The pattern's row filtered to the threshold; may be empty.
    pub issues: Vec<(IssueId, Severity)>,
    pub state: String,
    pub anchor: SourceSpan,
    pub note: String,
}

struct ActivityFacts {
    accepts: BTreeSet<String>,
    self_sends: BTreeSet<String>,
}

fn activity_facts(body: &Block, out: &mut ActivityFacts) {
    for n in body {
        match &n.kind {
            NodeKind::Accept { signals } => out.accepts.extend(signals.iter().cloned()),
            NodeKind::Send { signal, dest: Destination::SelfTarget } => {
                out.self_sends.insert(signal.clone());
            }
            NodeKind::Par { branches } => branches.iter().for_each(|b| activity_facts(b, out)),
            _ => {}
        }
    }
}

struct Linter<'a> {
    m: &'a CompiledModel,
}

impl Linter<'_> {
    fn facts(&self, v: VId) -> Option<ActivityFacts> {
        let name = self.m.vertices[v].do_activity.as_ref()?;
        let mut f = ActivityFacts { accepts: BTreeSet::new(), self_sends: BTreeSet::new() };
        if let Some(a) = self.m.activity(name) {
            activity_facts(&a.body, &mut f);
        }
        Some(f)
    }

    fn ancestors(&self, v: VId) -> Vec<VId> {
        let mut out = vec![];
        let mut cur = self.m.vertices[v].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.m.vertices[p].parent;
        }
        out
    }

    fn descendants(&self, v: VId) -> Vec<VId> {
        (0..self.m.vertices.len()).filter(|&d| self.m.is_proper_descendant(d, v)).collect()
    }

    fn outgoing(&self, v: VId) -> impl Iterator<Item = &crate::engine::TransitionInfo> + '_ {
        self.m.transitions.iter().filter(move |t| t.source == v)
    }

    fn triggers_of(&self, v: VId) -> BTreeSet<String> {
        self.outgoing(v).filter_map(|t| t.trigger.clone()).collect()
    }

    fn axes(&self, v: VId) -> Axes {
        let info = &self.m.vertices[v];
        let own = self.facts(v).expect("state owns a do-activity");
        let ancestors = self.ancestors(v);
        let descendants = self.descendants(v);
        let anc_do = ancestors.iter().any(|&a| self.m.vertices[a].do_activity.is_some());
        let sub_do = descendants.iter().any(|&d| self.m.vertices[d].do_activity.is_some());
        let location = match (info.regions.is_empty(), anc_do || sub_do, ancestors.is_empty()) {
            (_, true, _) => Location::Both,
            (false, false, _) => Location::CompositeParent,
            (true, false, false) => Location::CompositeChild,
            (true, false, true) => Location::Simple,
        };
        let orthogonal = std::iter::once(v).chain(ancestors.iter().copied()).any(|s| self.m.vertices[s].regions.len() >= 2);
        let mut external = false;
        let mut completion = false;
        let mut internal = false;
        for t in self.outgoing(v) {
            match t.kind {
                TransitionKind::External => external = true,
                TransitionKind::Completion => completion = true,
                TransitionKind::Internal => internal = true,
            }
        }
        let triggers = match (external, completion) {
            (false, false) => Triggers::None,
            (true, false) => Triggers::External,
            (false, true) => Triggers::Completion,
            (true, true) => Triggers::Both,
        };
        let own_triggers = self.triggers_of(v);
        let related: BTreeSet<String> =
            std::iter::once(v).chain(ancestors).chain(descendants).flat_map(|s| self.triggers_of(s)).collect();
        Axes {
            location,
            orthogonal,
            triggers,
            self_signaling: own.self_sends.iter().any(|s| own_triggers.contains(s)),
            accepts: !own.accepts.is_empty(),
            defers: !info.defer.is_empty(),
            conflicting: own.accepts.iter().any(|s| related.contains(s)),
            internal,
        }
    }

    fn patterns(&self, v: VId, ax: &Axes) -> Vec<PatternId> {
        let info = &self.m.vertices[v];
        let own = self.facts(v).expect("state owns a do-activity");
        let mut out = vec![];
        if info.regions.is_empty() {
            let anc_do = self.ancestors(v).iter().any(|&a| self.m.vertices[a].do_activity.is_some());
            let nested = info.parent.is_some();
            if nested && !anc_do {
                out.push(PatternId::P8);
            }
            if ax.accepts {
                out.push(if ax.defers { PatternId::P6 } else { PatternId::P5 });
            } else {
                if ax.triggers == Triggers::External && !nested && !ax.self_signaling && !ax.internal {
                    out.push(PatternId::P1);
                }
                if matches!(ax.triggers, Triggers::Completion | Triggers::Both) {
                    out.push(PatternId::P2);
                }
                if ax.self_signaling {
                    out.push(PatternId::P3);
                }
                if ax.internal {
                    out.push(PatternId::P4);
                }
            }
        } else if info.defer.iter().any(|s| own.accepts.contains(s)) {
            out.push(PatternId::P10);
        } else if ax.accepts && self.descendants(v).iter().any(|&d| self.facts(d).is_some_and(|f| !f.accepts.is_empty())) {
            out.push(PatternId::P9);
        } else {
            out.push(PatternId::P7);
        }
        if ax.orthogonal {
            out.push(PatternId::P11);
        }
        out
    }
}

/// Axis record of the state at `path`, which must own a do-activity.
pub fn classify_axes(model: &MachineModel, path: &str) -> Result<Option<Axes>, EngineError> {
    let m = CompiledModel::new(model)?;
    let lint = Linter { m: &m };
    Ok(m.vertex_by_path(path).filter(|&v| m.vertices[v].do_activity.is_some()).map(|v| lint.axes(v)))
}

/// One finding per matched pattern per do-activity state, in state order.
pub fn detect(model: &MachineModel, threshold: Severity) -> Result<Vec<Finding>, EngineError> {
    let m = CompiledModel::new(model)?;
    let lint = Linter { m: &m };
    let mut out = vec![];
    for (v, info) in m.vertices.iter().enumerate() {
        if info.kind != VKind::State || info.do_activity.is_none() {
            continue;
        }
        let ax = lint.axes(v);
        for p in lint.patterns(v, &ax) {
            let issues = table(p).iter().copied().filter(|(_, s)| *s >= threshold).collect();
            out.push(Finding { pattern: p, issues, state: info.path.clone(), anchor: info.span.clone(), note: explain(p, &ax) });
        }
    }
    Ok(out)
}

/// Countermeasure advice for `p`, refined by the state's axes.
pub fn explain(p: PatternId, ax: &Axes) -> String {
    let base = match p {
        PatternId::P1 => {
            "The do-activity may start late or be aborted before or during any action. If it must finish first, \
             leave the state by a completion transition or have the do-activity signal the state machine."
        }
        PatternId::P2 => {
            "Signals arriving while the do-activity runs are dispatched and dropped. Add explicit outgoing \
             transitions to abort it and defer the signals that must survive."
        }
        PatternId::P3 => {
            "Self-sent signals travel through the pool and can be delayed, reordered or lost. Prefer a \
             completion transition when the signal only reports that the do-activity ended."
        }
        PatternId::P4 => {
            "Internal transition effects run concurrently with the do-activity. Keep shared variables and \
             observable actions out of one of them."
        }
        PatternId::P5 => {
            "The do-activity and the state machine compete for occurrences, and a signal arriving before the \
             accepter is registered is lost. Avoid triggers the do-activity also accepts, or defer them."
        }
        PatternId::P6 => {
            "Deferred occurrences are offered to a newly registered accepter before new ones, possibly several \
             at once, and a deferring state can still lose to an enabled transition."
        }
        PatternId::P7 => {
            "Nothing in the do-activity is guaranteed to run before a substate reacts. Put initialization needed \
             by substates into separate states."
        }
        PatternId::P8 => {
            "Transitions of enclosing states abort the do-activity as well, at any point. Defer signals the \
             do-activity should receive instead of the enclosing transition."
        }
        PatternId::P9 => {
            "Several do-activities and the state machine can wait for the same signal with no priority between \
             them; the winner depends on registration and dispatch order."
        }
        PatternId::P10 => {
            "Whether the composite state can defer depends on the active substate, and the do-activity can take a \
             deferred occurrence while the state machine is still inside a step."
        }
        PatternId::P11 => {
            "Orthogonal regions and do-activities interleave freely. Review shared variables, observable actions \
             and accepter timing across all of them."
        }
    };
    let mut s = base.to_string();
    if p == PatternId::P6 && ax.conflicting {
        s.push_str(" Some accepted signal also triggers a transition here, so defer cannot prioritize the do-activity.");
    }
    if ax.conflicting && p != PatternId::P6 {
        s.push_str(" An accepted signal also triggers a related transition (guards not evaluated).");
    }
    s
}

/// `file:line:col: P5 [state] I7● I8●` per finding, then its note.
pub fn render(findings: &[Finding]) -> String {
    let mut s = String::new();
    for f in findings {
        let issues: Vec<String> =
            f.issues.iter().map(|(i, sev)| format!("{i}{}({})", sev.symbol(), i.name())).collect();
        s.push_str(&format!("{}: {} [{}] {}: {}\n", f.anchor, f.pattern, f.state, f.pattern.title(), issues.join(" ")));
        s.push_str(&format!("  {}\n", f.note));
    }
    s
}
