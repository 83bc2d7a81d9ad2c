//! Runtime values. Everything here is plain data so that a state can be
//! cloned for branching and serialized for hashing.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::compile::{RId, TId, VId};
use super::exec::{Exec, NodePath};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OccKind {
    Signal(String),
    /// Completion of the state with this id.
    Completion(VId),
    Invocation,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Occurrence {
    pub seq: u64,
    pub kind: OccKind,
    /// Set once released from the deferred pool; such entries dispatch first.
    pub released: bool,
}

impl Occurrence {
    pub fn signal(&self) -> Option<&str> {
        match &self.kind {
            OccKind::Signal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Entering,
    EntryDone,
    /// Completion occurrence generated but not yet dispatched.
    Completing,
    Completed,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventPool {
    pub completion_front: VecDeque<Occurrence>,
    pub regular: VecDeque<Occurrence>,
}

impl EventPool {
    pub fn is_empty(&self) -> bool {
        self.completion_front.is_empty() && self.regular.is_empty()
    }

    pub fn len(&self) -> usize {
        self.completion_front.len() + self.regular.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeferredEntry {
    pub occ: Occurrence,
    pub by_state: VId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    Entry(VId),
    Exit(VId),
    Effect(TId),
}

/// Remaining work of one compound-transition leg. Composite entries are
/// expanded lazily when they reach the front of the plan.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegOp {
    Exit(VId),
    Enter(VId),
    SpawnExitChildren(VId),
    /// Waits until no leg runs in any of these regions.
    Join(Vec<RId>),
    ExitState(VId),
    ReleaseDeferred(VId),
    AbortDoActivity(VId),
    Behavior(Purpose),
    EnterState(VId),
    EntryDone(VId),
    Fork(VId),
    StartDoActivity(VId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Leg {
    pub plan: VecDeque<LegOp>,
    /// Running behavior for a `Behavior` op at the front of `plan`.
    pub exec: Option<Exec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoThread {
    pub activity: String,
    /// The invocation occurrence still waits in the local pool.
    pub invocation_pending: bool,
    pub exec: Option<Exec>,
    /// Occurrences routed to an accept node and not yet consumed.
    pub routed: Vec<(NodePath, Occurrence)>,
    /// Set when the owning state is exited; a frozen thread takes no steps.
    pub frozen: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoAccepter {
    pub thread: VId,
    pub node: NodePath,
    pub signals: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccepterRef {
    StateMachine,
    DoActivity { thread: VId, node: NodePath },
}

/// Outcome of matching a dispatched occurrence, awaiting its resolving step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pending {
    Choose { occ: Occurrence, options: Vec<AccepterRef>, fire: Vec<TId> },
    Discard(Occurrence),
    Defer { occ: Occurrence, by_state: VId },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuntimeState {
    pub config: BTreeMap<VId, Status>,
    pub pool: EventPool,
    pub deferred: Vec<DeferredEntry>,
    pub in_flight: Vec<Occurrence>,
    /// Legs keyed by the region they run in; at most one per region.
    pub legs: BTreeMap<RId, Leg>,
    pub threads: BTreeMap<VId, DoThread>,
    pub accepters: Vec<DoAccepter>,
    pub vars: BTreeMap<String, i64>,
    pub rtc_active: bool,
    pub pending: Option<Pending>,
    pub next_seq: u64,
    /// Index of the next unconsumed scenario step.
    pub cursor: usize,
}

impl RuntimeState {
    pub(crate) fn fresh_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Copy with sequence ids erased: two states with equal keys have the
    /// same futures up to renaming of occurrences.
    pub fn canonical(&self) -> RuntimeState {
        let mut c = self.clone();
        c.next_seq = 0;
        let zero = |o: &mut Occurrence| o.seq = 0;
        c.pool.completion_front.iter_mut().for_each(zero);
        c.pool.regular.iter_mut().for_each(zero);
        c.deferred.iter_mut().for_each(|d| d.occ.seq = 0);
        c.in_flight.iter_mut().for_each(zero);
        c.in_flight.sort_by(|a, b| a.kind.cmp(&b.kind));
        for t in c.threads.values_mut() {
            t.routed.iter_mut().for_each(|(_, o)| o.seq = 0);
        }
        match &mut c.pending {
            Some(Pending::Choose { occ, .. }) | Some(Pending::Discard(occ)) | Some(Pending::Defer { occ, .. }) => occ.seq = 0,
            None => {}
        }
        c
    }
}
