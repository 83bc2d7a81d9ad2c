//! Exhaustive exploration of every scheduler choice.
//!
//! The default mode is a memoized depth-first search over canonical runtime
//! states. Each node summarizes its future as a set of trace classes, a class
//! being (outcome, tagged outputs, expectation facts, optional stable
//! configuration sequence), with a path count and one witness. Witness traces
//! are rebuilt afterwards by replaying the recorded choice indices, so every
//! returned trace is a real path from the initial state.
//!
//! Full enumeration (`prune: false`) walks every path individually and keeps
//! every trace up to `max_traces`; it exists for universal checks over raw
//! records and to cross-check the memoized counts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::ops::ControlFlow;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    check_transition, Choice, Engine, EngineError, EngineOptions, MicroStep, Outcome, RuntimeState, ThreadId, Trace,
    TraceRecord, VId, Violation,
};
use crate::model::MachineModel;
use crate::parser::{Expectation, Scenario, ScenarioStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreBounds {
    /// Longest path explored; longer paths are reported as truncated.
    pub max_micro_steps: usize,
    /// Cap on materialized traces.
    pub max_traces: usize,
    /// Cap on queued plus deferred plus in-flight occurrences.
    pub max_pool: usize,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds { max_micro_steps: 200, max_traces: 10_000, max_pool: 16 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    pub bounds: ExploreBounds,
    /// Share results between equal canonical states.
    pub prune: bool,
    /// Distinguish classes by their stable configuration sequence.
    pub track_configs: bool,
    pub engine: EngineOptions,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { bounds: ExploreBounds::default(), prune: true, track_configs: false, engine: EngineOptions::default() }
    }
}

impl ExploreOptions {
    pub fn full() -> Self {
        ExploreOptions { prune: false, ..ExploreOptions::default() }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExploreError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("unknown state `{0}` in expectation")]
    UnknownState(String),
    #[error("bounds too tight: no trace completed within {max_micro_steps} micro-steps")]
    BoundsTooTight { max_micro_steps: usize },
    #[error("bounds must be positive")]
    ZeroBound,
}

/// Environment output together with the region whose thread produced it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaggedOutput {
    pub region: String,
    pub signal: String,
}

/// The finest class the search distinguishes; one witness trace each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathClass {
    pub outcome: Outcome,
    pub outputs: Vec<TaggedOutput>,
    /// Collapsed stable configurations, when tracked.
    pub configs: Option<Vec<String>>,
    /// Per expectation: whether the witnessed fact holds (see [`check`]).
    pub facts: Vec<bool>,
    pub discarded: bool,
    pub count: u128,
    /// Index into [`TraceSet::traces`].
    pub trace: usize,
}

impl PathClass {
    pub fn signals(&self) -> Vec<String> {
        self.outputs.iter().map(|o| o.signal.clone()).collect()
    }

    pub fn truncated(&self) -> bool {
        self.outcome == Outcome::BudgetExceeded
    }
}

/// An observable class: every complete path with this output sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableClass {
    pub outputs: Vec<String>,
    pub count: u128,
    pub witness: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreStats {
    /// Complete paths (terminal or deadlocked).
    pub complete: u128,
    pub deadlocks: u128,
    /// Complete paths that discard at least one signal.
    pub discarded: u128,
    pub truncated: u128,
    pub states: usize,
    pub edges: usize,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSet {
    pub traces: Vec<Trace>,
    pub paths: Vec<PathClass>,
    /// Output sequence to number of complete paths.
    #[serde(with = "pairs")]
    pub observable_partition: BTreeMap<Vec<String>, u128>,
    pub classes: Vec<ObservableClass>,
    /// Outputs projected per region, to number of complete paths.
    #[serde(with = "pairs")]
    pub region_partition: BTreeMap<Vec<(String, Vec<String>)>, u128>,
    pub stats: ExploreStats,
    pub expectations: Vec<Expectation>,
    /// False when `max_traces` cut the enumeration short.
    pub exhaustive: bool,
    pub bounds: ExploreBounds,
}

/// Maps with structured keys, serialized as `[key, value]` pairs since
/// JSON object keys must be strings.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

/// Interned cons lists; id 0 is the empty list.
#[derive(Default)]
struct Lists {
    cells: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), u32>,
}

impl Lists {
    fn new() -> Self {
        Lists { cells: vec![(u32::MAX, 0)], index: HashMap::new() }
    }

    fn cons(&mut self, head: u32, tail: u32) -> u32 {
        if let Some(&id) = self.index.get(&(head, tail)) {
            return id;
        }
        let id = self.cells.len() as u32;
        self.cells.push((head, tail));
        self.index.insert((head, tail), id);
        id
    }

    /// Prepends unless `head` is already first.
    fn cons_collapsed(&mut self, head: u32, tail: u32) -> u32 {
        if tail != 0 && self.cells[tail as usize].0 == head {
            tail
        } else {
            self.cons(head, tail)
        }
    }

    fn items(&self, mut id: u32) -> Vec<u32> {
        let mut out = Vec::new();
        while id != 0 {
            let (h, t) = self.cells[id as usize];
            out.push(h);
            id = t;
        }
        out
    }
}

#[derive(Default)]
struct Symbols {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, s: String) -> u32 {
        if let Some(&id) = self.index.get(&s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.index.insert(s.clone(), id);
        self.names.push(s);
        id
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Key {
    outcome: Outcome,
    outputs: u32,
    configs: u32,
    /// Bit 0: some signal discarded; bit k+1: fact of expectation k.
    facts: u64,
}

struct WNode {
    choice: u32,
    next: Witness,
}

type Witness = Option<Rc<WNode>>;

type Summary = Rc<Vec<(Key, u128, Witness)>>;

/// A depth-independent summary: no path below was cut by the bound.
struct Memo {
    summary: Summary,
    height: usize,
}

/// How each expectation turns into a path fact.
enum FactProbe {
    Active(VId),
    Discards(String),
    None,
}

struct Search<'a> {
    engine: &'a Engine,
    scenario: &'a Scenario,
    opts: ExploreOptions,
    probes: Vec<FactProbe>,
    lists: Lists,
    syms: Symbols,
    memo: HashMap<Vec<u8>, Memo>,
    memo_bounded: HashMap<(Vec<u8>, usize), Summary>,
    stats: ExploreStats,
}

const MAX_VIOLATIONS: usize = 64;

impl<'a> Search<'a> {
    fn state_facts(&self, st: &RuntimeState) -> u64 {
        let mut f = 0;
        for (k, p) in self.probes.iter().enumerate() {
            if let FactProbe::Active(v) = p {
                if st.config.contains_key(v) {
                    f |= 1 << (k + 1);
                }
            }
        }
        f
    }

    fn edge_facts(&self, discarded: Option<&str>) -> u64 {
        let Some(sig) = discarded else { return 0 };
        let mut f = 1;
        for (k, p) in self.probes.iter().enumerate() {
            if matches!(p, FactProbe::Discards(s) if s == sig) {
                f |= 1 << (k + 1);
            }
        }
        f
    }

    fn pool_load(st: &RuntimeState) -> usize {
        st.pool.len() + st.deferred.len() + st.in_flight.len()
    }

    fn record_violations(&mut self, pre: &RuntimeState, choice: &Choice, post: &RuntimeState) {
        let found = check_transition(self.engine, pre, choice, post);
        for v in found {
            if self.stats.violations.len() < MAX_VIOLATIONS && !self.stats.violations.contains(&v) {
                self.stats.violations.push(v);
            }
        }
    }

    fn config_symbol(&mut self, st: &RuntimeState) -> Option<u32> {
        if self.opts.track_configs && self.engine.is_stable(st) {
            let c = self.engine.render_config(st);
            Some(self.syms.intern(format!("cfg:{c}")))
        } else {
            None
        }
    }

    fn leaf(&mut self, st: &RuntimeState, outcome: Outcome) -> Summary {
        let configs = match self.config_symbol(st) {
            Some(c) => self.lists.cons(c, 0),
            None => 0,
        };
        let key = Key { outcome, outputs: 0, configs, facts: self.state_facts(st) };
        Rc::new(vec![(key, 1, None)])
    }

    /// Summary of all futures of `st` within `remaining` further steps.
    /// Returns the summary, the longest path length below, and whether the
    /// bound cut some path.
    fn visit(&mut self, st: &RuntimeState, remaining: usize) -> (Summary, usize, bool) {
        let key_bytes = serde_json::to_vec(&st.canonical()).expect("state serializes");
        if let Some(m) = self.memo.get(&key_bytes) {
            if m.height <= remaining {
                return (m.summary.clone(), m.height, false);
            }
        }
        if let Some(s) = self.memo_bounded.get(&(key_bytes.clone(), remaining)) {
            return (s.clone(), remaining, true);
        }
        self.stats.states += 1;
        let choices = self.engine.enabled(st, self.scenario);
        let (summary, height, truncated) = if choices.is_empty() {
            let outcome = if st.rtc_active || !self.engine.scenario_done(st, self.scenario) {
                Outcome::Deadlock
            } else {
                Outcome::Terminal
            };
            (self.leaf(st, outcome), 0, false)
        } else if remaining == 0 || Self::pool_load(st) > self.opts.bounds.max_pool {
            (self.leaf(st, Outcome::BudgetExceeded), 0, true)
        } else {
            let own_facts = self.state_facts(st);
            let own_config = self.config_symbol(st);
            let mut merged: BTreeMap<Key, (u128, Witness)> = BTreeMap::new();
            let mut height = 0;
            let mut truncated = false;
            for (i, choice) in choices.iter().enumerate() {
                let mut next = st.clone();
                let fx = self.engine.apply_unchecked(&mut next, self.scenario, choice);
                self.stats.edges += 1;
                self.record_violations(st, choice, &next);
                let out_sym = fx.output.map(|sig| {
                    let region = output_region(self.engine, choice);
                    self.syms.intern(format!("out:{region}\u{0}{sig}"))
                });
                let edge = self.edge_facts(fx.discarded.as_deref()) | own_facts;
                let (child, h, t) = self.visit(&next, remaining - 1);
                height = height.max(h + 1);
                truncated |= t;
                for (k, n, w) in child.iter() {
                    let outputs = match out_sym {
                        Some(o) => self.lists.cons(o, k.outputs),
                        None => k.outputs,
                    };
                    let configs = match own_config {
                        Some(c) => self.lists.cons_collapsed(c, k.configs),
                        None => k.configs,
                    };
                    let key = Key { outcome: k.outcome, outputs, configs, facts: k.facts | edge };
                    let slot = merged.entry(key).or_insert_with(|| (0, None));
                    if slot.0 == 0 {
                        slot.1 = Some(Rc::new(WNode { choice: i as u32, next: w.clone() }));
                    }
                    slot.0 = slot.0.saturating_add(*n);
                }
            }
            (Rc::new(merged.into_iter().map(|(k, (n, w))| (k, n, w)).collect()), height, truncated)
        };
        if truncated {
            self.memo_bounded.insert((key_bytes, remaining), summary.clone());
        } else {
            self.memo.insert(key_bytes, Memo { summary: summary.clone(), height });
        }
        (summary, height, truncated)
    }

    fn decode_outputs(&self, id: u32) -> Vec<TaggedOutput> {
        self.lists
            .items(id)
            .into_iter()
            .map(|s| {
                let raw = &self.syms.names[s as usize]["out:".len()..];
                let (region, signal) = raw.split_once('\u{0}').expect("tagged output");
                TaggedOutput { region: region.to_string(), signal: signal.to_string() }
            })
            .collect()
    }

    fn decode_configs(&self, id: u32) -> Vec<String> {
        self.lists.items(id).into_iter().map(|s| self.syms.names[s as usize]["cfg:".len()..].to_string()).collect()
    }
}

fn choice_indices(mut w: &Witness) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(n) = w {
        out.push(n.choice as usize);
        w = &n.next;
    }
    out
}

fn record(engine: &Engine, st: &mut RuntimeState, scenario: &Scenario, choice: &Choice, index: usize) -> TraceRecord {
    crate::engine::step_record(engine, st, scenario, choice, index)
}

fn empty_trace(engine: &Engine, bounds: &ExploreBounds) -> Trace {
    Trace {
        model: engine.model.model.name.clone(),
        strategy: "explore".into(),
        max_steps: bounds.max_micro_steps,
        records: vec![],
        outcome: Outcome::Terminal,
    }
}

/// Rebuilds the trace taking choice `indices[i]` at step `i`.
fn replay_indices(engine: &Engine, scenario: &Scenario, bounds: &ExploreBounds, indices: &[usize], outcome: Outcome) -> Trace {
    let mut st = engine.initial_state();
    let mut trace = empty_trace(engine, bounds);
    for (i, &c) in indices.iter().enumerate() {
        let choices = engine.enabled(&st, scenario);
        let rec = record(engine, &mut st, scenario, &choices[c], i);
        trace.records.push(rec);
    }
    trace.outcome = outcome;
    trace
}

fn probes(engine: &Engine, sc: &Scenario) -> Result<Vec<FactProbe>, ExploreError> {
    sc.expectations
        .iter()
        .map(|e| match e {
            Expectation::EventuallyActive(p) => {
                engine.model.vertex_by_path(p).map(FactProbe::Active).ok_or_else(|| ExploreError::UnknownState(p.clone()))
            }
            Expectation::NeverDiscards(s) => Ok(FactProbe::Discards(s.clone())),
            Expectation::Emits(_) => Ok(FactProbe::None),
        })
        .collect()
}

/// Explores `scenario` on `model` with default options.
pub fn explore(model: &MachineModel, scenario: &Scenario, bounds: ExploreBounds) -> Result<TraceSet, ExploreError> {
    explore_with(model, scenario, ExploreOptions { bounds, ..ExploreOptions::default() })
}

pub fn explore_with(model: &MachineModel, scenario: &Scenario, opts: ExploreOptions) -> Result<TraceSet, ExploreError> {
    let b = opts.bounds;
    if b.max_micro_steps == 0 || b.max_traces == 0 || b.max_pool == 0 {
        return Err(ExploreError::ZeroBound);
    }
    let engine = Engine::new(model, opts.engine)?;
    check_injections(&engine, scenario)?;
    let probes = probes(&engine, scenario)?;
    // Recursion depth follows the step bound; run on a roomy stack.
    let sc = scenario.clone();
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(512 << 20)
            .spawn_scoped(scope, || if opts.prune { memoized(&engine, &sc, opts, probes) } else { enumerate(&engine, &sc, opts, probes) })
            .expect("spawn explorer thread")
            .join()
            .expect("explorer thread panicked")
    })
}

fn memoized(engine: &Engine, scenario: &Scenario, opts: ExploreOptions, probes: Vec<FactProbe>) -> Result<TraceSet, ExploreError> {
    let mut s = Search {
        engine,
        scenario,
        opts,
        probes,
        lists: Lists::new(),
        syms: Symbols::default(),
        memo: HashMap::new(),
        memo_bounded: HashMap::new(),
        stats: ExploreStats::default(),
    };
    let root = engine.initial_state();
    let (summary, _, _) = s.visit(&root, opts.bounds.max_micro_steps);
    let n_exp = scenario.expectations.len();
    let mut set = new_set(scenario, opts.bounds, std::mem::take(&mut s.stats));
    for (key, count, w) in summary.iter() {
        if set.traces.len() >= opts.bounds.max_traces {
            set.exhaustive = false;
            break;
        }
        let trace = replay_indices(engine, scenario, &opts.bounds, &choice_indices(w), key.outcome);
        let class = PathClass {
            outcome: key.outcome,
            outputs: s.decode_outputs(key.outputs),
            configs: opts.track_configs.then(|| s.decode_configs(key.configs)),
            facts: (0..n_exp).map(|k| key.facts & (1 << (k + 1)) != 0).collect(),
            discarded: key.facts & 1 != 0,
            count: *count,
            trace: set.traces.len(),
        };
        set.traces.push(trace);
        set.paths.push(class);
    }
    finish(set)
}

struct Enumeration<'a> {
    engine: &'a Engine,
    scenario: &'a Scenario,
    opts: ExploreOptions,
    probes: Vec<FactProbe>,
    records: Vec<TraceRecord>,
    tags: Vec<Option<TaggedOutput>>,
    facts: Vec<u64>,
    set: TraceSet,
    /// When present, traces are handed over instead of stored.
    sink: Option<&'a mut (dyn FnMut(&Trace) -> ControlFlow<()> + Send)>,
    emitted: usize,
    stopped: bool,
}

impl Enumeration<'_> {
    fn state_facts(&self, st: &RuntimeState) -> u64 {
        let mut f = 0;
        for (k, p) in self.probes.iter().enumerate() {
            if matches!(p, FactProbe::Active(v) if st.config.contains_key(v)) {
                f |= 1 << (k + 1);
            }
        }
        f
    }

    fn walk(&mut self, st: &RuntimeState) {
        if self.emitted >= self.opts.bounds.max_traces {
            self.set.exhaustive = false;
            return;
        }
        self.set.stats.states += 1;
        let facts = self.facts.last().copied().unwrap_or(0) | self.state_facts(st);
        let choices = self.engine.enabled(st, self.scenario);
        let outcome = if choices.is_empty() {
            Some(if st.rtc_active || !self.engine.scenario_done(st, self.scenario) { Outcome::Deadlock } else { Outcome::Terminal })
        } else if self.records.len() >= self.opts.bounds.max_micro_steps
            || st.pool.len() + st.deferred.len() + st.in_flight.len() > self.opts.bounds.max_pool
        {
            Some(Outcome::BudgetExceeded)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            self.emit(outcome, facts);
            return;
        }
        for choice in &choices {
            let mut next = st.clone();
            let rec = record(self.engine, &mut next, self.scenario, choice, self.records.len());
            self.set.stats.edges += 1;
            for v in check_transition(self.engine, st, choice, &next) {
                if self.set.stats.violations.len() < MAX_VIOLATIONS && !self.set.stats.violations.contains(&v) {
                    self.set.stats.violations.push(v);
                }
            }
            let mut f = facts;
            if let Some(sig) = &rec.discarded {
                f |= 1;
                for (k, p) in self.probes.iter().enumerate() {
                    if matches!(p, FactProbe::Discards(s) if s == sig) {
                        f |= 1 << (k + 1);
                    }
                }
            }
            let tag = rec.output.clone().map(|signal| TaggedOutput { region: output_region(self.engine, choice), signal });
            self.records.push(rec);
            self.tags.push(tag);
            self.facts.push(f);
            self.walk(&next);
            self.records.pop();
            self.tags.pop();
            self.facts.pop();
            if !self.set.exhaustive {
                return;
            }
        }
    }

    fn emit(&mut self, outcome: Outcome, facts: u64) {
        let mut trace = empty_trace(self.engine, &self.opts.bounds);
        trace.records = self.records.clone();
        trace.outcome = outcome;
        self.emitted += 1;
        if let Some(sink) = self.sink.as_mut() {
            if sink(&trace).is_break() {
                self.stopped = true;
                self.set.exhaustive = false;
            }
            return;
        }
        let n_exp = self.scenario.expectations.len();
        let configs = self.opts.track_configs.then(|| trace.stable_configs());
        self.set.paths.push(PathClass {
            outcome,
            outputs: self.tags.iter().flatten().cloned().collect(),
            configs,
            facts: (0..n_exp).map(|k| facts & (1 << (k + 1)) != 0).collect(),
            discarded: facts & 1 != 0,
            count: 1,
            trace: self.set.traces.len(),
        });
        self.set.traces.push(trace);
    }
}

fn output_region(engine: &Engine, choice: &Choice) -> String {
    let m = &engine.model;
    let thread = match choice {
        Choice::Step(MicroStep::RunAction { thread, .. })
        | Choice::Step(MicroStep::RunEffectAction { thread, .. })
        | Choice::Step(MicroStep::RunExitBehaviorAction { thread, .. }) => thread,
        _ => return String::new(),
    };
    match thread {
        ThreadId::Leg(r) => m.regions[*r].path.clone(),
        ThreadId::Do(v) => m.regions[m.vertices[*v].region].path.clone(),
        _ => String::new(),
    }
}

fn enumerate(engine: &Engine, scenario: &Scenario, opts: ExploreOptions, probes: Vec<FactProbe>) -> Result<TraceSet, ExploreError> {
    let mut e = Enumeration {
        engine,
        scenario,
        opts,
        probes,
        records: vec![],
        tags: vec![],
        facts: vec![],
        set: new_set(scenario, opts.bounds, ExploreStats::default()),
        sink: None,
        emitted: 0,
        stopped: false,
    };
    e.walk(&engine.initial_state());
    finish(e.set)
}

/// Result of [`for_each_path`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathWalk {
    /// Paths handed to the visitor.
    pub paths: usize,
    /// False when the walk ended before visiting every path.
    pub exhaustive: bool,
    /// The visitor asked to stop.
    pub stopped: bool,
    pub stats: ExploreStats,
}

/// Walks every path individually and hands each finished trace to `visit`
/// without keeping it, so universal checks need not hold all traces at once.
/// `max_traces` caps the number of paths visited; `prune` is ignored. The
/// walk ends early when `visit` breaks.
pub fn for_each_path<F>(model: &MachineModel, scenario: &Scenario, opts: ExploreOptions, mut visit: F) -> Result<PathWalk, ExploreError>
where
    F: FnMut(&Trace) -> ControlFlow<()> + Send,
{
    let b = opts.bounds;
    if b.max_micro_steps == 0 || b.max_traces == 0 || b.max_pool == 0 {
        return Err(ExploreError::ZeroBound);
    }
    let engine = Engine::new(model, opts.engine)?;
    check_injections(&engine, scenario)?;
    let probes = probes(&engine, scenario)?;
    let sc = scenario.clone();
    let walk = std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(512 << 20)
            .spawn_scoped(scope, || {
                let mut e = Enumeration {
                    engine: &engine,
                    scenario: &sc,
                    opts,
                    probes,
                    records: vec![],
                    tags: vec![],
                    facts: vec![],
                    set: new_set(&sc, opts.bounds, ExploreStats::default()),
                    sink: Some(&mut visit),
                    emitted: 0,
                    stopped: false,
                };
                e.walk(&engine.initial_state());
                PathWalk { paths: e.emitted, exhaustive: e.set.exhaustive, stopped: e.stopped, stats: e.set.stats }
            })
            .expect("spawn explorer thread")
            .join()
            .expect("explorer thread panicked")
    });
    Ok(walk)
}

fn check_injections(engine: &Engine, scenario: &Scenario) -> Result<(), ExploreError> {
    for s in &scenario.steps {
        if let ScenarioStep::Inject(sig) = s {
            if !engine.model.is_signal(sig) {
                return Err(EngineError::UnknownSignal(sig.clone()).into());
            }
        }
    }
    Ok(())
}

fn new_set(scenario: &Scenario, bounds: ExploreBounds, stats: ExploreStats) -> TraceSet {
    TraceSet {
        traces: vec![],
        paths: vec![],
        observable_partition: BTreeMap::new(),
        classes: vec![],
        region_partition: BTreeMap::new(),
        stats,
        expectations: scenario.expectations.clone(),
        exhaustive: true,
        bounds,
    }
}

/// Fills the partitions and path statistics from `paths`.
fn finish(mut set: TraceSet) -> Result<TraceSet, ExploreError> {
    let mut witness: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let stats = &mut set.stats;
    stats.complete = 0;
    stats.deadlocks = 0;
    stats.discarded = 0;
    stats.truncated = 0;
    for p in &set.paths {
        if p.truncated() {
            stats.truncated += p.count;
            continue;
        }
        stats.complete += p.count;
        if p.outcome == Outcome::Deadlock {
            stats.deadlocks += p.count;
        }
        if p.discarded {
            stats.discarded += p.count;
        }
        let signals = p.signals();
        *set.observable_partition.entry(signals.clone()).or_default() += p.count;
        witness.entry(signals).or_insert(p.trace);
        let mut per_region: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for o in &p.outputs {
            per_region.entry(o.region.clone()).or_default().push(o.signal.clone());
        }
        *set.region_partition.entry(per_region.into_iter().collect()).or_default() += p.count;
    }
    set.classes = set
        .observable_partition
        .iter()
        .map(|(outputs, &count)| ObservableClass { outputs: outputs.clone(), count, witness: witness[outputs] })
        .collect();
    if set.stats.complete == 0 {
        return Err(ExploreError::BoundsTooTight { max_micro_steps: set.bounds.max_micro_steps });
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Holds {
    All,
    Some,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub expectation: Expectation,
    pub holds: Holds,
    /// Traces where the expectation holds.
    pub witnesses: Vec<usize>,
    /// Traces where it fails.
    pub counterexamples: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
}

/// Evaluates each expectation over the complete paths of `set`.
pub fn check(set: &TraceSet, expectations: &[Expectation]) -> Report {
    let verdicts = expectations
        .iter()
        .map(|e| {
            let pos = set.expectations.iter().position(|x| x == e);
            let mut witnesses = vec![];
            let mut counterexamples = vec![];
            for p in set.paths.iter().filter(|p| !p.truncated()) {
                let ok = match e {
                    Expectation::Emits(seq) => p.signals() == *seq,
                    Expectation::EventuallyActive(_) => pos.is_some_and(|k| p.facts[k]),
                    Expectation::NeverDiscards(sig) => match pos {
                        Some(k) => !p.facts[k],
                        None => !set.traces[p.trace].records.iter().any(|r| r.discarded.as_deref() == Some(sig.as_str())),
                    },
                };
                if ok { witnesses.push(p.trace) } else { counterexamples.push(p.trace) }
            }
            let holds = match (witnesses.is_empty(), counterexamples.is_empty()) {
                (false, true) => Holds::All,
                (true, _) => Holds::None,
                _ => Holds::Some,
            };
            Verdict { expectation: e.clone(), holds, witnesses, counterexamples }
        })
        .collect();
    Report { verdicts }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divergence {
    Equal,
    /// First index where the records differ; `None` past the end of a trace.
    At { index: usize, a: Option<TraceRecord>, b: Option<TraceRecord> },
}

pub fn diff(a: &Trace, b: &Trace) -> Divergence {
    let n = a.records.len().max(b.records.len());
    for i in 0..n {
        let (x, y) = (a.records.get(i), b.records.get(i));
        if x != y {
            return Divergence::At { index: i, a: x.cloned(), b: y.cloned() };
        }
    }
    Divergence::Equal
}

impl TraceSet {
    /// Human-readable summary: counts, one witness per class, verdicts.
    pub fn render(&self, report: &Report) -> String {
        let mut s = String::new();
        let st = &self.stats;
        let _ = writeln!(
            s,
            "{} observable class{} over {} complete path{} ({} region-normalized)",
            self.classes.len(),
            if self.classes.len() == 1 { "" } else { "es" },
            st.complete,
            if st.complete == 1 { "" } else { "s" },
            self.region_partition.len()
        );
        let _ = writeln!(
            s,
            "deadlocks {} discarding {} truncated {} states {} edges {}{}",
            st.deadlocks,
            st.discarded,
            st.truncated,
            st.states,
            st.edges,
            if self.exhaustive { "" } else { " (trace cap reached)" }
        );
        for (i, c) in self.classes.iter().enumerate() {
            let _ = writeln!(s, "class {i}: {} path(s), witness trace {}", c.count, c.witness);
            let _ = writeln!(s, "  outputs [{}]", c.outputs.join(", "));
        }
        for v in &report.verdicts {
            let _ = writeln!(s, "expect {}: {:?} (witnesses {:?})", describe(&v.expectation), v.holds, v.witnesses);
        }
        for v in &st.violations {
            let _ = writeln!(s, "violation {}: {}", v.invariant, v.detail);
        }
        s
    }
}

fn describe(e: &Expectation) -> String {
    match e {
        Expectation::EventuallyActive(p) => format!("eventually-active {p}"),
        Expectation::Emits(seq) => format!("emits [{}]", seq.join(", ")),
        Expectation::NeverDiscards(s) => format!("never-discards {s}"),
    }
}
