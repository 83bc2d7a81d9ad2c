use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{Block, Destination, NodeKind, Operand, TransitionKind};
use crate::parser::{Scenario, ScenarioStep};

use super::compile::{RId, TId, VId, VKind};
use super::exec::{node_at, render_path, Exec, NodePath};
use super::state::*;
use super::{Choice, Engine, EngineError, MicroStep, StepEffect, ThreadId};

const EMPTY: &Block = &Vec::new();

impl Engine {
    /// State at the start of the initial RTC step: one leg per root region
    /// about to run its initial transition.
    pub fn initial_state(&self) -> RuntimeState {
        let m = &self.model;
        let mut st = RuntimeState {
            config: BTreeMap::new(),
            pool: EventPool::default(),
            deferred: vec![],
            in_flight: vec![],
            legs: BTreeMap::new(),
            threads: BTreeMap::new(),
            accepters: vec![],
            vars: m.model.vars.iter().map(|v| (v.clone(), 0)).collect(),
            rtc_active: true,
            pending: None,
            next_seq: 0,
            cursor: 0,
        };
        for &r in &m.root_regions {
            st.legs.insert(r, self.initial_leg(r));
        }
        self.settle(&mut st);
        st
    }

    fn initial_leg(&self, r: RId) -> Leg {
        let t = self.model.regions[r].initial;
        Leg { plan: VecDeque::from([LegOp::Behavior(Purpose::Effect(t)), LegOp::Enter(self.model.transitions[t].target)]), exec: None }
    }

    fn body(&self, activity: Option<&str>) -> &Block {
        activity.and_then(|a| self.model.activity(a)).map(|a| &a.body).unwrap_or(EMPTY)
    }

    fn purpose_activity(&self, p: Purpose) -> Option<&str> {
        let m = &self.model;
        match p {
            Purpose::Entry(v) => m.vertices[v].entry.as_deref(),
            Purpose::Exit(v) => m.vertices[v].exit.as_deref(),
            Purpose::Effect(t) => m.transitions[t].effect.as_deref(),
        }
    }

    pub(crate) fn thread_done(&self, t: &DoThread) -> bool {
        !t.invocation_pending && t.exec.as_ref().is_some_and(|e| e.done(self.body(Some(&t.activity))))
    }

    /// Active vertex of region `r`, if entered.
    pub fn active_in(&self, st: &RuntimeState, r: RId) -> Option<VId> {
        self.model.regions[r].vertices.iter().copied().find(|v| st.config.contains_key(v))
    }

    /// Entry done, do-activity absent or finished, and every sub-region
    /// resting in a final state.
    pub fn completion_check(&self, st: &RuntimeState, v: VId) -> bool {
        let info = &self.model.vertices[v];
        if info.kind != VKind::State || !matches!(st.config.get(&v), Some(s) if *s != Status::Entering) {
            return false;
        }
        if info.do_activity.is_some() && !st.threads.get(&v).is_some_and(|t| self.thread_done(t)) {
            return false;
        }
        info.regions.iter().all(|&r| self.active_in(st, r).is_some_and(|a| self.model.vertices[a].kind == VKind::Final))
    }

    /// Completion occurrences are generated only for states that have a
    /// completion transition; others would be discarded unobserved.
    fn completion_enabled(&self, st: &RuntimeState, v: VId) -> bool {
        st.config.get(&v) == Some(&Status::EntryDone) && self.model.has_completion_transition(v) && self.completion_check(st, v)
    }

    /// A do thread is quiescent once it has no nodes left to run; then it
    /// has no accepters or routed occurrences either.
    pub fn do_rtc_quiescence(&self, st: &RuntimeState, v: VId) -> bool {
        st.threads.get(&v).is_some_and(|t| self.thread_done(t))
    }

    /// No RTC step running and nothing waiting to be dispatched or delivered.
    pub fn is_stable(&self, st: &RuntimeState) -> bool {
        !st.rtc_active
            && st.pending.is_none()
            && st.pool.is_empty()
            && st.in_flight.is_empty()
            && !st.config.keys().any(|&v| self.completion_enabled(st, v))
    }

    /// Stable, and no thread can move: every do-activity is finished or
    /// waiting at a registered accepter. Only an injection can follow.
    pub fn is_quiescent(&self, st: &RuntimeState) -> bool {
        self.is_stable(st) && self.enabled_steps(st).is_empty()
    }

    fn guard_ok(&self, st: &RuntimeState, t: TId) -> bool {
        match &self.model.transitions[t].guard {
            None => true,
            Some(g) => g.op.eval(st.vars.get(&g.var).copied().unwrap_or(0), g.value),
        }
    }

    fn enabled_transitions(&self, st: &RuntimeState, signal: &str) -> Vec<TId> {
        let m = &self.model;
        let mut out = Vec::new();
        for &v in st.config.keys() {
            if m.vertices[v].kind != VKind::State {
                continue;
            }
            for &t in &m.regions[m.vertices[v].region].transitions {
                let ti = &m.transitions[t];
                if ti.source == v && ti.trigger.as_deref() == Some(signal) && self.guard_ok(st, t) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Transitions that fire for `signal`: enabled ones not overridden by an
    /// enabled transition from a proper descendant of their source.
    pub fn fire_set(&self, st: &RuntimeState, signal: &str) -> Vec<TId> {
        let m = &self.model;
        let enabled = self.enabled_transitions(st, signal);
        enabled
            .iter()
            .copied()
            .filter(|&t| !enabled.iter().any(|&u| m.is_proper_descendant(m.transitions[u].source, m.transitions[t].source)))
            .collect()
    }

    /// `Some(D)` iff active state `D` defers `signal` and no enabled
    /// transition leaves `D` or one of its descendants. The innermost such
    /// state wins.
    pub fn defer_decision(&self, st: &RuntimeState, signal: &str) -> Option<VId> {
        let m = &self.model;
        let enabled = self.enabled_transitions(st, signal);
        st.config
            .keys()
            .copied()
            .filter(|&d| m.vertices[d].defer.iter().any(|s| s == signal))
            .filter(|&d| {
                !enabled.iter().any(|&t| {
                    let src = m.transitions[t].source;
                    src == d || m.is_proper_descendant(src, d)
                })
            })
            .max_by_key(|&d| (m.depth(d), std::cmp::Reverse(d)))
    }

    fn do_matches(&self, st: &RuntimeState, signal: &str) -> Vec<AccepterRef> {
        let mut v: Vec<AccepterRef> = st
            .accepters
            .iter()
            .filter(|a| a.signals.iter().any(|s| s == signal))
            .map(|a| AccepterRef::DoActivity { thread: a.thread, node: a.node.clone() })
            .collect();
        v.sort();
        v
    }

    fn decide(&self, st: &RuntimeState, occ: Occurrence) -> Pending {
        let m = &self.model;
        match &occ.kind {
            OccKind::Completion(v) => {
                let v = *v;
                let fire: Vec<TId> = m.regions[m.vertices[v].region]
                    .transitions
                    .iter()
                    .copied()
                    .filter(|&t| m.transitions[t].source == v && m.transitions[t].kind == TransitionKind::Completion && self.guard_ok(st, t))
                    .collect();
                if fire.is_empty() || !st.config.contains_key(&v) {
                    Pending::Discard(occ)
                } else {
                    Pending::Choose { occ, options: vec![AccepterRef::StateMachine], fire }
                }
            }
            OccKind::Signal(sig) => {
                let dm = self.do_matches(st, sig);
                if let Some(d) = self.defer_decision(st, sig) {
                    if dm.is_empty() {
                        return Pending::Defer { occ, by_state: d };
                    }
                    return Pending::Choose { occ, options: dm, fire: vec![] };
                }
                let fire = self.fire_set(st, sig);
                let mut options = Vec::new();
                if !fire.is_empty() {
                    options.push(AccepterRef::StateMachine);
                }
                options.extend(dm);
                if options.is_empty() {
                    Pending::Discard(occ)
                } else {
                    Pending::Choose { occ, options, fire }
                }
            }
            OccKind::Invocation => Pending::Discard(occ),
        }
    }

    /// Accepters that would be offered if `occ` were dispatched now.
    pub fn match_accepters(&self, st: &RuntimeState, occ: &Occurrence) -> Vec<AccepterRef> {
        match self.decide(st, occ.clone()) {
            Pending::Choose { options, .. } => options,
            _ => vec![],
        }
    }

    fn dispatch_candidates(&self, st: &RuntimeState) -> Vec<u64> {
        if let Some(c) = st.pool.completion_front.front() {
            return vec![c.seq];
        }
        if self.options.fifo {
            return st.pool.regular.front().map(|o| vec![o.seq]).unwrap_or_default();
        }
        if let Some(r) = st.pool.regular.iter().find(|o| o.released) {
            return vec![r.seq];
        }
        let mut seen = BTreeSet::new();
        st.pool.regular.iter().filter(|o| seen.insert(o.kind.clone())).map(|o| o.seq).collect()
    }

    fn next_inject(&self, st: &RuntimeState, sc: &Scenario) -> Option<(usize, String, bool)> {
        let mut barrier = false;
        for (i, s) in sc.steps.iter().enumerate().skip(st.cursor) {
            match s {
                ScenarioStep::AwaitStable => barrier = true,
                ScenarioStep::Inject(sig) => return Some((i, sig.clone(), barrier)),
            }
        }
        None
    }

    /// True iff no injection remains.
    pub fn scenario_done(&self, st: &RuntimeState, sc: &Scenario) -> bool {
        self.next_inject(st, sc).is_none()
    }

    /// Every legal next choice in canonical order: dispatcher, completions,
    /// legs by region, do threads by state, deliveries, then injection.
    pub fn enabled(&self, st: &RuntimeState, sc: &Scenario) -> Vec<Choice> {
        let mut out: Vec<Choice> = self.enabled_steps(st).into_iter().map(Choice::Step).collect();
        if let Some((_, sig, barrier)) = self.next_inject(st, sc) {
            if !barrier || self.is_quiescent(st) {
                out.push(Choice::Inject(sig));
            }
        }
        out
    }

    pub fn enabled_steps(&self, st: &RuntimeState) -> Vec<MicroStep> {
        let mut out = Vec::new();
        match &st.pending {
            Some(Pending::Choose { occ, options, .. }) => {
                for a in options {
                    out.push(MicroStep::ChooseAccepter { occ: occ.seq, accepter: a.clone() });
                }
            }
            Some(Pending::Discard(occ)) => out.push(MicroStep::DiscardEvent { occ: occ.seq }),
            Some(Pending::Defer { occ, by_state }) => out.push(MicroStep::DeferEvent { occ: occ.seq, by_state: *by_state }),
            None if !st.rtc_active => {
                for occ in self.dispatch_candidates(st) {
                    out.push(MicroStep::DispatchEvent { occ });
                }
            }
            None => {}
        }
        for &v in st.config.keys() {
            if self.completion_enabled(st, v) {
                out.push(MicroStep::GenerateCompletion { state: v });
            }
        }
        for (&r, leg) in &st.legs {
            let thread = ThreadId::Leg(r);
            match leg.plan.front() {
                Some(LegOp::ExitState(v)) => out.push(MicroStep::ExitState { state: *v }),
                Some(LegOp::EnterState(v)) => out.push(MicroStep::EnterState { state: *v }),
                Some(LegOp::StartDoActivity(v)) => out.push(MicroStep::StartDoActivity { state: *v }),
                Some(LegOp::ReleaseDeferred(v)) => out.push(MicroStep::ReleaseDeferred { state: *v }),
                Some(LegOp::AbortDoActivity(v)) => out.push(MicroStep::AbortDoActivity { state: *v }),
                Some(LegOp::Behavior(p)) => {
                    let (Some(exec), p) = (&leg.exec, *p) else { continue };
                    for node in exec.positions(self.body(self.purpose_activity(p))) {
                        out.push(match p {
                            Purpose::Entry(_) => MicroStep::RunAction { thread: thread.clone(), node },
                            Purpose::Exit(state) => MicroStep::RunExitBehaviorAction { thread: thread.clone(), state, node },
                            Purpose::Effect(transition) => MicroStep::RunEffectAction { thread: thread.clone(), transition, node },
                        });
                    }
                }
                _ => {}
            }
        }
        for (&v, t) in &st.threads {
            if t.frozen {
                continue;
            }
            if t.invocation_pending {
                out.push(MicroStep::InitialDoRtc { thread: v });
                continue;
            }
            let Some(exec) = &t.exec else { continue };
            let body = self.body(Some(&t.activity));
            for node in exec.positions(body) {
                match &node_at(body, &node).kind {
                    NodeKind::Accept { signals } => {
                        if t.routed.iter().any(|(p, _)| *p == node) {
                            out.push(MicroStep::RunAction { thread: ThreadId::Do(v), node });
                        } else if st.accepters.iter().any(|a| a.thread == v && a.node == node) {
                        } else if let Some(d) = st.deferred.iter().find(|d| d.occ.signal().is_some_and(|s| signals.iter().any(|x| x == s))) {
                            out.push(MicroStep::ConsumeDeferred { thread: v, node, occ: d.occ.seq });
                        } else {
                            out.push(MicroStep::RegisterDoAccept { thread: v, node });
                        }
                    }
                    _ => out.push(MicroStep::RunAction { thread: ThreadId::Do(v), node }),
                }
            }
        }
        // One delivery per distinct signal, oldest first, in signal order so
        // that states equal up to sequence ids list the same choices.
        let mut oldest: BTreeMap<&OccKind, u64> = BTreeMap::new();
        for o in &st.in_flight {
            oldest.entry(&o.kind).or_insert(o.seq);
        }
        out.extend(oldest.into_values().map(|occ| MicroStep::DeliverInFlight { occ }));
        out
    }

    /// Applies `choice` after checking that it is enabled.
    pub fn apply(&self, st: &mut RuntimeState, sc: &Scenario, choice: &Choice) -> Result<StepEffect, EngineError> {
        if !self.enabled(st, sc).contains(choice) {
            return Err(EngineError::IllegalStep(format!("{choice:?}")));
        }
        Ok(self.apply_unchecked(st, sc, choice))
    }

    /// Appends an environment signal to the regular queue.
    pub fn inject(&self, st: &mut RuntimeState, signal: &str) -> Result<(), EngineError> {
        if !self.model.is_signal(signal) {
            return Err(EngineError::UnknownSignal(signal.to_string()));
        }
        let seq = st.fresh_seq();
        st.pool.regular.push_back(Occurrence { seq, kind: OccKind::Signal(signal.to_string()), released: false });
        Ok(())
    }

    /// Applies a choice taken from [`Engine::enabled`] for the same state.
    pub fn apply_unchecked(&self, st: &mut RuntimeState, sc: &Scenario, choice: &Choice) -> StepEffect {
        let mut fx = StepEffect::default();
        match choice {
            Choice::Inject(sig) => {
                let (i, _, _) = self.next_inject(st, sc).expect("inject enabled");
                st.cursor = i + 1;
                let seq = st.fresh_seq();
                st.pool.regular.push_back(Occurrence { seq, kind: OccKind::Signal(sig.clone()), released: false });
            }
            Choice::Step(step) => self.apply_step(st, step, &mut fx),
        }
        self.settle(st);
        fx
    }

    fn apply_step(&self, st: &mut RuntimeState, step: &MicroStep, fx: &mut StepEffect) {
        let m = &self.model;
        match step {
            MicroStep::DispatchEvent { occ } => {
                let seq = *occ;
                let o = if st.pool.completion_front.front().is_some_and(|o| o.seq == seq) {
                    st.pool.completion_front.pop_front().unwrap()
                } else {
                    let i = st.pool.regular.iter().position(|o| o.seq == seq).expect("dispatched occurrence queued");
                    st.pool.regular.remove(i).unwrap()
                };
                st.rtc_active = true;
                if let OccKind::Completion(v) = o.kind {
                    if st.config.get(&v) == Some(&Status::Completing) {
                        st.config.insert(v, Status::Completed);
                    }
                }
                st.pending = Some(self.decide(st, o));
            }
            MicroStep::ChooseAccepter { accepter, .. } => {
                let Some(Pending::Choose { occ, fire, .. }) = st.pending.take() else { unreachable!() };
                match accepter {
                    AccepterRef::StateMachine => {
                        for t in fire {
                            let ti = &m.transitions[t];
                            let plan = match ti.kind {
                                TransitionKind::Internal => VecDeque::from([LegOp::Behavior(Purpose::Effect(t))]),
                                _ => VecDeque::from([LegOp::Exit(ti.source), LegOp::Behavior(Purpose::Effect(t)), LegOp::Enter(ti.target)]),
                            };
                            st.legs.insert(ti.region, Leg { plan, exec: None });
                        }
                    }
                    AccepterRef::DoActivity { thread, node } => {
                        st.accepters.retain(|a| !(a.thread == *thread && a.node == *node));
                        st.threads.get_mut(thread).expect("accepting thread").routed.push((node.clone(), occ));
                    }
                }
            }
            MicroStep::DiscardEvent { .. } => {
                if let Some(Pending::Discard(o)) = st.pending.take() {
                    fx.discarded = o.signal().map(str::to_string);
                }
            }
            MicroStep::DeferEvent { .. } => {
                if let Some(Pending::Defer { occ, by_state }) = st.pending.take() {
                    st.deferred.push(DeferredEntry { occ, by_state });
                }
            }
            MicroStep::DeliverInFlight { occ } => {
                let i = st.in_flight.iter().position(|o| o.seq == *occ).expect("in flight");
                let o = st.in_flight.remove(i);
                st.pool.regular.push_back(o);
            }
            MicroStep::GenerateCompletion { state } => {
                let seq = st.fresh_seq();
                st.pool.completion_front.push_back(Occurrence { seq, kind: OccKind::Completion(*state), released: false });
                st.config.insert(*state, Status::Completing);
            }
            MicroStep::ExitState { state } => {
                let v = *state;
                st.config.remove(&v);
                st.pool.completion_front.retain(|o| o.kind != OccKind::Completion(v));
                if let Some(t) = st.threads.get_mut(&v) {
                    t.frozen = true;
                }
                self.pop_leg(st, v);
            }
            MicroStep::ReleaseDeferred { state } => {
                let v = *state;
                let (released, kept): (Vec<_>, Vec<_>) = st.deferred.drain(..).partition(|d| d.by_state == v);
                st.deferred = kept;
                let at = st.pool.regular.iter().take_while(|o| o.released).count();
                for (k, d) in released.into_iter().enumerate() {
                    let mut o = d.occ;
                    o.released = true;
                    st.pool.regular.insert(at + k, o);
                }
                self.pop_leg(st, v);
            }
            MicroStep::AbortDoActivity { state } => {
                let v = *state;
                st.threads.remove(&v);
                st.accepters.retain(|a| a.thread != v);
                self.pop_leg(st, v);
            }
            MicroStep::EnterState { state } => {
                let v = *state;
                let status = if m.vertices[v].kind == VKind::Final { Status::EntryDone } else { Status::Entering };
                st.config.insert(v, status);
                self.pop_leg(st, v);
            }
            MicroStep::StartDoActivity { state } => {
                let v = *state;
                let activity = m.vertices[v].do_activity.clone().expect("do activity");
                st.threads.insert(v, DoThread { activity, invocation_pending: true, exec: None, routed: vec![], frozen: false });
                self.pop_leg(st, v);
            }
            MicroStep::InitialDoRtc { thread } => {
                let t = st.threads.get_mut(thread).expect("thread");
                t.invocation_pending = false;
                t.exec = Some(Exec::new(self.body(Some(&t.activity))));
            }
            MicroStep::RegisterDoAccept { thread, node } => {
                let t = &st.threads[thread];
                let NodeKind::Accept { signals } = &node_at(self.body(Some(&t.activity)), node).kind else { unreachable!() };
                st.accepters.push(DoAccepter { thread: *thread, node: node.clone(), signals: signals.clone() });
            }
            MicroStep::ConsumeDeferred { thread, node, occ } => {
                let i = st.deferred.iter().position(|d| d.occ.seq == *occ).expect("deferred");
                let d = st.deferred.remove(i);
                st.threads.get_mut(thread).expect("thread").routed.push((node.clone(), d.occ));
            }
            MicroStep::RunAction { thread: ThreadId::Do(v), node } => {
                let v = *v;
                let body = self.body(st.threads.get(&v).map(|t| t.activity.as_str()));
                let kind = &node_at(body, node).kind;
                if let NodeKind::Accept { .. } = kind {
                    let t = st.threads.get_mut(&v).unwrap();
                    let i = t.routed.iter().position(|(p, _)| p == node).expect("routed");
                    t.routed.remove(i);
                } else {
                    self.exec_node(st, kind, fx);
                }
                let t = st.threads.get_mut(&v).unwrap();
                let exec = t.exec.as_mut().unwrap();
                if matches!(kind, NodeKind::Final) {
                    exec.terminate();
                    t.routed.clear();
                    st.accepters.retain(|a| a.thread != v);
                } else {
                    exec.advance(body, node);
                }
            }
            MicroStep::RunAction { thread: ThreadId::Leg(r), node }
            | MicroStep::RunEffectAction { thread: ThreadId::Leg(r), node, .. }
            | MicroStep::RunExitBehaviorAction { thread: ThreadId::Leg(r), node, .. } => {
                let r = *r;
                let Some(LegOp::Behavior(p)) = st.legs[&r].plan.front().cloned() else { unreachable!() };
                let body = self.body(self.purpose_activity(p));
                let kind = &node_at(body, node).kind;
                self.exec_node(st, kind, fx);
                let exec = st.legs.get_mut(&r).unwrap().exec.as_mut().unwrap();
                if matches!(kind, NodeKind::Final) {
                    exec.terminate();
                } else {
                    exec.advance(body, node);
                }
            }
            other => unreachable!("step not produced by enabled_steps: {other:?}"),
        }
    }

    fn exec_node(&self, st: &mut RuntimeState, kind: &NodeKind, fx: &mut StepEffect) {
        match kind {
            NodeKind::Task { assign: Some(a), .. } => {
                let base = match &a.source {
                    Operand::Var(v) => st.vars.get(v).copied().unwrap_or(0),
                    Operand::Lit(i) => *i,
                };
                st.vars.insert(a.target.clone(), base.wrapping_add(a.delta));
            }
            NodeKind::Send { signal, dest: Destination::Env } => fx.output = Some(signal.clone()),
            NodeKind::Send { signal, dest: Destination::SelfTarget } => {
                let seq = st.fresh_seq();
                st.in_flight.push(Occurrence { seq, kind: OccKind::Signal(signal.clone()), released: false });
            }
            _ => {}
        }
    }

    fn pop_leg(&self, st: &mut RuntimeState, v: VId) {
        let r = self.model.vertices[v].region;
        st.legs.get_mut(&r).expect("leg for region").plan.pop_front();
    }

    /// Runs every internal bookkeeping op (plan expansion, forks, joins,
    /// skipped no-op steps) and closes the RTC step when nothing is left.
    fn settle(&self, st: &mut RuntimeState) {
        loop {
            let mut changed = false;
            let regions: Vec<RId> = st.legs.keys().copied().collect();
            for r in regions {
                changed |= self.settle_leg(st, r);
            }
            if !changed {
                break;
            }
        }
        if st.rtc_active && st.legs.is_empty() && st.pending.is_none() && !st.config.keys().any(|&v| self.completion_enabled(st, v)) {
            st.rtc_active = false;
        }
    }

    fn settle_leg(&self, st: &mut RuntimeState, r: RId) -> bool {
        let m = &self.model;
        let mut changed = false;
        loop {
            let Some(leg) = st.legs.get(&r) else { return changed };
            let Some(op) = leg.plan.front().cloned() else {
                st.legs.remove(&r);
                return true;
            };
            let mut push: Vec<LegOp> = Vec::new();
            match op {
                LegOp::Exit(v) => {
                    let info = &m.vertices[v];
                    if info.kind == VKind::State {
                        if !info.regions.is_empty() {
                            push.push(LegOp::SpawnExitChildren(v));
                        }
                        push.push(LegOp::ExitState(v));
                        push.push(LegOp::ReleaseDeferred(v));
                        if info.do_activity.is_some() {
                            push.push(LegOp::AbortDoActivity(v));
                        }
                        if info.exit.is_some() {
                            push.push(LegOp::Behavior(Purpose::Exit(v)));
                        }
                    } else {
                        push.push(LegOp::ExitState(v));
                    }
                }
                LegOp::Enter(v) => {
                    let info = &m.vertices[v];
                    push.push(LegOp::EnterState(v));
                    if info.kind == VKind::State {
                        if info.entry.is_some() {
                            push.push(LegOp::Behavior(Purpose::Entry(v)));
                        }
                        push.push(LegOp::EntryDone(v));
                        if !info.regions.is_empty() {
                            push.push(LegOp::Fork(v));
                        }
                        if info.do_activity.is_some() {
                            push.push(LegOp::StartDoActivity(v));
                        }
                    }
                }
                LegOp::SpawnExitChildren(v) => {
                    let subs = m.vertices[v].regions.clone();
                    for &sr in &subs {
                        if let Some(a) = self.active_in(st, sr) {
                            st.legs.insert(sr, Leg { plan: VecDeque::from([LegOp::Exit(a)]), exec: None });
                        }
                    }
                    push.push(LegOp::Join(subs));
                }
                LegOp::Join(rs) => {
                    if rs.iter().any(|x| st.legs.contains_key(x)) {
                        return changed;
                    }
                }
                LegOp::ReleaseDeferred(v) => {
                    if st.deferred.iter().any(|d| d.by_state == v) {
                        return changed;
                    }
                }
                LegOp::AbortDoActivity(v) => {
                    if let Some(t) = st.threads.get(&v) {
                        if !self.thread_done(t) {
                            return changed;
                        }
                        st.threads.remove(&v);
                        st.accepters.retain(|a| a.thread != v);
                    }
                }
                LegOp::Behavior(p) => {
                    let body = self.body(self.purpose_activity(p));
                    let leg = st.legs.get_mut(&r).unwrap();
                    match &leg.exec {
                        None => {
                            let e = Exec::new(body);
                            if !e.done(body) {
                                leg.exec = Some(e);
                                changed = true;
                                continue;
                            }
                        }
                        Some(e) if e.done(body) => leg.exec = None,
                        Some(_) => return changed,
                    }
                }
                LegOp::EntryDone(v) => {
                    if st.config.get(&v) == Some(&Status::Entering) {
                        st.config.insert(v, Status::EntryDone);
                    }
                }
                LegOp::Fork(v) => {
                    for &sr in &m.vertices[v].regions {
                        st.legs.insert(sr, self.initial_leg(sr));
                    }
                }
                LegOp::ExitState(_) | LegOp::EnterState(_) | LegOp::StartDoActivity(_) => return changed,
            }
            let plan = &mut st.legs.get_mut(&r).unwrap().plan;
            plan.pop_front();
            for op in push.into_iter().rev() {
                plan.push_front(op);
            }
            changed = true;
        }
    }

    pub fn thread_name(&self, t: &ThreadId) -> String {
        match t {
            ThreadId::Dispatcher => "sm".into(),
            ThreadId::Leg(r) => format!("leg:{}", self.model.regions[*r].path),
            ThreadId::Do(v) => format!("do:{}", self.model.vertices[*v].path),
            ThreadId::Transport => "net".into(),
        }
    }

    pub fn render_occ(&self, o: &Occurrence) -> String {
        match &o.kind {
            OccKind::Signal(s) => format!("{s}#{}", o.seq),
            OccKind::Completion(v) => format!("completion({})#{}", self.model.vertices[*v].path, o.seq),
            OccKind::Invocation => format!("invocation#{}", o.seq),
        }
    }

    fn find_occ<'a>(&self, st: &'a RuntimeState, seq: u64) -> Option<&'a Occurrence> {
        let pending = match &st.pending {
            Some(Pending::Choose { occ, .. }) | Some(Pending::Discard(occ)) | Some(Pending::Defer { occ, .. }) => Some(occ),
            None => None,
        };
        pending
            .into_iter()
            .chain(st.pool.completion_front.iter())
            .chain(st.pool.regular.iter())
            .chain(st.in_flight.iter())
            .chain(st.deferred.iter().map(|d| &d.occ))
            .find(|o| o.seq == seq)
    }

    fn occ_label(&self, st: &RuntimeState, seq: u64) -> String {
        self.find_occ(st, seq).map(|o| self.render_occ(o)).unwrap_or_else(|| format!("#{seq}"))
    }

    fn node_label(&self, activity: Option<&str>, node: &NodePath) -> String {
        let body = self.body(activity);
        let text = match &node_at(body, node).kind {
            NodeKind::Task { label, assign } => {
                let mut s = label.clone().map(|l| format!("task {l}")).unwrap_or_default();
                if let Some(a) = assign {
                    let src = match &a.source {
                        Operand::Var(v) => v.clone(),
                        Operand::Lit(i) => i.to_string(),
                    };
                    if !s.is_empty() {
                        s.push(' ');
                    }
                    s.push_str(&format!("{}:={src}", a.target));
                    if a.delta != 0 {
                        s.push_str(&format!("{:+}", a.delta));
                    }
                }
                s
            }
            NodeKind::Send { signal, dest } => {
                format!("send {signal} to {}", if *dest == Destination::Env { "env" } else { "self" })
            }
            NodeKind::Accept { signals } => format!("accept {}", signals.join("|")),
            NodeKind::Par { .. } => "par".into(),
            NodeKind::Final => "final".into(),
        };
        format!("{}@{} {text}", activity.unwrap_or("?"), render_path(node))
    }

    /// `(thread, kind, payload)` of `choice` as taken from state `st`.
    pub fn render_choice(&self, st: &RuntimeState, choice: &Choice) -> (String, String, String) {
        let m = &self.model;
        let path = |v: &VId| m.vertices[*v].path.clone();
        let step = match choice {
            Choice::Inject(sig) => return ("env".into(), "Inject".into(), sig.clone()),
            Choice::Step(s) => s,
        };
        let (thread, payload) = match step {
            MicroStep::DispatchEvent { occ } | MicroStep::DiscardEvent { occ } => (ThreadId::Dispatcher, self.occ_label(st, *occ)),
            MicroStep::DeferEvent { occ, by_state } => (ThreadId::Dispatcher, format!("{} by {}", self.occ_label(st, *occ), path(by_state))),
            MicroStep::ChooseAccepter { occ, accepter } => {
                let target = match accepter {
                    AccepterRef::StateMachine => "sm".to_string(),
                    AccepterRef::DoActivity { thread, node } => format!("do:{}@{}", path(thread), render_path(node)),
                };
                (ThreadId::Dispatcher, format!("{} -> {target}", self.occ_label(st, *occ)))
            }
            MicroStep::GenerateCompletion { state } => (ThreadId::Dispatcher, path(state)),
            MicroStep::DeliverInFlight { occ } => (ThreadId::Transport, self.occ_label(st, *occ)),
            MicroStep::ExitState { state }
            | MicroStep::EnterState { state }
            | MicroStep::StartDoActivity { state }
            | MicroStep::AbortDoActivity { state } => (ThreadId::Leg(m.vertices[*state].region), path(state)),
            MicroStep::ReleaseDeferred { state } => {
                let occs: Vec<String> = st.deferred.iter().filter(|d| d.by_state == *state).map(|d| self.render_occ(&d.occ)).collect();
                (ThreadId::Leg(m.vertices[*state].region), format!("{} [{}]", path(state), occs.join(",")))
            }
            MicroStep::InitialDoRtc { thread } => (ThreadId::Do(*thread), st.threads[thread].activity.clone()),
            MicroStep::RegisterDoAccept { thread, node } => {
                (ThreadId::Do(*thread), self.node_label(Some(&st.threads[thread].activity), node))
            }
            MicroStep::ConsumeDeferred { thread, node, occ } => (
                ThreadId::Do(*thread),
                format!("{} {}", self.node_label(Some(&st.threads[thread].activity), node), self.occ_label(st, *occ)),
            ),
            MicroStep::RunAction { thread, node } => {
                let (owner, activity) = match thread {
                    ThreadId::Do(v) => (path(v), st.threads.get(v).map(|t| t.activity.clone())),
                    ThreadId::Leg(r) => match st.legs.get(r).and_then(|l| l.plan.front()) {
                        Some(LegOp::Behavior(Purpose::Entry(v))) => (path(v), m.vertices[*v].entry.clone()),
                        _ => ("?".into(), None),
                    },
                    _ => ("?".into(), None),
                };
                (thread.clone(), format!("{owner} {}", self.node_label(activity.as_deref(), node)))
            }
            MicroStep::RunEffectAction { thread, transition, node } => (
                thread.clone(),
                format!("{} {}", m.transitions[*transition].name, self.node_label(m.transitions[*transition].effect.as_deref(), node)),
            ),
            MicroStep::RunExitBehaviorAction { thread, state, node } => {
                (thread.clone(), format!("{} {}", path(state), self.node_label(m.vertices[*state].exit.as_deref(), node)))
            }
        };
        (self.thread_name(&thread), step.kind().to_string(), payload)
    }

    /// Active state tree, e.g. `Active[Wait1,Wait2]`.
    pub fn render_config(&self, st: &RuntimeState) -> String {
        let parts: Vec<String> = self.model.root_regions.iter().filter_map(|&r| self.render_region(st, r)).collect();
        parts.join(",")
    }

    fn render_region(&self, st: &RuntimeState, r: RId) -> Option<String> {
        let v = self.active_in(st, r)?;
        let info = &self.model.vertices[v];
        let subs: Vec<String> = info.regions.iter().filter_map(|&sr| self.render_region(st, sr)).collect();
        Some(if subs.is_empty() { info.name.clone() } else { format!("{}[{}]", info.name, subs.join(",")) })
    }
}
