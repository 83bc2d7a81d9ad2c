//! Safety properties, checked per step on states and after the fact on
//! recorded traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::NodeKind;

use super::compile::VKind;
use super::exec::node_at;
use super::state::*;
use super::trace::Trace;
use super::{Choice, Engine, MicroStep, ThreadId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub detail: String,
}

fn v(inv: &str, detail: String) -> Violation {
    Violation { invariant: inv.to_string(), detail }
}

/// Checks one transition `pre --choice--> post`.
pub fn check_transition(engine: &Engine, pre: &RuntimeState, choice: &Choice, post: &RuntimeState) -> Vec<Violation> {
    let m = &engine.model;
    let mut out = Vec::new();
    if let Choice::Step(step) = choice {
        match step {
            MicroStep::DispatchEvent { occ } => {
                if pre.rtc_active {
                    out.push(v("rtc-exclusivity", format!("dispatch of #{occ} inside an RTC step")));
                }
                let is_completion = pre.pool.completion_front.iter().any(|o| o.seq == *occ);
                if !is_completion && !pre.pool.completion_front.is_empty() {
                    out.push(v("completion-front", format!("signal #{occ} dispatched before a queued completion")));
                }
                let dispatched = pre.pool.regular.iter().find(|o| o.seq == *occ);
                if dispatched.is_some_and(|o| !o.released) && pre.pool.regular.iter().any(|o| o.released) {
                    out.push(v("release-order", format!("#{occ} dispatched ahead of released deferred occurrences")));
                }
            }
            MicroStep::RunExitBehaviorAction { state, .. } => {
                if pre.threads.contains_key(state) {
                    out.push(v("abort-before-exit", format!("exit behavior of {} runs with its do-activity alive", m.vertices[*state].path)));
                }
            }
            MicroStep::StartDoActivity { state } => {
                if !matches!(pre.config.get(state), Some(s) if *s != Status::Entering) {
                    out.push(v("entry-before-do", format!("do-activity of {} started before entry finished", m.vertices[*state].path)));
                }
            }
            MicroStep::RunAction { thread: ThreadId::Do(t), node } => {
                if let Some(th) = pre.threads.get(t) {
                    let body = &m.activity(&th.activity).expect("activity").body;
                    if matches!(node_at(body, node).kind, NodeKind::Accept { .. }) && !th.routed.iter().any(|(p, _)| p == node) {
                        out.push(v("two-phase", format!("do:{} accepted without a routed occurrence", m.vertices[*t].path)));
                    }
                }
            }
            _ => {}
        }
    }
    out.extend(check_config(engine, post));
    out
}

/// Every active vertex sits in an active parent; at most one per region.
pub fn check_config(engine: &Engine, st: &RuntimeState) -> Vec<Violation> {
    let m = &engine.model;
    let mut out = Vec::new();
    let mut per_region: BTreeMap<usize, usize> = BTreeMap::new();
    for &vid in st.config.keys() {
        let info = &m.vertices[vid];
        if info.kind == VKind::Initial {
            out.push(v("configuration", "initial pseudostate is active".into()));
        }
        if let Some(p) = info.parent {
            if !st.config.contains_key(&p) {
                out.push(v("configuration", format!("{} active without its parent", info.path)));
            }
        }
        *per_region.entry(info.region).or_default() += 1;
    }
    for (r, n) in per_region {
        if n > 1 {
            out.push(v("configuration", format!("region {} has {n} active vertices", m.regions[r].path)));
        }
    }
    out
}

/// History checks over a recorded trace.
pub fn check_trace(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut routes: BTreeMap<String, i64> = BTreeMap::new();
    let mut do_started: BTreeMap<String, bool> = BTreeMap::new();
    let mut exiting: BTreeMap<String, bool> = BTreeMap::new();
    let mut prev_rtc = true;
    let mut prev_completion = false;
    for r in &trace.records {
        let state = r.payload.split(' ').next().unwrap_or("").to_string();
        match r.kind.as_str() {
            "DispatchEvent" => {
                if prev_rtc {
                    out.push(v("rtc-exclusivity", format!("record {} dispatches inside an RTC step", r.index)));
                }
                if prev_completion && !r.payload.starts_with("completion(") {
                    out.push(v("completion-front", format!("record {} dispatches a signal before a completion", r.index)));
                }
            }
            "ChooseAccepter" => {
                if let Some((_, target)) = r.payload.split_once(" -> do:") {
                    *routes.entry(target.to_string()).or_default() += 1;
                }
            }
            "ConsumeDeferred" => {
                let at = r.payload.split(' ').next().unwrap_or("");
                let path = at.split_once('@').map(|x| x.1).unwrap_or("");
                *routes.entry(format!("{}@{path}", &r.thread["do:".len()..])).or_default() += 1;
            }
            "RunAction" if r.thread.starts_with("do:") => {
                let mut words = r.payload.split(' ');
                let owner = words.next().unwrap_or("");
                let at = words.next().unwrap_or("");
                if words.next() == Some("accept") {
                    let key = format!("{owner}@{}", at.split_once('@').map(|x| x.1).unwrap_or(""));
                    let n = routes.entry(key.clone()).or_default();
                    *n -= 1;
                    if *n < 0 {
                        out.push(v("two-phase", format!("record {} consumes at {key} without routing", r.index)));
                    }
                }
            }
            "RunAction" if r.thread.starts_with("leg:") => {
                if do_started.get(&state).copied().unwrap_or(false) {
                    out.push(v("entry-before-do", format!("record {}: entry of {state} runs after its do-activity started", r.index)));
                }
            }
            "StartDoActivity" => {
                do_started.insert(state.clone(), true);
            }
            "EnterState" => {
                do_started.insert(state.clone(), false);
                exiting.insert(state.clone(), false);
            }
            "RunExitBehaviorAction" => {
                exiting.insert(state.clone(), true);
            }
            "AbortDoActivity" => {
                if exiting.get(&state).copied().unwrap_or(false) {
                    out.push(v("abort-before-exit", format!("record {}: {state} aborted after its exit behavior began", r.index)));
                }
            }
            _ => {}
        }
        prev_rtc = r.rtc;
        prev_completion = !r.pool.completion.is_empty();
    }
    out
}
