//! Test support shared by the integration targets: fixture loading, a
//! random flat-machine generator and an independent brute-force reference
//! interpreter for flat machines.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use psm_core::model::MachineModel;
use psm_core::parser::{parse_model, parse_scenario, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

pub fn read_fixture(file: &str) -> String {
    std::fs::read_to_string(fixture_path(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn model(name: &str) -> MachineModel {
    parse_model(&read_fixture(&format!("{name}.psm"))).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

pub fn scenario(scn: &str, m: &MachineModel) -> Scenario {
    parse_scenario(&read_fixture(&format!("{scn}.scn")), m).unwrap_or_else(|e| panic!("{scn}: {e:?}"))
}

/// A fixture model with its scenario.
pub fn load(name: &str, scn: &str) -> (MachineModel, Scenario) {
    let m = model(name);
    let s = scenario(scn, &m);
    (m, s)
}

/// Every fixture model paired with its scenario.
pub const CORPUS: &[(&str, &str)] = &[
    ("measuring", "measuring"),
    ("defer_case_a", "defer_case"),
    ("defer_case_a_ortho", "defer_case"),
    ("defer_case_b", "defer_case"),
    ("defer_case_b_nested", "defer_case"),
    ("completion", "completion"),
    ("completion", "completion_open"),
    ("release_order", "release_order"),
    ("pattern_p1", "pattern_p1"),
    ("pattern_p2", "pattern_p2"),
    ("pattern_p3", "pattern_p3"),
    ("pattern_p4", "pattern_p4"),
    ("pattern_p5", "pattern_p5"),
    ("pattern_p6", "pattern_p6"),
    ("pattern_p7", "pattern_p7"),
    ("pattern_p8", "pattern_p8"),
    ("pattern_p9", "pattern_p9"),
    ("pattern_p10", "pattern_p10"),
    ("pattern_p11", "pattern_p11"),
];

// Flat machines: one region, no do-activities, no defer, one variable `x`.

pub const INPUTS: &[&str] = &["a", "b", "c"];
pub const OUTPUTS: &[&str] = &["o0", "o1", "o2", "o3"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Send(usize),
    Set(i64),
    Inc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl Cmp {
    fn holds(self, x: i64, v: i64) -> bool {
        match self {
            Cmp::Eq => x == v,
            Cmp::Ne => x != v,
            Cmp::Lt => x < v,
            Cmp::Gt => x > v,
        }
    }

    fn text(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlatTransition {
    pub source: usize,
    pub target: usize,
    /// `None` is a completion transition.
    pub trigger: Option<usize>,
    pub internal: bool,
    pub guard: Option<(Cmp, i64)>,
    pub effect: Vec<Action>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlatStep {
    Inject(usize),
    AwaitStable,
}

#[derive(Clone, Debug)]
pub struct FlatMachine {
    pub states: usize,
    pub entry: Vec<Vec<Action>>,
    pub exit: Vec<Vec<Action>>,
    pub transitions: Vec<FlatTransition>,
    pub scenario: Vec<FlatStep>,
}

fn actions(rng: &mut ChaCha8Rng) -> Vec<Action> {
    let n = rng.gen_range(1..=2);
    (0..n)
        .map(|_| match rng.gen_range(0..6) {
            0..=3 => Action::Send(rng.gen_range(0..OUTPUTS.len())),
            4 => Action::Set(rng.gen_range(0..3)),
            _ => Action::Inc,
        })
        .collect()
}

fn maybe_actions(rng: &mut ChaCha8Rng, p: f64) -> Vec<Action> {
    if rng.gen_bool(p) {
        actions(rng)
    } else {
        vec![]
    }
}

/// A random flat machine with at most 6 states and 10 transitions. Each
/// (source, trigger) pair is used once; completion transitions only go to
/// higher-numbered states, so completion chains end.
pub fn gen_flat(seed: u64) -> FlatMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = rng.gen_range(1..=6);
    let entry = (0..states).map(|_| maybe_actions(&mut rng, 0.4)).collect();
    let exit = (0..states).map(|_| maybe_actions(&mut rng, 0.3)).collect();
    let mut slots: Vec<(usize, Option<usize>)> = vec![];
    for s in 0..states {
        for t in 0..INPUTS.len() {
            slots.push((s, Some(t)));
        }
        if s + 1 < states {
            slots.push((s, None));
        }
    }
    let want = rng.gen_range(slots.len().min(2)..=10usize.min(slots.len()));
    let mut transitions = vec![];
    for _ in 0..want {
        let (source, trigger) = slots.swap_remove(rng.gen_range(0..slots.len()));
        let internal = trigger.is_some() && rng.gen_bool(0.2);
        let target = match trigger {
            None => rng.gen_range(source + 1..states),
            Some(_) if internal => source,
            Some(_) => rng.gen_range(0..states),
        };
        let guard = rng.gen_bool(0.3).then(|| {
            let op = [Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Gt][rng.gen_range(0..4)];
            (op, rng.gen_range(0..3))
        });
        let effect = maybe_actions(&mut rng, if internal { 1.0 } else { 0.8 });
        transitions.push(FlatTransition { source, target, trigger, internal, guard, effect });
    }
    let steps = rng.gen_range(1..=5);
    let mut scenario = vec![];
    for i in 0..steps {
        if i > 0 && rng.gen_bool(0.2) {
            scenario.push(FlatStep::AwaitStable);
        }
        scenario.push(FlatStep::Inject(rng.gen_range(0..INPUTS.len())));
    }
    FlatMachine { states, entry, exit, transitions, scenario }
}

fn action_text(a: &Action) -> String {
    match a {
        Action::Send(o) => format!("send {} to env;", OUTPUTS[*o]),
        Action::Set(v) => format!("x := {v};"),
        Action::Inc => "x := x + 1;".into(),
    }
}

impl FlatMachine {
    pub fn to_dsl(&self) -> String {
        let mut s = String::from("machine Flat {\n");
        s.push_str(&format!("  signals {}, {};\n  vars x;\n  region Main {{\n    initial -> S0;\n", INPUTS.join(", "), OUTPUTS.join(", ")));
        let mut acts: Vec<(String, &Vec<Action>)> = vec![];
        for i in 0..self.states {
            let mut body = String::new();
            if !self.entry[i].is_empty() {
                body.push_str(&format!(" entry en{i};"));
                acts.push((format!("en{i}"), &self.entry[i]));
            }
            if !self.exit[i].is_empty() {
                body.push_str(&format!(" exit ex{i};"));
                acts.push((format!("ex{i}"), &self.exit[i]));
            }
            if body.is_empty() {
                s.push_str(&format!("    state S{i};\n"));
            } else {
                s.push_str(&format!("    state S{i} {{{body} }}\n"));
            }
        }
        for (k, t) in self.transitions.iter().enumerate() {
            let head = if t.internal {
                format!("    internal T{k}: S{}", t.source)
            } else {
                format!("    transition T{k}: S{} -> S{}", t.source, t.target)
            };
            s.push_str(&head);
            if let Some(trig) = t.trigger {
                s.push_str(&format!(" on {}", INPUTS[trig]));
            }
            if let Some((op, v)) = t.guard {
                s.push_str(&format!(" [x {} {v}]", op.text()));
            }
            if !t.effect.is_empty() {
                s.push_str(&format!(" / fx{k}"));
                acts.push((format!("fx{k}"), &t.effect));
            }
            s.push_str(";\n");
        }
        s.push_str("  }\n");
        for (name, body) in acts {
            let text: Vec<String> = body.iter().map(action_text).collect();
            s.push_str(&format!("  activity {name} {{ {} }}\n", text.join(" ")));
        }
        s.push_str("}\n");
        s
    }

    pub fn scenario_text(&self) -> String {
        self.scenario
            .iter()
            .map(|st| match st {
                FlatStep::Inject(i) => format!("inject {};\n", INPUTS[*i]),
                FlatStep::AwaitStable => "await-stable;\n".into(),
            })
            .collect()
    }

    pub fn parse(&self) -> (MachineModel, Scenario) {
        let text = self.to_dsl();
        let m = parse_model(&text).unwrap_or_else(|e| panic!("generated model rejected: {e:?}\n{text}"));
        let sc = parse_scenario(&self.scenario_text(), &m).expect("generated scenario");
        (m, sc)
    }

    fn has_completion(&self, s: usize) -> bool {
        self.transitions.iter().any(|t| t.source == s && t.trigger.is_none())
    }
}

#[derive(Clone)]
struct Snap {
    state: usize,
    x: i64,
    queue: Vec<usize>,
    completion: bool,
    next: usize,
    out: Vec<String>,
}

fn perform(acts: &[Action], s: &mut Snap) {
    for a in acts {
        match a {
            Action::Send(o) => s.out.push(OUTPUTS[*o].to_string()),
            Action::Set(v) => s.x = *v,
            Action::Inc => s.x += 1,
        }
    }
}

fn fire(m: &FlatMachine, t: &FlatTransition, s: &mut Snap) {
    if t.internal {
        perform(&t.effect, s);
        return;
    }
    perform(&m.exit[s.state], s);
    perform(&t.effect, s);
    s.state = t.target;
    perform(&m.entry[t.target], s);
    s.completion = m.has_completion(t.target);
}

/// One whole run-to-completion step for `trigger` (`None` = completion).
fn rtc(m: &FlatMachine, trigger: Option<usize>, s: &mut Snap) {
    let t = m.transitions.iter().find(|t| {
        t.source == s.state && t.trigger == trigger && t.guard.map_or(true, |(op, v)| op.holds(s.x, v))
    });
    if let Some(t) = t {
        fire(m, t, s);
    }
}

fn search(m: &FlatMachine, fifo: bool, s: Snap, found: &mut BTreeSet<Vec<String>>) {
    let mut moved = false;
    match m.scenario.get(s.next) {
        Some(FlatStep::Inject(sig)) => {
            let mut n = s.clone();
            n.queue.push(*sig);
            n.next += 1;
            search(m, fifo, n, found);
            moved = true;
        }
        Some(FlatStep::AwaitStable) if s.queue.is_empty() && !s.completion => {
            let mut n = s.clone();
            n.next += 1;
            search(m, fifo, n, found);
            moved = true;
        }
        _ => {}
    }
    if s.completion {
        let mut n = s.clone();
        n.completion = false;
        rtc(m, None, &mut n);
        search(m, fifo, n, found);
        return;
    }
    let picks: Vec<usize> = if fifo {
        (0..s.queue.len().min(1)).collect()
    } else {
        let mut seen = BTreeSet::new();
        (0..s.queue.len()).filter(|&i| seen.insert(s.queue[i])).collect()
    };
    for i in picks {
        let mut n = s.clone();
        let sig = n.queue.remove(i);
        rtc(m, Some(sig), &mut n);
        search(m, fifo, n, found);
        moved = true;
    }
    if !moved {
        found.insert(s.out);
    }
}

/// Every environment output sequence of `m` under its scenario, computed
/// by enumerating inject and dispatch orders over atomic RTC steps.
pub fn oracle(m: &FlatMachine, fifo: bool) -> BTreeSet<Vec<String>> {
    let mut s = Snap { state: 0, x: 0, queue: vec![], completion: false, next: 0, out: vec![] };
    perform(&m.entry[0], &mut s);
    s.completion = m.has_completion(0);
    let mut found = BTreeSet::new();
    search(m, fifo, s, &mut found);
    found
}
