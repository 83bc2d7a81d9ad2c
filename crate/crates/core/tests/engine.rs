mod common;

use std::ops::ControlFlow;

use common::{load, CORPUS};
use proptest::prelude::*;
use psm_core::engine::{
    check_config, check_trace, check_transition, run, run_observed, Engine, EngineError, EngineOptions, Outcome, RunOptions,
    Strategy,
};
use psm_core::explorer::{for_each_path, ExploreOptions};
use psm_core::parser::{parse_model, parse_scenario, Scenario};

fn seeded(seed: u64) -> RunOptions {
    RunOptions { strategy: Strategy::Random { seed }, ..RunOptions::default() }
}

#[test]
fn seed_seven_walks_the_measuring_configurations() {
    let (m, sc) = load("measuring", "measuring");
    let t = run(&m, &sc, &seeded(7)).unwrap();
    assert_eq!(t.outcome, Outcome::Terminal);
    assert_eq!(
        t.stable_configs(),
        ["Standby", "Active[Wait1,Wait2]", "Active[MeasureTemp,MeasureGravity]", "Active[Wait1,Wait2]"]
    );
}

#[test]
fn empty_scenario_runs_only_the_initial_step() {
    let m = common::model("measuring");
    let t = run(&m, &Scenario::default(), &seeded(1)).unwrap();
    assert_eq!(t.outcome, Outcome::Terminal);
    assert!(t.records.iter().all(|r| r.kind != "Inject" && r.kind != "DispatchEvent"));
    assert_eq!(t.records.last().unwrap().config, "Standby");
    assert!(t.records.last().unwrap().stable);
}

#[test]
fn equal_seeds_give_equal_bytes() {
    for (name, scn) in CORPUS {
        let (m, sc) = load(name, scn);
        let a = run(&m, &sc, &seeded(42)).unwrap();
        let b = run(&m, &sc, &seeded(42)).unwrap();
        assert_eq!(a.to_text(), b.to_text(), "{name}");
        assert_eq!(a.to_json(), b.to_json(), "{name}");
    }
}

#[test]
fn a_script_reproduces_its_run() {
    let (m, sc) = load("pattern_p10", "pattern_p10");
    let t = run(&m, &sc, &seeded(3)).unwrap();
    let opts = RunOptions { strategy: Strategy::Scripted(t.script()), ..RunOptions::default() };
    let again = run(&m, &sc, &opts).unwrap();
    assert_eq!(again.records, t.records);
    assert_eq!(again.outcome, t.outcome);
}

#[test]
fn a_wrong_script_entry_reports_its_index() {
    let (m, sc) = load("pattern_p1", "pattern_p1");
    let mut script = run(&m, &sc, &seeded(0)).unwrap().script();
    script[2] = "sm DispatchEvent nothing#9".into();
    let err = run(&m, &sc, &RunOptions { strategy: Strategy::Scripted(script), ..RunOptions::default() }).unwrap_err();
    assert!(matches!(err, EngineError::Divergence { index: 2, .. }), "{err:?}");
}

#[test]
fn a_short_script_exhausts_the_strategy() {
    let (m, sc) = load("pattern_p1", "pattern_p1");
    let mut script = run(&m, &sc, &seeded(0)).unwrap().script();
    script.truncate(3);
    let t = run(&m, &sc, &RunOptions { strategy: Strategy::Scripted(script), ..RunOptions::default() }).unwrap();
    assert_eq!(t.outcome, Outcome::StrategyExhausted);
    assert_eq!(t.records.len(), 3);
}

#[test]
fn budget_ends_long_runs() {
    let (m, sc) = load("measuring", "measuring");
    let t = run(&m, &sc, &RunOptions { max_steps: 5, ..seeded(0) }).unwrap();
    assert_eq!(t.outcome, Outcome::BudgetExceeded);
    assert_eq!(t.records.len(), 5);
}

#[test]
fn unknown_injected_signal_is_refused() {
    let m = common::model("pattern_p1");
    let err = run(&m, &Scenario::injects(&["nope"]), &seeded(0)).unwrap_err();
    assert_eq!(err, EngineError::UnknownSignal("nope".into()));
}

#[test]
fn conflicting_transitions_are_rejected() {
    let text = "machine M { signals e; region R { initial -> A; state A; state B;
        transition T1: A -> B on e; transition T2: A -> A on e; } }";
    let errs = parse_model(text).unwrap_err();
    assert!(errs.iter().any(|e| e.to_string().contains("`T1` and `T2`")), "{errs:?}");
}

#[test]
fn self_signal_travels_through_the_transport() {
    let (m, sc) = load("measuring", "measuring");
    let t = run(&m, &sc, &seeded(7)).unwrap();
    let delivered = t.records.iter().position(|r| r.kind == "DeliverInFlight" && r.payload.starts_with("tempCompleted#"));
    assert_eq!(t.records[delivered.expect("delivery")].thread, "net");
}

/// A do-activity still waiting in one parallel branch keeps its state
/// incomplete even after the other branch is done. The barrier lets the
/// accepter register before `e1` arrives.
#[test]
fn open_accept_branch_holds_back_completion() {
    let text = "machine M { signals e1, got, left;
        region R { initial -> S; state S { do work; } state D;
          transition Tc: S -> D / logLeft; }
        activity work { par { accept e1; send got to env; } and { task t; } }
        activity logLeft { send left to env; } }";
    let m = parse_model(text).unwrap();
    let sc = parse_scenario("await-stable;\ninject e1;\n", &m).unwrap();
    let mut seen = 0;
    let walk = for_each_path(&m, &sc, ExploreOptions::full(), |t| {
        seen += 1;
        let accepted = t.records.iter().position(|r| r.thread == "do:S" && r.payload.ends_with("accept e1"));
        let completed = t.records.iter().position(|r| r.kind == "GenerateCompletion");
        match (accepted, completed) {
            (Some(a), Some(c)) => assert!(a < c, "completion at {c} before acceptance at {a}"),
            (None, Some(c)) => panic!("completion at {c} without acceptance"),
            _ => {}
        }
        assert_eq!(t.outcome, Outcome::Terminal);
        assert_eq!(t.outputs(), ["got", "left"]);
        ControlFlow::Continue(())
    })
    .unwrap();
    assert!(walk.exhaustive && seen > 1);
}

#[test]
fn any_order_dispatch_reaches_both_orders() {
    let text = "machine M { signals a, b, oa, ob;
        region R { initial -> S; state S;
          internal Ta: S on a / la; internal Tb: S on b / lb; }
        activity la { send oa to env; } activity lb { send ob to env; } }";
    let m = parse_model(text).unwrap();
    let sc = Scenario::injects(&["a", "b"]);
    let mut orders = std::collections::BTreeSet::new();
    for seed in 0..64 {
        let opts = RunOptions { engine: EngineOptions { fifo: false }, ..seeded(seed) };
        orders.insert(run(&m, &sc, &opts).unwrap().outputs());
    }
    assert_eq!(orders.len(), 2);
    let fifo: std::collections::BTreeSet<_> = (0..64).map(|s| run(&m, &sc, &seeded(s)).unwrap().outputs()).collect();
    assert_eq!(fifo.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Every step keeps the configuration valid and every safety property
    /// holds, per step and over the whole history.
    #[test]
    fn random_runs_keep_invariants(pick in 0usize..CORPUS.len(), seed in any::<u64>(), fifo in any::<bool>()) {
        let (name, scn) = CORPUS[pick];
        let (m, sc) = load(name, scn);
        let engine = Engine::new(&m, EngineOptions { fifo }).unwrap();
        let opts = RunOptions { engine: EngineOptions { fifo }, ..seeded(seed) };
        let mut bad = vec![];
        let t = run_observed(&engine, &sc, &opts, &mut |pre, c, post| {
            bad.extend(check_transition(&engine, pre, c, post));
            bad.extend(check_config(&engine, post));
        }).unwrap();
        bad.extend(check_trace(&t));
        prop_assert!(bad.is_empty(), "{name} seed {seed}: {bad:?}");
        prop_assert!(t.outcome != Outcome::Deadlock, "{name} seed {seed} deadlocked");
    }

    /// Records serialize and parse back to themselves.
    #[test]
    fn traces_round_trip_through_json(pick in 0usize..CORPUS.len(), seed in any::<u64>()) {
        let (name, scn) = CORPUS[pick];
        let (m, sc) = load(name, scn);
        let t = run(&m, &sc, &seeded(seed)).unwrap();
        prop_assert_eq!(psm_core::engine::Trace::from_json(&t.to_json()).unwrap(), t);
    }
}
