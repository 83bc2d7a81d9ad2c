mod common;

use std::collections::BTreeSet;

use common::{gen_flat, oracle, FlatMachine};
use proptest::prelude::*;
use psm_core::engine::EngineOptions;
use psm_core::explorer::{explore_with, ExploreOptions};

fn engine_outputs(m: &FlatMachine, fifo: bool) -> BTreeSet<Vec<String>> {
    let (model, sc) = m.parse();
    let opts = ExploreOptions { engine: EngineOptions { fifo }, ..ExploreOptions::default() };
    let set = explore_with(&model, &sc, opts).expect("explore");
    assert_eq!(set.stats.truncated, 0, "bounds cut a flat path:\n{}", m.to_dsl());
    assert_eq!(set.stats.deadlocks, 0, "flat machine deadlocked:\n{}", m.to_dsl());
    set.observable_partition.keys().cloned().collect()
}

#[test]
fn oracle_sees_guard_and_completion_chain() {
    // S0 -c-> S1 completes into S2 only when x was set on the way.
    let text = "machine M { signals go, o; vars x;
        region Main { initial -> S0; state S0; state S1; state S2 { entry hello; }
          transition T0: S0 -> S1 on go / setX;
          transition T1: S1 -> S2 [x == 1]; }
        activity setX { x := 1; }
        activity hello { send o to env; } }";
    let model = psm_core::parser::parse_model(text).unwrap();
    let sc = psm_core::parser::Scenario::injects(&["go"]);
    let set = explore_with(&model, &sc, ExploreOptions::default()).unwrap();
    let got: Vec<_> = set.observable_partition.keys().cloned().collect();
    assert_eq!(got, vec![vec!["o".to_string()]]);
}

#[test]
fn nonfifo_dispatch_reaches_every_order() {
    let m = FlatMachine {
        states: 1,
        entry: vec![vec![]],
        exit: vec![vec![]],
        transitions: vec![
            common::FlatTransition {
                source: 0,
                target: 0,
                trigger: Some(0),
                internal: true,
                guard: None,
                effect: vec![common::Action::Send(0)],
            },
            common::FlatTransition {
                source: 0,
                target: 0,
                trigger: Some(1),
                internal: true,
                guard: None,
                effect: vec![common::Action::Send(1)],
            },
        ],
        scenario: vec![common::FlatStep::Inject(0), common::FlatStep::Inject(1)],
    };
    assert_eq!(oracle(&m, true).len(), 1);
    assert_eq!(oracle(&m, false).len(), 2);
    assert_eq!(engine_outputs(&m, false), oracle(&m, false));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn explorer_matches_oracle_fifo(seed in any::<u64>()) {
        let m = gen_flat(seed);
        prop_assert_eq!(engine_outputs(&m, true), oracle(&m, true), "{}", m.to_dsl());
    }

    #[test]
    fn explorer_matches_oracle_any_order(seed in any::<u64>()) {
        let m = gen_flat(seed);
        prop_assert_eq!(engine_outputs(&m, false), oracle(&m, false), "{}", m.to_dsl());
    }
}
