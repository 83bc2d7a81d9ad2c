use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::MachineModel;
use crate::parser::Scenario;

use super::state::RuntimeState;
use super::trace::{Outcome, PoolSnapshot, Trace, TraceRecord};
use super::{Choice, Engine, EngineError, EngineOptions};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Always the first enabled choice; injections sort last.
    First,
    /// Uniform choice from a ChaCha8 stream.
    Random { seed: u64 },
    /// Follows `thread kind payload` entries, failing on the first mismatch.
    Scripted(Vec<String>),
}

impl Strategy {
    pub fn describe(&self) -> String {
        match self {
            Strategy::First => "first".into(),
            Strategy::Random { seed } => format!("random:{seed}"),
            Strategy::Scripted(s) => format!("script:{}", s.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub strategy: Strategy,
    pub max_steps: usize,
    pub engine: EngineOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { strategy: Strategy::First, max_steps: 200, engine: EngineOptions::default() }
    }
}

/// Runs `scenario` on `model`, resolving every choice with the strategy.
pub fn run(model: &MachineModel, scenario: &Scenario, opts: &RunOptions) -> Result<Trace, EngineError> {
    let engine = Engine::new(model, opts.engine)?;
    run_observed(&engine, scenario, opts, &mut |_, _, _| {})
}

/// As [`run`], calling `observe(pre, choice, post)` after every step.
pub fn run_observed(
    engine: &Engine,
    scenario: &Scenario,
    opts: &RunOptions,
    observe: &mut dyn FnMut(&RuntimeState, &Choice, &RuntimeState),
) -> Result<Trace, EngineError> {
    for s in &scenario.steps {
        if let crate::parser::ScenarioStep::Inject(sig) = s {
            if !engine.model.is_signal(sig) {
                return Err(EngineError::UnknownSignal(sig.clone()));
            }
        }
    }
    let mut st = engine.initial_state();
    let mut rng = match opts.strategy {
        Strategy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut trace = Trace {
        model: engine.model.model.name.clone(),
        strategy: opts.strategy.describe(),
        max_steps: opts.max_steps,
        records: vec![],
        outcome: Outcome::Terminal,
    };
    loop {
        let choices = engine.enabled(&st, scenario);
        if choices.is_empty() {
            trace.outcome =
                if st.rtc_active || !engine.scenario_done(&st, scenario) { Outcome::Deadlock } else { Outcome::Terminal };
            break;
        }
        let i = trace.records.len();
        if i >= opts.max_steps {
            trace.outcome = Outcome::BudgetExceeded;
            break;
        }
        let pick = match &opts.strategy {
            Strategy::First => 0,
            Strategy::Random { .. } => rng.as_mut().unwrap().gen_range(0..choices.len()),
            Strategy::Scripted(script) => {
                let Some(want) = script.get(i) else {
                    trace.outcome = Outcome::StrategyExhausted;
                    break;
                };
                choices
                    .iter()
                    .position(|c| {
                        let (t, k, p) = engine.render_choice(&st, c);
                        format!("{t} {k} {p}") == *want
                    })
                    .ok_or_else(|| EngineError::Divergence { index: i, expected: want.clone() })?
            }
        };
        let choice = &choices[pick];
        let pre = st.clone();
        let rec = step_record(engine, &mut st, scenario, choice, i);
        observe(&pre, choice, &st);
        trace.records.push(rec);
    }
    Ok(trace)
}

/// Applies `choice` and describes it as a trace record.
pub fn step_record(engine: &Engine, st: &mut RuntimeState, scenario: &Scenario, choice: &Choice, index: usize) -> TraceRecord {
    let (thread, kind, payload) = engine.render_choice(st, choice);
    let fx = engine.apply_unchecked(st, scenario, choice);
    let pool = snapshot(engine, st);
    TraceRecord {
        index,
        thread,
        kind,
        payload,
        pool_hash: pool.hash(),
        rtc: st.rtc_active,
        stable: engine.is_stable(st),
        output: fx.output,
        discarded: fx.discarded,
        config: engine.render_config(st),
        pool,
    }
}

pub(crate) fn snapshot(engine: &Engine, st: &RuntimeState) -> PoolSnapshot {
    PoolSnapshot {
        completion: st.pool.completion_front.iter().map(|o| engine.render_occ(o)).collect(),
        regular: st.pool.regular.iter().map(|o| engine.render_occ(o)).collect(),
        deferred: st.deferred.iter().map(|d| engine.render_occ(&d.occ)).collect(),
        in_flight: st.in_flight.iter().map(|o| engine.render_occ(o)).collect(),
    }
}

/// Runs the initial RTC step to its end under `strategy`.
pub fn init(model: &MachineModel, strategy: Strategy) -> Result<(Engine, RuntimeState), EngineError> {
    let engine = Engine::new(model, EngineOptions::default())?;
    let sc = Scenario::default();
    let mut st = engine.initial_state();
    let mut rng = ChaCha8Rng::seed_from_u64(match strategy {
        Strategy::Random { seed } => seed,
        _ => 0,
    });
    let mut i = 0;
    while st.rtc_active {
        let choices = engine.enabled(&st, &sc);
        if choices.is_empty() {
            return Err(EngineError::IllegalStep("initial step cannot finish".into()));
        }
        let pick = match &strategy {
            Strategy::First => 0,
            Strategy::Random { .. } => rng.gen_range(0..choices.len()),
            Strategy::Scripted(script) => {
                let want = script.get(i).ok_or(EngineError::Divergence { index: i, expected: String::new() })?;
                choices
                    .iter()
                    .position(|c| {
                        let (t, k, p) = engine.render_choice(&st, c);
                        format!("{t} {k} {p}") == *want
                    })
                    .ok_or_else(|| EngineError::Divergence { index: i, expected: want.clone() })?
            }
        };
        engine.apply_unchecked(&mut st, &sc, &choices[pick]);
        i += 1;
    }
    Ok((engine, st))
}
