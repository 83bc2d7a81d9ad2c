//! Operational semantics. A [`RuntimeState`] advances one [`MicroStep`] at
//! a time; [`Engine::enabled`] lists every legal next step, so the caller
//! (a strategy in [`run`], or the explorer) owns every scheduling choice.
//!
//! Logical threads:
//! - the dispatcher (`sm`) takes events from the pool and resolves matching;
//! - a compound-transition leg per region (`leg:<region>`) runs exit,
//!   effect and entry work, forking child legs for orthogonal sub-regions;
//! - a thread per active do-activity (`do:<state>`);
//! - the transport (`net`) delivers signals sent to self.

mod compile;
mod exec;
mod invariants;
mod run;
mod state;
mod step;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use compile::{CompiledModel, RId, RegionInfo, TId, TransitionInfo, VId, VKind, VertexInfo};
pub use exec::{render_path, Exec, NodePath};
pub use invariants::{check_config, check_trace, check_transition, Violation};
pub use run::{init, run, run_observed, step_record, RunOptions, Strategy};
pub use state::*;
pub use trace::{Outcome, PoolSnapshot, Trace, TraceRecord};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreadId {
    Dispatcher,
    Leg(RId),
    Do(VId),
    Transport,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MicroStep {
    DispatchEvent { occ: u64 },
    DeliverInFlight { occ: u64 },
    /// Entry behavior action on a leg, or a do-activity action.
    RunAction { thread: ThreadId, node: NodePath },
    RunEffectAction { thread: ThreadId, transition: TId, node: NodePath },
    RunExitBehaviorAction { thread: ThreadId, state: VId, node: NodePath },
    RegisterDoAccept { thread: VId, node: NodePath },
    ConsumeDeferred { thread: VId, node: NodePath, occ: u64 },
    StartDoActivity { state: VId },
    InitialDoRtc { thread: VId },
    ExitState { state: VId },
    EnterState { state: VId },
    GenerateCompletion { state: VId },
    AbortDoActivity { state: VId },
    DiscardEvent { occ: u64 },
    DeferEvent { occ: u64, by_state: VId },
    ReleaseDeferred { state: VId },
    ChooseAccepter { occ: u64, accepter: AccepterRef },
}

impl MicroStep {
    pub fn kind(&self) -> &'static str {
        match self {
            MicroStep::DispatchEvent { .. } => "DispatchEvent",
            MicroStep::DeliverInFlight { .. } => "DeliverInFlight",
            MicroStep::RunAction { .. } => "RunAction",
            MicroStep::RunEffectAction { .. } => "RunEffectAction",
            MicroStep::RunExitBehaviorAction { .. } => "RunExitBehaviorAction",
            MicroStep::RegisterDoAccept { .. } => "RegisterDoAccept",
            MicroStep::ConsumeDeferred { .. } => "ConsumeDeferred",
            MicroStep::StartDoActivity { .. } => "StartDoActivity",
            MicroStep::InitialDoRtc { .. } => "InitialDoRtc",
            MicroStep::ExitState { .. } => "ExitState",
            MicroStep::EnterState { .. } => "EnterState",
            MicroStep::GenerateCompletion { .. } => "GenerateCompletion",
            MicroStep::AbortDoActivity { .. } => "AbortDoActivity",
            MicroStep::DiscardEvent { .. } => "DiscardEvent",
            MicroStep::DeferEvent { .. } => "DeferEvent",
            MicroStep::ReleaseDeferred { .. } => "ReleaseDeferred",
            MicroStep::ChooseAccepter { .. } => "ChooseAccepter",
        }
    }
}

/// One scheduler decision: a micro-step, or the environment injecting the
/// next scenario signal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Step(MicroStep),
    Inject(String),
}

/// Observable side effects of one applied choice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepEffect {
    /// Signal sent to the environment.
    pub output: Option<String>,
    /// Signal dropped by a `DiscardEvent`.
    pub discarded: Option<String>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("model is not well-formed: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ModelError>),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("illegal step: {0}")]
    IllegalStep(String),
    #[error("scripted strategy diverged at step {index}: expected `{expected}`")]
    Divergence { index: usize, expected: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Dispatch the regular queue strictly in arrival order. When false any
    /// queued signal may be dispatched next (released deferred ones first).
    pub fifo: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { fifo: true }
    }
}

/// A compiled model plus scheduling options; stateless between calls.
#[derive(Clone, Debug)]
pub struct Engine {
    pub model: std::sync::Arc<CompiledModel>,
    pub options: EngineOptions,
}

impl Engine {
    pub fn new(model: &crate::model::MachineModel, options: EngineOptions) -> Result<Engine, EngineError> {
        Ok(Engine { model: std::sync::Arc::new(CompiledModel::new(model)?), options })
    }
}
