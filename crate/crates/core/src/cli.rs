//! Command implementations behind the `psm` binary. Each command is a pure
//! function of its [`Invocation`] and the files it names, returning the exit
//! code and the bytes to print.
//!
//! Exit codes: 0 success, 1 findings or replay divergence, 2 unreadable or
//! unparsable input, 3 step budget exhausted, 4 deadlock.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::engine::{run, Outcome, RunOptions, Strategy, Trace};
use crate::explorer::{check, diff, explore_with, Divergence, ExploreBounds, ExploreError, ExploreOptions};
use crate::linter::{detect, render, Severity};
use crate::model::MachineModel;
use crate::parser::{parse_model_file, parse_scenario, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_DEADLOCK: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    Explore,
    Lint,
    Replay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrategyArg {
    First,
    /// Seeded from `Invocation::seed`.
    Random,
    /// Follow the steps of a stored trace.
    Script(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invocation {
    pub command: Command,
    pub model: PathBuf,
    pub scenario: Option<PathBuf>,
    /// Stored trace for `replay`.
    pub trace: Option<PathBuf>,
    pub seed: u64,
    pub strategy: StrategyArg,
    pub max_steps: usize,
    pub max_traces: usize,
    pub max_pool: usize,
    pub format: Format,
    pub severity: Severity,
    /// Explore every path without sharing equal states.
    pub full: bool,
    /// Separate explore classes by stable configuration sequence.
    pub track_configs: bool,
    /// Where `run` writes its trace as JSON.
    pub trace_out: Option<PathBuf>,
    /// Where `explore` writes one JSON trace per observable class.
    pub witness_dir: Option<PathBuf>,
}

impl Invocation {
    pub fn new(command: Command, model: impl Into<PathBuf>) -> Self {
        let b = ExploreBounds::default();
        Invocation {
            command,
            model: model.into(),
            scenario: None,
            trace: None,
            seed: 0,
            strategy: StrategyArg::Random,
            max_steps: b.max_micro_steps,
            max_traces: b.max_traces,
            max_pool: b.max_pool,
            format: Format::Text,
            severity: Severity::default(),
            full: false,
            track_configs: false,
            trace_out: None,
            witness_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CmdOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutput {
    fn ok(code: i32, stdout: String) -> Self {
        CmdOutput { code, stdout, stderr: String::new() }
    }

    fn fail(code: i32, stderr: String) -> Self {
        CmdOutput { code, stdout: String::new(), stderr }
    }
}

type Fallible<T> = Result<T, CmdOutput>;

fn read(path: &Path) -> Fallible<String> {
    std::fs::read_to_string(path).map_err(|e| CmdOutput::fail(EXIT_PARSE, format!("error: cannot read {}: {e}\n", path.display())))
}

fn load_model(path: &Path) -> Fallible<MachineModel> {
    let text = read(path)?;
    parse_model_file(&text, &path.display().to_string()).map_err(|errs| {
        let mut s = String::new();
        for e in errs {
            let _ = writeln!(s, "error: {e}");
        }
        CmdOutput::fail(EXIT_PARSE, s)
    })
}

fn load_scenario(path: Option<&Path>, model: &MachineModel) -> Fallible<Scenario> {
    let Some(path) = path else { return Ok(Scenario::default()) };
    let text = read(path)?;
    parse_scenario(&text, model).map_err(|errs| {
        let mut s = String::new();
        for e in errs {
            let _ = writeln!(s, "error: {}: {e}", path.display());
        }
        CmdOutput::fail(EXIT_PARSE, s)
    })
}

/// Reads a trace in either serialization.
pub fn load_trace(text: &str) -> Result<Trace, String> {
    if text.trim_start().starts_with('{') {
        return Trace::from_json(text).map_err(|e| format!("malformed trace: {e}"));
    }
    parse_trace_text(text)
}

/// Inverse of [`Trace::to_text`] for the fields the text form carries.
fn parse_trace_text(text: &str) -> Result<Trace, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trace file")?;
    let words: Vec<&str> = header.split_whitespace().collect();
    let field = |name: &str| words.iter().position(|w| *w == name).and_then(|i| words.get(i + 1)).copied();
    if words.first() != Some(&"#") || field("model").is_none() {
        return Err("trace header missing".into());
    }
    let max_steps = field("max-steps").and_then(|s| s.parse().ok()).ok_or("trace header lacks max-steps")?;
    let mut trace = Trace {
        model: field("model").unwrap_or_default().to_string(),
        strategy: field("strategy").unwrap_or_default().to_string(),
        max_steps,
        records: vec![],
        outcome: Outcome::Terminal,
    };
    let mut footer = false;
    for (n, line) in lines.enumerate() {
        if let Some(rest) = line.strip_prefix("# outcome ") {
            trace.outcome = match rest.split_whitespace().next() {
                Some("Terminal") => Outcome::Terminal,
                Some("Deadlock") => Outcome::Deadlock,
                Some("BudgetExceeded") => Outcome::BudgetExceeded,
                Some("StrategyExhausted") => Outcome::StrategyExhausted,
                other => return Err(format!("unknown outcome {other:?}")),
            };
            footer = true;
            break;
        }
        let bad = || format!("malformed trace line {}: `{line}`", n + 2);
        let (body, hash) = line.rsplit_once(" #").ok_or_else(bad)?;
        let mut parts = body.splitn(4, ' ');
        let index: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let thread = parts.next().ok_or_else(bad)?.to_string();
        let kind = parts.next().ok_or_else(bad)?.to_string();
        let payload = parts.next().unwrap_or_default().to_string();
        trace.records.push(crate::engine::TraceRecord {
            index,
            thread,
            kind,
            payload,
            pool_hash: hash.to_string(),
            rtc: false,
            stable: false,
            output: None,
            discarded: None,
            config: String::new(),
            pool: Default::default(),
        });
    }
    if !footer {
        return Err("trace is truncated: no outcome footer".into());
    }
    Ok(trace)
}

/// Runs the command named by `inv.command`.
pub fn execute(inv: &Invocation) -> CmdOutput {
    let r = match inv.command {
        Command::Run => cmd_run(inv),
        Command::Explore => cmd_explore(inv),
        Command::Lint => cmd_lint(inv),
        Command::Replay => cmd_replay(inv),
    };
    r.unwrap_or_else(|e| e)
}

fn structured<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn outcome_code(o: Outcome) -> i32 {
    match o {
        Outcome::Terminal => EXIT_OK,
        Outcome::Deadlock => EXIT_DEADLOCK,
        Outcome::BudgetExceeded => EXIT_BUDGET,
        Outcome::StrategyExhausted => EXIT_FINDINGS,
    }
}

fn strategy(inv: &Invocation) -> Fallible<Strategy> {
    Ok(match &inv.strategy {
        StrategyArg::First => Strategy::First,
        StrategyArg::Random => Strategy::Random { seed: inv.seed },
        StrategyArg::Script(path) => {
            let t = load_trace(&read(path)?).map_err(|e| CmdOutput::fail(EXIT_PARSE, format!("error: {}: {e}\n", path.display())))?;
            Strategy::Scripted(t.script())
        }
    })
}

fn write_file(path: &Path, text: &str) -> Fallible<()> {
    std::fs::write(path, text).map_err(|e| CmdOutput::fail(EXIT_PARSE, format!("error: cannot write {}: {e}\n", path.display())))
}

fn scenario_name(inv: &Invocation) -> String {
    inv.scenario.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "-".into())
}

pub fn cmd_run(inv: &Invocation) -> Fallible<CmdOutput> {
    let model = load_model(&inv.model)?;
    let sc = load_scenario(inv.scenario.as_deref(), &model)?;
    let strat = strategy(inv)?;
    let opts = RunOptions { strategy: strat.clone(), max_steps: inv.max_steps, ..RunOptions::default() };
    let trace = run(&model, &sc, &opts).map_err(|e| CmdOutput::fail(EXIT_FINDINGS, format!("error: {e}\n")))?;
    if let Some(path) = &inv.trace_out {
        write_file(path, &trace.to_json())?;
    }
    let code = outcome_code(trace.outcome);
    let out = match inv.format {
        Format::Structured => structured(&json!({
            "command": "run",
            "model": inv.model.display().to_string(),
            "scenario": scenario_name(inv),
            "strategy": strat.describe(),
            "seed": inv.seed,
            "max_steps": inv.max_steps,
            "outcome": trace.outcome,
            "outputs": trace.outputs(),
            "stable_configs": trace.stable_configs(),
            "timeline": trace.timeline(),
            "trace": trace,
        })),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "# psm run model {} scenario {} strategy {} seed {} max-steps {}",
                inv.model.display(),
                scenario_name(inv),
                strat.describe(),
                inv.seed,
                inv.max_steps
            );
            s.push_str(&trace.timeline());
            let _ = writeln!(s, "outputs: [{}]", trace.outputs().join(", "));
            let _ = writeln!(s, "stable configurations: {}", trace.stable_configs().join(" -> "));
            s
        }
    };
    Ok(CmdOutput::ok(code, out))
}

pub fn cmd_explore(inv: &Invocation) -> Fallible<CmdOutput> {
    let model = load_model(&inv.model)?;
    let sc = load_scenario(inv.scenario.as_deref(), &model)?;
    let opts = ExploreOptions {
        bounds: ExploreBounds { max_micro_steps: inv.max_steps, max_traces: inv.max_traces, max_pool: inv.max_pool },
        prune: !inv.full,
        track_configs: inv.track_configs,
        ..ExploreOptions::default()
    };
    let header = format!(
        "# psm explore model {} scenario {} max-steps {} max-traces {} max-pool {} pruning {} configs {}",
        inv.model.display(),
        scenario_name(inv),
        inv.max_steps,
        inv.max_traces,
        inv.max_pool,
        if opts.prune { "on" } else { "off" },
        if opts.track_configs { "on" } else { "off" }
    );
    let set = match explore_with(&model, &sc, opts) {
        Ok(s) => s,
        Err(e @ ExploreError::BoundsTooTight { .. }) => return Err(CmdOutput::fail(EXIT_BUDGET, format!("{header}\nerror: {e}\n"))),
        Err(e) => return Err(CmdOutput::fail(EXIT_FINDINGS, format!("{header}\nerror: {e}\n"))),
    };
    let report = check(&set, &sc.expectations);
    if let Some(dir) = &inv.witness_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CmdOutput::fail(EXIT_PARSE, format!("error: cannot create {}: {e}\n", dir.display())))?;
        for (i, c) in set.classes.iter().enumerate() {
            write_file(&dir.join(format!("class{i:04}.json")), &set.traces[c.witness].to_json())?;
        }
    }
    let code = if set.stats.deadlocks > 0 { EXIT_DEADLOCK } else { EXIT_OK };
    let out = match inv.format {
        Format::Structured => structured(&json!({
            "command": "explore",
            "model": inv.model.display().to_string(),
            "scenario": scenario_name(inv),
            "bounds": set.bounds,
            "pruning": opts.prune,
            "track_configs": opts.track_configs,
            "observable_classes": set.classes.len(),
            "region_normalized_classes": set.region_partition.len(),
            "classes": set.classes.iter().map(|c| json!({
                "outputs": c.outputs,
                "count": c.count.to_string(),
                "witness": set.traces[c.witness].script(),
            })).collect::<Vec<_>>(),
            "stats": {
                "complete": set.stats.complete.to_string(),
                "deadlocks": set.stats.deadlocks.to_string(),
                "discarded": set.stats.discarded.to_string(),
                "truncated": set.stats.truncated.to_string(),
                "states": set.stats.states,
                "edges": set.stats.edges,
                "violations": set.stats.violations,
            },
            "exhaustive": set.exhaustive,
            "verdicts": report.verdicts,
        })),
        Format::Text => format!("{header}\n{}", set.render(&report)),
    };
    Ok(CmdOutput::ok(code, out))
}

pub fn cmd_lint(inv: &Invocation) -> Fallible<CmdOutput> {
    let model = load_model(&inv.model)?;
    let findings = detect(&model, inv.severity).map_err(|e| CmdOutput::fail(EXIT_PARSE, format!("error: {e}\n")))?;
    let code = if findings.iter().any(|f| !f.issues.is_empty()) { EXIT_FINDINGS } else { EXIT_OK };
    let out = match inv.format {
        Format::Structured => structured(&json!({
            "command": "lint",
            "model": inv.model.display().to_string(),
            "severity": inv.severity.to_string(),
            "guards": "over-approximated",
            "findings": findings,
        })),
        Format::Text => {
            let mut s = format!("# psm lint model {} severity {}\n", inv.model.display(), inv.severity);
            s.push_str(&render(&findings));
            let _ = writeln!(s, "{} finding(s); guards over-approximated", findings.len());
            s
        }
    };
    Ok(CmdOutput::ok(code, out))
}

pub fn cmd_replay(inv: &Invocation) -> Fallible<CmdOutput> {
    let path = inv.trace.as_ref().ok_or_else(|| CmdOutput::fail(EXIT_PARSE, "error: replay needs a trace file\n".into()))?;
    let stored = load_trace(&read(path)?).map_err(|e| CmdOutput::fail(EXIT_PARSE, format!("error: {}: {e}\n", path.display())))?;
    let model = load_model(&inv.model)?;
    let sc = load_scenario(inv.scenario.as_deref(), &model)?;
    let opts = RunOptions { strategy: Strategy::Scripted(stored.script()), max_steps: stored.max_steps, ..RunOptions::default() };
    let header = format!("# psm replay model {} scenario {} trace {}", inv.model.display(), scenario_name(inv), path.display());
    let diverged = |index: usize, detail: String| {
        let text = match inv.format {
            Format::Structured => structured(&json!({ "command": "replay", "ok": false, "divergence": index, "detail": detail })),
            Format::Text => format!("{header}\ndivergence at step {index}: {detail}\n"),
        };
        CmdOutput::ok(EXIT_FINDINGS, text)
    };
    let replayed = match run(&model, &sc, &opts) {
        Ok(t) => t,
        Err(crate::engine::EngineError::Divergence { index, expected }) => {
            return Ok(diverged(index, format!("no enabled step matches `{expected}`")))
        }
        Err(e) => return Err(CmdOutput::fail(EXIT_FINDINGS, format!("error: {e}\n"))),
    };
    // The text form carries only the step key and pool hash.
    let comparable = |t: &Trace| -> Vec<String> { t.records.iter().map(|r| r.line()).collect() };
    let first_diff = if stored.records.iter().all(|r| r.config.is_empty()) {
        let (a, b) = (comparable(&stored), comparable(&replayed));
        (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i))
    } else {
        match diff(&stored, &replayed) {
            Divergence::Equal => None,
            Divergence::At { index, .. } => Some(index),
        }
    };
    if let Some(i) = first_diff {
        let want = stored.records.get(i).map(|r| r.line()).unwrap_or_else(|| "end of trace".into());
        let got = replayed.records.get(i).map(|r| r.line()).unwrap_or_else(|| "end of trace".into());
        return Ok(diverged(i, format!("expected `{want}`, got `{got}`")));
    }
    // Pool-cap truncation is an explorer bound the engine does not apply.
    let settled = matches!(stored.outcome, Outcome::Terminal | Outcome::Deadlock);
    if settled && replayed.outcome != stored.outcome {
        return Ok(diverged(replayed.records.len(), format!("outcome {:?}, expected {:?}", replayed.outcome, stored.outcome)));
    }
    let text = match inv.format {
        Format::Structured => structured(&json!({ "command": "replay", "ok": true, "steps": replayed.records.len() })),
        Format::Text => format!("{header}\nreplay ok: {} steps identical\n", replayed.records.len()),
    };
    Ok(CmdOutput::ok(EXIT_OK, text))
}
