//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are the
//! constants below; the process exits non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{fixture_path, gen_flat, load, oracle, CORPUS};
use psm_core::cli::{cmd_replay, Command, Invocation, EXIT_OK};
use psm_core::engine::{
    check_trace, check_transition, run, run_observed, Engine, EngineOptions, Outcome, RunOptions, Strategy, Trace, Violation,
};
use psm_core::explorer::{explore_with, for_each_path, ExploreBounds, ExploreOptions, TraceSet};
use psm_core::linter::{detect, Severity};

/// Wall-clock budget for exploring the measuring component.
const MEASURING_BUDGET: Duration = Duration::from_secs(10);
/// Generated flat machines compared against the oracle, per dispatch mode.
const FLAT_MACHINES: u64 = 200;
/// Seeded random runs over the fixture corpus.
const RANDOM_RUNS: usize = 1000;
/// Path cap for universal checks; every such check also requires that the
/// walk was exhaustive.
const UNIVERSAL_PATHS: usize = 2_000_000;

/// A trace some criterion relies on, with where it came from.
struct Witness {
    label: String,
    model: &'static str,
    scenario: &'static str,
    trace: Trace,
}

#[derive(Default)]
struct Ledger {
    witnesses: Vec<Witness>,
    /// Violations found while producing traces for criteria 1 to 6.
    violations: Vec<(String, Violation)>,
    /// Traces covered by the invariant checks for criteria 1 to 6.
    checked_traces: u128,
}

impl Ledger {
    fn witness(&mut self, label: impl Into<String>, model: &'static str, scenario: &'static str, trace: &Trace) {
        self.witnesses.push(Witness { label: label.into(), model, scenario, trace: trace.clone() });
    }

    /// Every edge of an explored set is checked by the explorer; the
    /// recorded witnesses are checked here as whole traces.
    fn absorb_set(&mut self, label: &str, set: &TraceSet) {
        for v in &set.stats.violations {
            self.violations.push((label.to_string(), v.clone()));
        }
        for t in &set.traces {
            self.absorb_trace(label, t);
        }
        self.checked_traces += set.stats.complete + set.stats.truncated;
    }

    fn absorb_trace(&mut self, label: &str, t: &Trace) {
        for v in check_trace(t) {
            self.violations.push((label.to_string(), v));
        }
    }
}

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn default_set(name: &'static str, scn: &'static str, opts: ExploreOptions) -> Result<TraceSet, String> {
    let (m, sc) = load(name, scn);
    explore_with(&m, &sc, opts).map_err(|e| format!("{name}: {e}"))
}

fn universal_opts() -> ExploreOptions {
    ExploreOptions { bounds: ExploreBounds { max_traces: UNIVERSAL_PATHS, ..ExploreBounds::default() }, ..ExploreOptions::full() }
}

/// Walks every path of a fixture, checking each trace's history
/// invariants on the way.
fn walk_all<F>(led: &mut Ledger, name: &'static str, scn: &'static str, opts: ExploreOptions, mut f: F) -> Result<usize, String>
where
    F: FnMut(&Trace) + Send,
{
    let (m, sc) = load(name, scn);
    let mut bad: Vec<Violation> = vec![];
    let walk = for_each_path(&m, &sc, opts, |t| {
        bad.extend(check_trace(t));
        f(t);
        ControlFlow::Continue(())
    })
    .map_err(|e| format!("{name}: {e}"))?;
    ensure(walk.exhaustive, || format!("{name}/{scn}: walk stopped after {} paths", walk.paths))?;
    let label = format!("{name}/{scn}");
    for v in bad.into_iter().chain(walk.stats.violations) {
        led.violations.push((label.clone(), v));
    }
    led.checked_traces += walk.paths as u128;
    Ok(walk.paths)
}

// Criterion 1: the motivating example's logged order and configurations.

const MEASURING_OUTPUTS: &[&str] = &[
    "wait1Entry",
    "wait2Entry",
    "wait1Exit",
    "wait2Exit",
    "tm1Effect",
    "tm2Effect",
    "measureTempEntry",
    "measureGravityEntry",
    "tempMeasured",
    "gravityMeasured",
    "measureTempExit",
    "wait1Entry",
    "measureGravityExit",
    "wait2Entry",
];
const MEASURING_R1: &[&str] =
    &["wait1Entry", "wait1Exit", "tm1Effect", "measureTempEntry", "tempMeasured", "measureTempExit", "wait1Entry"];
const MEASURING_R2: &[&str] = &[
    "wait2Entry",
    "wait2Exit",
    "tm2Effect",
    "measureGravityEntry",
    "gravityMeasured",
    "measureGravityExit",
    "wait2Entry",
];
const MEASURING_CONFIGS: &[&str] = &["Standby", "Active[Wait1,Wait2]", "Active[MeasureTemp,MeasureGravity]", "Active[Wait1,Wait2]"];

fn criterion_1(led: &mut Ledger) -> Verdict {
    let opts = ExploreOptions { track_configs: true, ..ExploreOptions::default() };
    let started = Instant::now();
    let set = default_set("measuring", "measuring", opts)?;
    let elapsed = started.elapsed();
    led.absorb_set("measuring", &set);
    let want_out: Vec<String> = MEASURING_OUTPUTS.iter().map(|s| s.to_string()).collect();
    let want_cfg: Vec<String> = MEASURING_CONFIGS.iter().map(|s| s.to_string()).collect();
    let hit = set.paths.iter().find(|p| {
        let per_region = |suffix: &str| -> Vec<String> {
            p.outputs.iter().filter(|o| o.region.ends_with(suffix)).map(|o| o.signal.clone()).collect()
        };
        p.outcome == Outcome::Terminal
            && p.signals() == want_out
            && p.configs.as_deref() == Some(&want_cfg[..])
            && per_region("R1") == MEASURING_R1
            && per_region("R2") == MEASURING_R2
    });
    let hit = hit.ok_or_else(|| format!("no trace with the expected outputs and configurations among {} classes", set.paths.len()))?;
    let trace = &set.traces[hit.trace];
    ensure(trace.outputs() == want_out, || "witness outputs differ from its class".into())?;
    ensure(trace.stable_configs() == want_cfg, || format!("witness configs {:?}", trace.stable_configs()))?;
    ensure(elapsed <= MEASURING_BUDGET, || format!("took {elapsed:?}, budget {MEASURING_BUDGET:?}"))?;
    led.witness("measuring order", "measuring", "measuring", trace);
    Ok(format!("matching trace found; {} complete paths in {:.2?}", set.stats.complete, elapsed))
}

// Criterion 2: deferral either hands the event to the do-activity or races.

fn criterion_2(led: &mut Ledger) -> Verdict {
    let cases: [(&'static str, &[&[&str]]); 4] = [
        ("defer_case_a", &[&["accepted"]]),
        ("defer_case_a_ortho", &[&["accepted"]]),
        ("defer_case_b", &[&["accepted"], &["overrideFired"]]),
        ("defer_case_b_nested", &[&["accepted"], &["nestedFired"]]),
    ];
    let mut summary = vec![];
    for (name, want) in cases {
        let set = default_set(name, "defer_case", ExploreOptions::default())?;
        led.absorb_set(name, &set);
        let got: BTreeSet<Vec<String>> = set.classes.iter().map(|c| c.outputs.clone()).collect();
        let want: BTreeSet<Vec<String>> = want.iter().map(|w| w.iter().map(|s| s.to_string()).collect()).collect();
        ensure(set.classes.len() == want.len(), || format!("{name}: {} classes {got:?}", set.classes.len()))?;
        ensure(got == want, || format!("{name}: classes {got:?}"))?;
        ensure(set.exhaustive && set.stats.truncated == 0, || format!("{name}: exploration was cut"))?;
        for (i, c) in set.classes.iter().enumerate() {
            led.witness(format!("{name} class {i}"), name, "defer_case", &set.traces[c.witness]);
        }
        summary.push(format!("{name}={}", set.classes.len()));
    }
    Ok(summary.join(" "))
}

// Criterion 3: a do-activity may be aborted before running anything.

fn do_actions(t: &Trace, thread: &str) -> usize {
    t.records.iter().filter(|r| r.kind == "RunAction" && r.thread == thread).count()
}

fn criterion_3(led: &mut Ledger) -> Verdict {
    let set = default_set("pattern_p1", "pattern_p1", ExploreOptions::full())?;
    led.absorb_set("pattern_p1", &set);
    ensure(set.exhaustive, || "full enumeration hit the trace cap".into())?;
    let untouched = set.traces.iter().find(|t| do_actions(t, "do:S1") == 0 && t.outcome == Outcome::Terminal);
    let ran = set.traces.iter().find(|t| {
        t.outcome == Outcome::Terminal && t.records.iter().any(|r| r.thread == "do:S1" && r.payload.ends_with("task a"))
    });
    let untouched = untouched.ok_or("no trace aborts the do-activity before it runs")?;
    let ran = ran.ok_or("no trace runs the task")?;
    led.witness("abort before run", "pattern_p1", "pattern_p1", untouched);
    led.witness("task ran", "pattern_p1", "pattern_p1", ran);
    Ok(format!("both witnesses among {} traces", set.traces.len()))
}

// Criterion 4: completion of a composite state with a do-activity.

struct CompletionScan {
    traces: usize,
    errors: Vec<String>,
    overtook_older: Option<Trace>,
    do_finished: Option<Trace>,
}

fn scan_completion(t: &Trace, expect_one: bool, scan: &mut CompletionScan) {
    scan.traces += 1;
    let r = &t.records;
    let gens: Vec<usize> = (0..r.len()).filter(|&i| r[i].kind == "GenerateCompletion" && r[i].payload == "C").collect();
    let w2 = r.iter().position(|x| x.thread == "do:C" && x.payload.ends_with("task w2"));
    if w2.is_some() && scan.do_finished.is_none() {
        scan.do_finished = Some(t.clone());
    }
    if t.outcome != Outcome::Terminal {
        scan.errors.push(format!("outcome {:?}", t.outcome));
    }
    if expect_one && gens.len() != 1 {
        scan.errors.push(format!("{} completions for C", gens.len()));
    }
    if !expect_one && !gens.is_empty() {
        scan.errors.push("completion emitted with the region outside its final state".into());
    }
    for &g in &gens {
        let prior = if g == 0 { "" } else { r[g - 1].config.as_str() };
        if prior != "C[F]" || !w2.is_some_and(|w| w < g) {
            scan.errors.push(format!("completion at {g} with config `{prior}` before the do-activity finished"));
        }
        let next = r[g + 1..].iter().find(|x| x.kind == "DispatchEvent");
        if !next.is_some_and(|x| x.payload.starts_with("completion(C)#")) {
            scan.errors.push(format!("completion at {g} not dispatched next"));
        }
        if !r[g].pool.regular.is_empty() && scan.overtook_older.is_none() {
            scan.overtook_older = Some(t.clone());
        }
    }
}

fn criterion_4(led: &mut Ledger) -> Verdict {
    let mut report = vec![];
    for (scn, expect_one) in [("completion", true), ("completion_open", false)] {
        let mut scan = CompletionScan { traces: 0, errors: vec![], overtook_older: None, do_finished: None };
        walk_all(led, "completion", scn, universal_opts(), |t| scan_completion(t, expect_one, &mut scan))?;
        ensure(scan.errors.is_empty(), || format!("{scn}: {} (first of {})", scan.errors[0], scan.errors.len()))?;
        let finished = scan.do_finished.ok_or_else(|| format!("{scn}: the do-activity never finishes"))?;
        if expect_one {
            let older = scan.overtook_older.ok_or("no trace has an older signal queued at completion time")?;
            led.witness("completion overtakes queued signal", "completion", scn, &older);
        } else {
            led.witness("do finished, region open", "completion", scn, &finished);
        }
        report.push(format!("{scn}: {} traces", scan.traces));
    }
    Ok(report.join(", "))
}

// Criterion 5: a do-activity takes a deferred event within someone else's
// RTC step.

fn steal_window(t: &Trace) -> Option<(usize, usize, usize)> {
    let r = &t.records;
    for d in (0..r.len()).filter(|&i| r[i].kind == "DispatchEvent" && r[i].payload.starts_with("e3#")) {
        let end = (d..r.len()).find(|&j| !r[j].rtc)?;
        if let Some(c) = (d + 1..end).find(|&c| r[c].kind == "ConsumeDeferred" && r[c].payload.contains("e1#")) {
            return Some((d, c, end));
        }
    }
    None
}

fn criterion_5(led: &mut Ledger) -> Verdict {
    let (m, sc) = load("pattern_p10", "pattern_p10");
    let mut found: Option<Trace> = None;
    let mut bad: Vec<Violation> = vec![];
    let walk = for_each_path(&m, &sc, universal_opts(), |t| {
        bad.extend(check_trace(t));
        if steal_window(t).is_some() {
            found = Some(t.clone());
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })
    .map_err(|e| e.to_string())?;
    for v in bad.into_iter().chain(walk.stats.violations) {
        led.violations.push(("pattern_p10".into(), v));
    }
    led.checked_traces += walk.paths as u128;
    let t = found.ok_or_else(|| format!("no steal among {} paths", walk.paths))?;
    let (d, c, end) = steal_window(&t).expect("window");
    led.witness("deferred steal", "pattern_p10", "pattern_p10", &t);
    Ok(format!("dispatch e3 at {d}, consume e1 at {c}, RTC ends at {end} (path {})", walk.paths))
}

// Criterion 6: released occurrences go before later arrivals.

fn seq_of(occ: &str) -> Option<u64> {
    occ.rsplit_once('#').and_then(|(_, s)| s.parse().ok())
}

struct ReleaseScan {
    traces: usize,
    errors: Vec<String>,
    contested: Option<Trace>,
}

fn scan_release(t: &Trace, scan: &mut ReleaseScan) {
    scan.traces += 1;
    let r = &t.records;
    let mut released: BTreeSet<String> = BTreeSet::new();
    for i in 0..r.len() {
        let before = if i == 0 { &[][..] } else { &r[i - 1].pool.deferred[..] };
        match r[i].kind.as_str() {
            "ReleaseDeferred" => {
                let now: BTreeSet<&String> = r[i].pool.deferred.iter().collect();
                let freed: Vec<String> = before.iter().filter(|o| !now.contains(o)).cloned().collect();
                let newer_waiting = r[i].pool.regular.iter().any(|o| !freed.contains(o) && o.starts_with("e1#"));
                if newer_waiting && !freed.is_empty() && scan.contested.is_none() {
                    scan.contested = Some(t.clone());
                }
                released.extend(freed);
            }
            "DispatchEvent" if !r[i].payload.starts_with("completion(") => {
                let d = &r[i].payload;
                if released.remove(d) {
                    continue;
                }
                let oldest = released.iter().filter_map(|o| seq_of(o)).min();
                if let (Some(o), Some(s)) = (oldest, seq_of(d)) {
                    if s > o {
                        scan.errors.push(format!("record {i}: {d} dispatched ahead of released {released:?}"));
                    }
                }
            }
            _ => {}
        }
    }
}

fn criterion_6(led: &mut Ledger) -> Verdict {
    let mut report = vec![];
    for fifo in [true, false] {
        let mut scan = ReleaseScan { traces: 0, errors: vec![], contested: None };
        let opts = ExploreOptions { engine: EngineOptions { fifo }, ..universal_opts() };
        walk_all(led, "release_order", "release_order", opts, |t| scan_release(t, &mut scan))?;
        ensure(scan.errors.is_empty(), || format!("{} (first of {})", scan.errors[0], scan.errors.len()))?;
        let contested = scan.contested.ok_or("no trace releases while a later e1 waits")?;
        if fifo {
            led.witness("release ahead of later e1", "release_order", "release_order", &contested);
        }
        report.push(format!("{} traces {}", scan.traces, if fifo { "fifo" } else { "any-order" }));
    }
    Ok(report.join(", "))
}

// Criterion 7: linter output against the pattern table.

/// One row per pattern: issue and severity mark (`●` important,
/// `◐` applicable, `○` slight).
const PATTERN_TABLE: &[(&str, &str)] = &[
    ("P1", "I1● I14● I15●"),
    ("P2", "I5● I9○ I10○ I14○ I15○ I16●"),
    ("P3", "I6● I9○ I10○ I14○ I15○"),
    ("P4", "I1◐ I2● I3◐ I14○ I15○"),
    ("P5", "I1◐ I7● I8● I14◐ I15◐ I17●"),
    ("P6", "I1◐ I7◐ I8◐ I9● I10● I11● I12○ I14◐ I15◐ I17○"),
    ("P7", "I1◐ I2◐ I3● I4● I7○ I8○ I14○ I15○ I17○ I18●"),
    ("P8", "I1◐ I7○ I8◐ I14◐ I15◐ I17○ I18○"),
    ("P9", "I1○ I3◐ I4◐ I7◐ I8◐ I14○ I15○ I17○ I18◐"),
    ("P10", "I1○ I3◐ I4◐ I7◐ I8○ I9◐ I10○ I11◐ I12● I13● I14○ I15○ I17○ I18○"),
    ("P11", "I1○ I3◐ I4◐ I7◐ I8○ I14○ I15○ I17○ I18◐"),
];

/// Patterns each fixture must produce, and nothing else.
const FIXTURE_PATTERNS: &[(&str, &[&str])] = &[
    ("pattern_p1", &["P1"]),
    ("pattern_p2", &["P2"]),
    ("pattern_p3", &["P3"]),
    ("pattern_p4", &["P4"]),
    ("pattern_p5", &["P5"]),
    ("pattern_p6", &["P6"]),
    ("pattern_p7", &["P7"]),
    ("pattern_p8", &["P8"]),
    ("pattern_p9", &["P5", "P9"]),
    ("pattern_p10", &["P10"]),
    ("pattern_p11", &["P5", "P7", "P11"]),
];

fn mark_rank(c: char) -> u8 {
    match c {
        '●' => 3,
        '◐' => 2,
        '○' => 1,
        _ => panic!("unknown mark {c}"),
    }
}

fn sev_rank(s: Severity) -> u8 {
    match s {
        Severity::Important => 3,
        Severity::Applicable => 2,
        Severity::Slight => 1,
    }
}

fn expected_row(pattern: &str, threshold: u8) -> Vec<String> {
    let row = PATTERN_TABLE.iter().find(|(p, _)| *p == pattern).expect("pattern row").1;
    row.split(' ')
        .filter(|cell| mark_rank(cell.chars().last().unwrap()) >= threshold)
        .map(str::to_string)
        .collect()
}

fn criterion_7(_: &mut Ledger) -> Verdict {
    let mut passed = 0;
    let mut failures = vec![];
    for (k, (fixture, patterns)) in FIXTURE_PATTERNS.iter().enumerate() {
        let target = format!("P{}", k + 1);
        let m = common::model(fixture);
        for sev in [Severity::Slight, Severity::Applicable, Severity::Important] {
            let findings = detect(&m, sev).map_err(|e| e.to_string())?;
            let got_patterns: BTreeSet<String> = findings.iter().map(|f| f.pattern.to_string()).collect();
            let want_patterns: BTreeSet<String> = patterns.iter().map(|s| s.to_string()).collect();
            let want = expected_row(&target, sev_rank(sev));
            let rows: Vec<Vec<String>> = findings
                .iter()
                .filter(|f| f.pattern.to_string() == target)
                .map(|f| f.issues.iter().map(|(i, s)| format!("{i}{}", s.symbol())).collect())
                .collect();
            if got_patterns == want_patterns && !rows.is_empty() && rows.iter().all(|r| *r == want) {
                passed += 1;
            } else {
                failures.push(format!("{fixture}@{sev}: patterns {got_patterns:?} rows {rows:?} want {want:?}"));
            }
        }
    }
    ensure(failures.is_empty(), || format!("{passed}/33; {}", failures.join("; ")))?;
    ensure(passed == 33, || format!("{passed}/33"))?;
    Ok("33/33 rows equal".into())
}

// Criterion 8: flat machines against the brute-force oracle.

fn criterion_8(_: &mut Ledger) -> Verdict {
    let mut machines = 0;
    let mut branching = 0;
    for fifo in [true, false] {
        for seed in 0..FLAT_MACHINES {
            let flat = gen_flat(seed);
            let (m, sc) = flat.parse();
            let opts = ExploreOptions { engine: EngineOptions { fifo }, ..ExploreOptions::default() };
            let set = explore_with(&m, &sc, opts).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(set.stats.truncated == 0, || format!("seed {seed}: bounds cut a path"))?;
            let got: BTreeSet<Vec<String>> = set.observable_partition.keys().cloned().collect();
            let want = oracle(&flat, fifo);
            ensure(got == want, || format!("seed {seed} fifo={fifo}: engine {got:?} oracle {want:?}\n{}", flat.to_dsl()))?;
            machines += 1;
            if want.len() > 1 {
                branching += 1;
            }
        }
    }
    Ok(format!("{machines} machine/mode pairs equal ({branching} with several observable sequences)"))
}

// Criterion 9: safety invariants.

fn criterion_9(led: &mut Ledger) -> Verdict {
    let mut bad = led.violations.clone();
    for w in &led.witnesses {
        for v in check_trace(&w.trace) {
            bad.push((w.label.clone(), v));
        }
    }
    let mut runs = 0;
    let mut steps = 0;
    for i in 0..RANDOM_RUNS {
        let (name, scn) = CORPUS[i % CORPUS.len()];
        let (m, sc) = load(name, scn);
        let engine = Engine::new(&m, EngineOptions::default()).map_err(|e| e.to_string())?;
        let opts = RunOptions { strategy: Strategy::Random { seed: i as u64 }, ..RunOptions::default() };
        let mut found: Vec<Violation> = vec![];
        let t = run_observed(&engine, &sc, &opts, &mut |pre, choice, post| {
            found.extend(check_transition(&engine, pre, choice, post));
        })
        .map_err(|e| format!("{name} seed {i}: {e}"))?;
        found.extend(check_trace(&t));
        steps += t.records.len();
        runs += 1;
        bad.extend(found.into_iter().map(|v| (format!("{name} seed {i}"), v)));
    }
    ensure(bad.is_empty(), || {
        let (at, v) = &bad[0];
        format!("{} violations; first in {at}: {} {}", bad.len(), v.invariant, v.detail)
    })?;
    Ok(format!("0 violations over {} explored paths and {runs} random runs ({steps} steps)", led.checked_traces))
}

// Criterion 10: witnesses replay byte-identically.

fn criterion_10(led: &mut Ledger) -> Verdict {
    let dir = std::env::temp_dir().join(format!("psm-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    ensure(!led.witnesses.is_empty(), || "no witnesses recorded".into())?;
    let mut failures = vec![];
    for (i, w) in led.witnesses.iter().enumerate() {
        let file: PathBuf = dir.join(format!("witness{i:02}.json"));
        std::fs::write(&file, w.trace.to_json()).map_err(|e| e.to_string())?;
        let mut inv = Invocation::new(Command::Replay, fixture_path(&format!("{}.psm", w.model)));
        inv.scenario = Some(fixture_path(&format!("{}.scn", w.scenario)));
        inv.trace = Some(file);
        let code = match cmd_replay(&inv) {
            Ok(out) | Err(out) => out.code,
        };
        let (m, sc) = load(w.model, w.scenario);
        let opts = RunOptions { strategy: Strategy::Scripted(w.trace.script()), max_steps: w.trace.max_steps, ..RunOptions::default() };
        let again = run(&m, &sc, &opts).map_err(|e| format!("{}: {e}", w.label))?;
        // Headers name the strategy; the step records must match byte for byte.
        let bytes = |t: &Trace| serde_json::to_string(&t.records).expect("records serialize");
        let lines = |t: &Trace| t.records.iter().map(|r| r.line()).collect::<Vec<_>>();
        let same = bytes(&again) == bytes(&w.trace) && lines(&again) == lines(&w.trace);
        if code != EXIT_OK || !same {
            failures.push(format!("{} (exit {code}, records equal {same})", w.label));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{} witnesses replayed", led.witnesses.len()))
}

type Criterion = fn(&mut Ledger) -> Verdict;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("measuring component order and configurations", criterion_1),
        ("deferral classes by case", criterion_2),
        ("do-activity aborted before running", criterion_3),
        ("composite completion", criterion_4),
        ("deferred event taken during an RTC step", criterion_5),
        ("released deferred events first", criterion_6),
        ("linter rows at three thresholds", criterion_7),
        ("flat machines equal the oracle", criterion_8),
        ("invariants hold", criterion_9),
        ("witness replay", criterion_10),
    ];
    let mut led = Ledger::default();
    let mut failed = 0;
    let mut times: BTreeMap<usize, Duration> = BTreeMap::new();
    for (k, (title, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| f(&mut led))).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        times.insert(k + 1, started.elapsed());
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {title}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {title}: {detail}", k + 1);
            }
        }
    }
    let total: Duration = times.values().sum();
    println!("acceptance: {} passed, {failed} failed in {total:.2?}", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
