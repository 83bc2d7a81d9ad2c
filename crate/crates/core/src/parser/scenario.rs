use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::lexer::Tok;
use super::{ParseError, Parser};
use crate::model::*;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioStep {
    Inject(Ident),
    /// Barrier: the next injection waits for a stable configuration with
    /// empty pools.
    AwaitStable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expectation {
    /// Dotted state path, e.g. `Active.Wait1`.
    EventuallyActive(String),
    /// Exact sequence of signals sent to the environment.
    Emits(Vec<Ident>),
    NeverDiscards(Ident),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub steps: Vec<ScenarioStep>,
    pub expectations: Vec<Expectation>,
}

impl Scenario {
    pub fn injects(signals: &[&str]) -> Scenario {
        Scenario { steps: signals.iter().map(|s| ScenarioStep::Inject(s.to_string())).collect(), expectations: vec![] }
    }
}

/// Parses a `.scn` file against `model`:
///
/// ```text
/// inject turnOn; await-stable; inject measure;
/// expect eventually-active Active.Wait1;
/// expect emits log1, log2;
/// expect never-discards measure;
/// ```
///
/// The trailing `;` of the last statement is optional.
pub fn parse_scenario(text: &str, model: &MachineModel) -> Result<Scenario, Vec<ParseError>> {
    let mut p = Parser::new(text, "", true);
    let signals: BTreeSet<&str> = model.signals.iter().map(String::as_str).collect();
    let mut paths = BTreeSet::new();
    model.visit_states(|path, _| {
        paths.insert(path.to_string());
    });
    let mut sc = Scenario::default();
    let mut unknown = Vec::new();
    while *p.peek() != Tok::Eof {
        let start = p.pos;
        let res = statement(&mut p, &mut sc, &signals, &paths, &mut unknown);
        if res.is_err() {
            p.recover();
            if p.pos == start {
                p.bump();
            }
        }
    }
    let mut errors = p.errors;
    errors.extend(unknown);
    if errors.is_empty() {
        Ok(sc)
    } else {
        Err(errors)
    }
}

fn end(p: &mut Parser) -> Result<(), super::Bail> {
    if *p.peek() == Tok::Eof {
        return Ok(());
    }
    p.expect(Tok::Semi).map(|_| ())
}

fn statement(
    p: &mut Parser,
    sc: &mut Scenario,
    signals: &BTreeSet<&str>,
    paths: &BTreeSet<String>,
    unknown: &mut Vec<ParseError>,
) -> Result<(), super::Bail> {
    let signal = |p: &mut Parser, unknown: &mut Vec<ParseError>| -> Result<Ident, super::Bail> {
        let (name, span) = p.ident("signal name")?;
        if !signals.contains(name.as_str()) {
            unknown.push(ParseError::UnknownReference { span, message: format!("undeclared signal `{name}`"), name: name.clone() });
        }
        Ok(name)
    };
    if p.at_kw("inject") {
        p.bump();
        let s = signal(p, unknown)?;
        end(p)?;
        sc.steps.push(ScenarioStep::Inject(s));
    } else if p.at_kw("await-stable") {
        p.bump();
        end(p)?;
        sc.steps.push(ScenarioStep::AwaitStable);
    } else if p.at_kw("expect") {
        p.bump();
        if p.at_kw("eventually-active") {
            p.bump();
            let (path, span) = p.ident("state path")?;
            if !paths.contains(&path) {
                unknown.push(ParseError::UnknownReference { span, message: format!("no state at path `{path}`"), name: path.clone() });
            }
            end(p)?;
            sc.expectations.push(Expectation::EventuallyActive(path));
        } else if p.at_kw("emits") {
            p.bump();
            let mut seq = Vec::new();
            if matches!(p.peek(), Tok::Ident(_)) {
                seq.push(signal(p, unknown)?);
                while p.eat(&Tok::Comma) {
                    seq.push(signal(p, unknown)?);
                }
            }
            end(p)?;
            sc.expectations.push(Expectation::Emits(seq));
        } else if p.at_kw("never-discards") {
            p.bump();
            let s = signal(p, unknown)?;
            end(p)?;
            sc.expectations.push(Expectation::NeverDiscards(s));
        } else {
            return p.fail("`eventually-active`, `emits` or `never-discards`");
        }
    } else {
        return p.fail("`inject`, `await-stable` or `expect`");
    }
    Ok(())
}

pub fn print_scenario(sc: &Scenario) -> String {
    let mut out = String::new();
    for s in &sc.steps {
        match s {
            ScenarioStep::Inject(sig) => {
                let _ = writeln!(out, "inject {sig};");
            }
            ScenarioStep::AwaitStable => out.push_str("await-stable;\n"),
        }
    }
    for e in &sc.expectations {
        match e {
            Expectation::EventuallyActive(p) => {
                let _ = writeln!(out, "expect eventually-active {p};");
            }
            Expectation::Emits(seq) => {
                if seq.is_empty() {
                    out.push_str("expect emits;\n");
                } else {
                    let _ = writeln!(out, "expect emits {};", seq.join(", "));
                }
            }
            Expectation::NeverDiscards(s) => {
                let _ = writeln!(out, "expect never-discards {s};");
            }
        }
    }
    out
}
