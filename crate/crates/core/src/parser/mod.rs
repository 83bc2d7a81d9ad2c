//! Textual model (`.psm`) and scenario (`.scn`) formats.
//!
//! The model grammar is a small LL(1) language:
//!
//! ```text
//! machine M {
//!   signals a, b;
//!   vars x;
//!   region Main {
//!     initial T0 -> S1;
//!     state S1 { entry A; do B; exit C; defer a; region Inner { ... } }
//!     final Done;
//!     transition T1: S1 -> Done on a [x == 1] / Eff;
//!     internal T2: S1 on b / Eff;
//!     transition T3: S1 -> Done;            // completion transition
//!   }
//!   activity B { task t1; x := x + 1; task t2 with x := 0; send a to env;
//!                accept a|b; par { task p; } and { task q; } final; }
//! }
//! ```
//!
//! Syntax errors are recovered at statement boundaries, so one bad
//! statement yields one error. Dangling names are reported only for inputs
//! that parsed cleanly.

mod lexer;
mod printer;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::*;
use lexer::{lex, Tok, Token};

pub use printer::print_model;
pub use scenario::{parse_scenario, print_scenario, Expectation, Scenario, ScenarioStep};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseError {
    Syntax { span: SourceSpan, expected: String, found: String },
    UnknownReference { span: SourceSpan, name: String, message: String },
    Invalid(ModelError),
}

impl ParseError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            ParseError::Syntax { span, .. } | ParseError::UnknownReference { span, .. } => span,
            ParseError::Invalid(e) => &e.span,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { span, expected, found } => write!(f, "{span}: expected {expected}, found {found}"),
            ParseError::UnknownReference { span, name, message } => write!(f, "{span}: unknown reference `{name}`: {message}"),
            ParseError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub(crate) errors: Vec<ParseError>,
}

/// Marker for an error already recorded; the caller resynchronises.
pub(crate) struct Bail;

type PResult<T> = Result<T, Bail>;

impl Parser {
    pub(crate) fn new(text: &str, file: &str, dotted: bool) -> Self {
        Parser { toks: lex(text, file, dotted), pos: 0, errors: Vec::new() }
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    pub(crate) fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn fail<T>(&mut self, expected: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.errors.push(ParseError::Syntax { span: self.span(), expected: expected.to_string(), found });
        Err(Bail)
    }

    pub(crate) fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.fail(&tok.describe())
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.fail(&format!("`{kw}`"))
        }
    }

    pub(crate) fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => self.fail(what),
        }
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.fail("integer literal"),
        }
    }

    /// Skips to the end of the current statement: past a `;` or a balanced
    /// `{...}` group, or up to an unmatched `}`.
    pub(crate) fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::LBrace => {
                    depth += 1;
                    self.bump();
                }
                Tok::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    self.bump();
                    if depth == 0 {
                        self.eat(&Tok::Semi);
                        return;
                    }
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn ident_list(&mut self, what: &str) -> PResult<Vec<String>> {
        let mut out = vec![self.ident(what)?.0];
        while self.eat(&Tok::Comma) {
            out.push(self.ident(what)?.0);
        }
        Ok(out)
    }

    fn machine(&mut self) -> Option<MachineModel> {
        let start = self.span();
        if self.expect_kw("machine").is_err() {
            return None;
        }
        let name = self.ident("machine name").ok()?.0;
        self.expect(Tok::LBrace).ok()?;
        let mut m = MachineModel {
            name,
            signals: vec![],
            vars: vec![],
            root_regions: vec![],
            activities: BTreeMap::new(),
            span: start,
        };
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => {
                    let _ = self.fail::<()>("`}`");
                    break;
                }
                _ => {}
            }
            let item_start = self.pos;
            let res = self.machine_item(&mut m);
            if res.is_err() {
                self.recover();
                if self.pos == item_start {
                    self.bump();
                }
            }
        }
        if *self.peek() != Tok::Eof {
            let _ = self.fail::<()>("end of input");
        }
        Some(m)
    }

    fn machine_item(&mut self, m: &mut MachineModel) -> PResult<()> {
        if self.at_kw("signals") {
            self.bump();
            m.signals.extend(self.ident_list("signal name")?);
            self.expect(Tok::Semi)?;
        } else if self.at_kw("vars") {
            self.bump();
            m.vars.extend(self.ident_list("variable name")?);
            self.expect(Tok::Semi)?;
        } else if self.at_kw("region") {
            let idx = m.root_regions.len();
            let r = self.region(idx)?;
            m.root_regions.push(r);
        } else if self.at_kw("activity") {
            let a = self.activity()?;
            m.activities.insert(a.name.clone(), a);
        } else {
            return self.fail("`signals`, `vars`, `region` or `activity`");
        }
        Ok(())
    }

    fn region(&mut self, index: usize) -> PResult<Region> {
        let span = self.expect_kw("region")?;
        let name = if let Tok::Ident(s) = self.peek() {
            if is_reserved(s) {
                return self.fail("region name or `{`");
            }
            self.ident("region name")?.0
        } else {
            format!("region{index}")
        };
        self.expect(Tok::LBrace)?;
        let mut r = Region { name, vertices: vec![], transitions: vec![], span };
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return self.fail("`}`"),
                _ => {}
            }
            let item_start = self.pos;
            if self.region_item(&mut r).is_err() {
                self.recover();
                if self.pos == item_start {
                    self.bump();
                }
            }
        }
        Ok(r)
    }

    fn region_item(&mut self, r: &mut Region) -> PResult<()> {
        let span = self.span();
        if self.at_kw("initial") {
            self.bump();
            let name = if matches!(self.peek(), Tok::Ident(_)) { self.ident("transition name")?.0 } else { "init".to_string() };
            self.expect(Tok::Arrow)?;
            let target = self.ident("target state")?.0;
            let effect = if self.eat(&Tok::Slash) { Some(self.ident("effect activity")?.0) } else { None };
            self.expect(Tok::Semi)?;
            r.vertices.push(Vertex::Initial(span.clone()));
            r.transitions.push(Transition {
                name,
                source: INITIAL.into(),
                target,
                kind: TransitionKind::Completion,
                trigger: None,
                guard: None,
                effect,
                span,
            });
        } else if self.at_kw("state") {
            let s = self.state()?;
            r.vertices.push(Vertex::State(s));
        } else if self.at_kw("final") {
            self.bump();
            let name = self.ident("final state name")?.0;
            self.expect(Tok::Semi)?;
            r.vertices.push(Vertex::Final { name, span });
        } else if self.at_kw("transition") {
            self.bump();
            let name = self.ident("transition name")?.0;
            self.expect(Tok::Colon)?;
            let source = self.ident("source state")?.0;
            self.expect(Tok::Arrow)?;
            let target = self.ident("target state")?.0;
            let trigger = if self.at_kw("on") {
                self.bump();
                Some(self.ident("trigger signal")?.0)
            } else {
                None
            };
            let guard = self.guard()?;
            let effect = if self.eat(&Tok::Slash) { Some(self.ident("effect activity")?.0) } else { None };
            self.expect(Tok::Semi)?;
            let kind = if trigger.is_some() { TransitionKind::External } else { TransitionKind::Completion };
            r.transitions.push(Transition { name, source, target, kind, trigger, guard, effect, span });
        } else if self.at_kw("internal") {
            self.bump();
            let name = self.ident("transition name")?.0;
            self.expect(Tok::Colon)?;
            let source = self.ident("source state")?.0;
            self.expect_kw("on")?;
            let trigger = Some(self.ident("trigger signal")?.0);
            let guard = self.guard()?;
            let effect = if self.eat(&Tok::Slash) { Some(self.ident("effect activity")?.0) } else { None };
            self.expect(Tok::Semi)?;
            r.transitions.push(Transition {
                name,
                target: source.clone(),
                source,
                kind: TransitionKind::Internal,
                trigger,
                guard,
                effect,
                span,
            });
        } else {
            return self.fail("`initial`, `state`, `final`, `transition` or `internal`");
        }
        Ok(())
    }

    fn guard(&mut self) -> PResult<Option<Guard>> {
        if !self.eat(&Tok::LBracket) {
            return Ok(None);
        }
        let var = self.ident("guard variable")?.0;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            _ => return self.fail("`==`, `!=`, `<` or `>`"),
        };
        self.bump();
        let value = self.int()?;
        self.expect(Tok::RBracket)?;
        Ok(Some(Guard { var, op, value }))
    }

    fn state(&mut self) -> PResult<State> {
        let span = self.expect_kw("state")?;
        let name = self.ident("state name")?.0;
        let mut s = State { name, entry: None, exit: None, do_activity: None, defer: vec![], regions: vec![], span };
        if self.eat(&Tok::Semi) {
            return Ok(s);
        }
        self.expect(Tok::LBrace)?;
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return self.fail("`}`"),
                _ => {}
            }
            let item_start = self.pos;
            if self.state_item(&mut s).is_err() {
                self.recover();
                if self.pos == item_start {
                    self.bump();
                }
            }
        }
        self.eat(&Tok::Semi);
        Ok(s)
    }

    fn state_item(&mut self, s: &mut State) -> PResult<()> {
        if self.at_kw("entry") || self.at_kw("exit") || self.at_kw("do") {
            let kw = match self.bump().tok {
                Tok::Ident(k) => k,
                _ => unreachable!(),
            };
            let a = self.ident("activity name")?.0;
            self.expect(Tok::Semi)?;
            let slot = match kw.as_str() {
                "entry" => &mut s.entry,
                "exit" => &mut s.exit,
                _ => &mut s.do_activity,
            };
            *slot = Some(a);
        } else if self.at_kw("defer") {
            self.bump();
            s.defer.extend(self.ident_list("signal name")?);
            self.expect(Tok::Semi)?;
        } else if self.at_kw("region") {
            let idx = s.regions.len();
            let r = self.region(idx)?;
            s.regions.push(r);
        } else {
            return self.fail("`entry`, `exit`, `do`, `defer` or `region`");
        }
        Ok(())
    }

    fn activity(&mut self) -> PResult<Activity> {
        let span = self.expect_kw("activity")?;
        let name = self.ident("activity name")?.0;
        let body = self.block()?;
        self.eat(&Tok::Semi);
        Ok(Activity { name, body, span })
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return self.fail("`}`"),
                _ => {}
            }
            let item_start = self.pos;
            match self.stmt() {
                Ok(n) => body.push(n),
                Err(Bail) => {
                    self.recover();
                    if self.pos == item_start {
                        self.bump();
                    }
                }
            }
        }
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Node> {
        let span = self.span();
        let kind = if self.at_kw("task") {
            self.bump();
            let label = self.ident("task label")?.0;
            let assign = if self.at_kw("with") {
                self.bump();
                Some(self.assign()?)
            } else {
                None
            };
            self.expect(Tok::Semi)?;
            NodeKind::Task { label: Some(label), assign }
        } else if self.at_kw("send") {
            self.bump();
            let signal = self.ident("signal name")?.0;
            self.expect_kw("to")?;
            let dest = if self.at_kw("env") {
                Destination::Env
            } else if self.at_kw("self") {
                Destination::SelfTarget
            } else {
                return self.fail("`env` or `self`");
            };
            self.bump();
            self.expect(Tok::Semi)?;
            NodeKind::Send { signal, dest }
        } else if self.at_kw("accept") {
            self.bump();
            let mut signals = vec![self.ident("signal name")?.0];
            while self.eat(&Tok::Pipe) {
                signals.push(self.ident("signal name")?.0);
            }
            self.expect(Tok::Semi)?;
            NodeKind::Accept { signals }
        } else if self.at_kw("par") {
            self.bump();
            let mut branches = vec![self.block()?];
            while self.at_kw("and") {
                self.bump();
                branches.push(self.block()?);
            }
            self.eat(&Tok::Semi);
            NodeKind::Par { branches }
        } else if self.at_kw("final") {
            self.bump();
            self.expect(Tok::Semi)?;
            NodeKind::Final
        } else if matches!(self.peek(), Tok::Ident(s) if !is_reserved(s)) {
            let a = self.assign()?;
            self.expect(Tok::Semi)?;
            NodeKind::Task { label: None, assign: Some(a) }
        } else {
            return self.fail("`task`, `send`, `accept`, `par`, `final` or an assignment");
        };
        Ok(Node { kind, span })
    }

    fn assign(&mut self) -> PResult<Assign> {
        let target = self.ident("variable name")?.0;
        self.expect(Tok::Assign)?;
        let source = match self.peek().clone() {
            Tok::Ident(v) if !is_reserved(&v) => {
                self.bump();
                Operand::Var(v)
            }
            Tok::Int(_) | Tok::Minus => Operand::Lit(self.int()?),
            _ => return self.fail("variable or integer"),
        };
        let delta = if self.eat(&Tok::Plus) {
            self.int()?
        } else if self.eat(&Tok::Minus) {
            -self.int()?
        } else {
            0
        };
        Ok(Assign { target, source, delta })
    }
}

const RESERVED: &[&str] = &[
    "machine", "signals", "vars", "region", "initial", "state", "final", "transition", "internal", "on", "entry", "exit",
    "do", "defer", "activity", "task", "with", "send", "to", "env", "self", "accept", "par", "and",
];

pub(crate) fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s)
}

/// Parses a `.psm` model. On success the model passes [`validate`].
pub fn parse_model(text: &str) -> Result<MachineModel, Vec<ParseError>> {
    parse_model_file(text, "")
}

/// As [`parse_model`], tagging spans with `file`.
pub fn parse_model_file(text: &str, file: &str) -> Result<MachineModel, Vec<ParseError>> {
    let mut p = Parser::new(text, file, false);
    let m = p.machine();
    if !p.errors.is_empty() {
        return Err(p.errors);
    }
    let m = m.expect("machine parsed without errors");
    let errors: Vec<ParseError> = validate(&m)
        .into_iter()
        .map(|e| match e.kind {
            ModelErrorKind::UnknownSignal
            | ModelErrorKind::UnknownVertex
            | ModelErrorKind::UnknownActivity
            | ModelErrorKind::UnknownVariable => ParseError::UnknownReference {
                span: e.span.clone(),
                name: e.message.split('`').nth(1).unwrap_or_default().to_string(),
                message: e.message,
            },
            _ => ParseError::Invalid(e),
        })
        .collect();
    if errors.is_empty() {
        Ok(m)
    } else {
        Err(errors)
    }
}
