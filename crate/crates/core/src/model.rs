//! State machine syntax: machines, regions, vertices, transitions and
//! activities, plus well-formedness validation.
//!
//! A [`MachineModel`] is plain data. Every element carries a [`SourceSpan`];
//! structural comparison that ignores spans goes through
//! [`MachineModel::without_spans`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub type Ident = String;

/// Location of an element in its source text. Line and column are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl Default for SourceSpan {
    fn default() -> Self {
        SourceSpan { file: String::new(), line: 1, column: 1, length: 0 }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.file.is_empty() {
            write!(f, "{}:{}", self.line, self.column)
        } else {
            write!(f, "{}:{}:{}", self.file, self.line, self.column)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineModel {
    pub name: Ident,
    pub signals: Vec<Ident>,
    pub vars: Vec<Ident>,
    pub root_regions: Vec<Region>,
    pub activities: BTreeMap<Ident, Activity>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: Ident,
    pub vertices: Vec<Vertex>,
    pub transitions: Vec<Transition>,
    pub span: SourceSpan,
}

/// Name under which the initial pseudostate of every region is addressed.
pub const INITIAL: &str = "initial";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vertex {
    State(State),
    Initial(SourceSpan),
    Final { name: Ident, span: SourceSpan },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub name: Ident,
    pub entry: Option<Ident>,
    pub exit: Option<Ident>,
    pub do_activity: Option<Ident>,
    pub defer: Vec<Ident>,
    pub regions: Vec<Region>,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    External,
    Internal,
    Completion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl CmpOp {
    pub fn eval(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }
}

/// `var op literal`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Guard {
    pub var: Ident,
    pub op: CmpOp,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub name: Ident,
    pub source: Ident,
    pub target: Ident,
    pub kind: TransitionKind,
    pub trigger: Option<Ident>,
    pub guard: Option<Guard>,
    pub effect: Option<Ident>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub name: Ident,
    pub body: Block,
    pub span: SourceSpan,
}

pub type Block = Vec<Node>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Var(Ident),
    Lit(i64),
}

/// `target := source + delta`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assign {
    pub target: Ident,
    pub source: Operand,
    pub delta: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Destination {
    SelfTarget,
    Env,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// At least one of `label` and `assign` is present.
    Task { label: Option<Ident>, assign: Option<Assign> },
    Send { signal: Ident, dest: Destination },
    Accept { signals: Vec<Ident> },
    Par { branches: Vec<Block> },
    Final,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub span: SourceSpan,
}

impl Node {
    pub fn new(kind: NodeKind) -> Self {
        Node { kind, span: SourceSpan::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    Simple,
    CompositeSingle,
    CompositeOrthogonal,
    Final,
    Initial,
}

pub fn classify_vertex(v: &Vertex) -> VertexClass {
    match v {
        Vertex::Initial(_) => VertexClass::Initial,
        Vertex::Final { .. } => VertexClass::Final,
        Vertex::State(s) => match s.regions.len() {
            0 => VertexClass::Simple,
            1 => VertexClass::CompositeSingle,
            _ => VertexClass::CompositeOrthogonal,
        },
    }
}

impl Vertex {
    pub fn name(&self) -> &str {
        match self {
            Vertex::State(s) => &s.name,
            Vertex::Initial(_) => INITIAL,
            Vertex::Final { name, .. } => name,
        }
    }

    pub fn span(&self) -> &SourceSpan {
        match self {
            Vertex::State(s) => &s.span,
            Vertex::Initial(span) => span,
            Vertex::Final { span, .. } => span,
        }
    }

    pub fn as_state(&self) -> Option<&State> {
        match self {
            Vertex::State(s) => Some(s),
            _ => None,
        }
    }
}

impl Region {
    pub fn vertex(&self, name: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.name() == name)
    }

    pub fn initial_transition(&self) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.source == INITIAL)
    }
}

impl MachineModel {
    /// Depth-first visit of every state with its dotted path.
    pub fn visit_states<'a>(&'a self, mut f: impl FnMut(&str, &'a State)) {
        fn walk<'a>(prefix: &str, regions: &'a [Region], f: &mut impl FnMut(&str, &'a State)) {
            for r in regions {
                for v in &r.vertices {
                    if let Vertex::State(s) = v {
                        let path = join_path(prefix, &s.name);
                        f(&path, s);
                        walk(&path, &s.regions, f);
                    }
                }
            }
        }
        walk("", &self.root_regions, &mut f);
    }

    /// Copy with every span reset, for structural comparison.
    pub fn without_spans(&self) -> MachineModel {
        let mut m = self.clone();
        m.span = SourceSpan::default();
        for r in &mut m.root_regions {
            strip_region(r);
        }
        for a in m.activities.values_mut() {
            a.span = SourceSpan::default();
            strip_block(&mut a.body);
        }
        m
    }
}

pub(crate) fn join_path(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn strip_region(r: &mut Region) {
    r.span = SourceSpan::default();
    for t in &mut r.transitions {
        t.span = SourceSpan::default();
    }
    for v in &mut r.vertices {
        match v {
            Vertex::State(s) => {
                s.span = SourceSpan::default();
                for sub in &mut s.regions {
                    strip_region(sub);
                }
            }
            Vertex::Initial(span) => *span = SourceSpan::default(),
            Vertex::Final { span, .. } => *span = SourceSpan::default(),
        }
    }
}

fn strip_block(b: &mut Block) {
    for n in b {
        n.span = SourceSpan::default();
        if let NodeKind::Par { branches } = &mut n.kind {
            for br in branches {
                strip_block(br);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelErrorKind {
    MissingInitial,
    DuplicateInitial,
    InitialWithoutTransition,
    InitialTransitionCount,
    InitialTriggerOrGuard,
    DuplicateVertex,
    SiblingNameClash,
    DuplicateDeclaration,
    UnknownVertex,
    UnknownSignal,
    UnknownVariable,
    UnknownActivity,
    InternalShape,
    CompletionWithTrigger,
    ExternalWithoutTrigger,
    TransitionFromFinal,
    TransitionToInitial,
    EmptyPar,
    FinalNotLast,
    AcceptOutsideDo,
    ConflictingTransitions,
    EmptyAccept,
    EmptyTask,
}

/// A well-formedness violation located by a model path such as
/// `Main/Active/R1/Wait1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelError {
    pub kind: ModelErrorKind,
    pub path: String,
    pub message: String,
    pub span: SourceSpan,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?} at {}: {}", self.span, self.kind, self.path, self.message)
    }
}

struct Validator<'m> {
    model: &'m MachineModel,
    signals: BTreeSet<&'m str>,
    vars: BTreeSet<&'m str>,
    errors: Vec<ModelError>,
}

impl<'m> Validator<'m> {
    fn push(&mut self, kind: ModelErrorKind, path: &str, span: &SourceSpan, message: String) {
        self.errors.push(ModelError { kind, path: path.to_string(), message, span: span.clone() });
    }

    fn signal(&mut self, name: &str, path: &str, span: &SourceSpan) {
        if !self.signals.contains(name) {
            self.push(ModelErrorKind::UnknownSignal, path, span, format!("undeclared signal `{name}`"));
        }
    }

    fn var(&mut self, name: &str, path: &str, span: &SourceSpan) {
        if !self.vars.contains(name) {
            self.push(ModelErrorKind::UnknownVariable, path, span, format!("undeclared variable `{name}`"));
        }
    }

    fn activity_ref(&mut self, name: &Option<Ident>, slot: &str, path: &str, span: &SourceSpan) {
        if let Some(a) = name {
            match self.model.activities.get(a) {
                None => self.push(
                    ModelErrorKind::UnknownActivity,
                    path,
                    span,
                    format!("{slot} refers to undeclared activity `{a}`"),
                ),
                Some(act) if slot != "do" && contains_accept(&act.body) => self.push(
                    ModelErrorKind::AcceptOutsideDo,
                    path,
                    span,
                    format!("{slot} activity `{a}` contains an accept"),
                ),
                Some(_) => {}
            }
        }
    }

    fn region(&mut self, parent: &str, r: &'m Region) {
        let path = format!("{parent}/{}", r.name);
        let mut names = BTreeSet::new();
        let mut initials = 0;
        for v in &r.vertices {
            if !names.insert(v.name()) && !matches!(v, Vertex::Initial(_)) {
                self.push(
                    ModelErrorKind::DuplicateVertex,
                    &path,
                    v.span(),
                    format!("vertex `{}` declared twice", v.name()),
                );
            }
            if matches!(v, Vertex::Initial(_)) {
                initials += 1;
            }
        }
        match initials {
            0 => self.push(ModelErrorKind::MissingInitial, &path, &r.span, "region has no initial pseudostate".into()),
            1 => {}
            _ => self.push(ModelErrorKind::DuplicateInitial, &path, &r.span, "region has several initial pseudostates".into()),
        }

        let from_initial: Vec<&Transition> = r.transitions.iter().filter(|t| t.source == INITIAL).collect();
        if initials > 0 && from_initial.len() != 1 {
            let kind = if from_initial.is_empty() {
                ModelErrorKind::InitialWithoutTransition
            } else {
                ModelErrorKind::InitialTransitionCount
            };
            self.push(kind, &path, &r.span, format!("initial pseudostate has {} outgoing transitions", from_initial.len()));
        }

        for t in &r.transitions {
            self.transition(&path, r, t);
        }
        self.conflicts(&path, r);

        for v in &r.vertices {
            if let Vertex::State(s) = v {
                self.state(&path, s);
            }
        }
    }

    fn transition(&mut self, rpath: &str, r: &Region, t: &Transition) {
        let path = format!("{rpath}/{}", t.name);
        let source = if t.source == INITIAL {
            r.vertices.iter().find(|v| matches!(v, Vertex::Initial(_)))
        } else {
            r.vertex(&t.source)
        };
        match source {
            None => self.push(ModelErrorKind::UnknownVertex, &path, &t.span, format!("unknown source `{}`", t.source)),
            Some(Vertex::Final { .. }) => {
                self.push(ModelErrorKind::TransitionFromFinal, &path, &t.span, "transition leaves a final state".into())
            }
            Some(_) => {}
        }
        match r.vertex(&t.target) {
            None if t.target == INITIAL => {
                self.push(ModelErrorKind::TransitionToInitial, &path, &t.span, "transition targets the initial pseudostate".into())
            }
            None => self.push(ModelErrorKind::UnknownVertex, &path, &t.span, format!("unknown target `{}`", t.target)),
            Some(_) => {}
        }
        if t.source == INITIAL {
            if t.trigger.is_some() || t.guard.is_some() || t.kind == TransitionKind::Internal {
                self.push(ModelErrorKind::InitialTriggerOrGuard, &path, &t.span, "initial transition has a trigger or guard".into());
            }
        } else {
            match t.kind {
                TransitionKind::Internal => {
                    if t.source != t.target || t.trigger.is_none() {
                        self.push(ModelErrorKind::InternalShape, &path, &t.span, "internal transition needs source == target and a trigger".into());
                    }
                }
                TransitionKind::Completion => {
                    if t.trigger.is_some() {
                        self.push(ModelErrorKind::CompletionWithTrigger, &path, &t.span, "completion transition has a trigger".into());
                    }
                }
                TransitionKind::External => {
                    if t.trigger.is_none() {
                        self.push(ModelErrorKind::ExternalWithoutTrigger, &path, &t.span, "external transition has no trigger".into());
                    }
                }
            }
        }
        if let Some(sig) = &t.trigger {
            self.signal(sig, &path, &t.span);
        }
        if let Some(g) = &t.guard {
            self.var(&g.var, &path, &t.span);
        }
        self.activity_ref(&t.effect, "effect", &path, &t.span);
    }

    fn conflicts(&mut self, rpath: &str, r: &Region) {
        let mut seen: BTreeMap<(&str, Option<&str>), &str> = BTreeMap::new();
        for t in &r.transitions {
            if t.source == INITIAL {
                continue;
            }
            let key = (t.source.as_str(), t.trigger.as_deref());
            if let Some(prev) = seen.insert(key, &t.name) {
                let what = t.trigger.as_deref().unwrap_or("completion");
                self.push(
                    ModelErrorKind::ConflictingTransitions,
                    &format!("{rpath}/{}", t.name),
                    &t.span,
                    format!("`{prev}` and `{}` both leave `{}` on {what}", t.name, t.source),
                );
            }
        }
    }

    fn state(&mut self, rpath: &str, s: &'m State) {
        let path = format!("{rpath}/{}", s.name);
        self.activity_ref(&s.entry, "entry", &path, &s.span);
        self.activity_ref(&s.exit, "exit", &path, &s.span);
        self.activity_ref(&s.do_activity, "do", &path, &s.span);
        for d in &s.defer {
            self.signal(d, &path, &s.span);
        }
        let mut names: BTreeMap<&str, &str> = BTreeMap::new();
        for sub in &s.regions {
            for v in &sub.vertices {
                if matches!(v, Vertex::Initial(_)) {
                    continue;
                }
                if let Some(other) = names.insert(v.name(), &sub.name) {
                    if other != sub.name {
                        self.push(
                            ModelErrorKind::SiblingNameClash,
                            &path,
                            v.span(),
                            format!("`{}` appears in sibling regions `{other}` and `{}`", v.name(), sub.name),
                        );
                    }
                }
            }
        }
        let mut rnames = BTreeSet::new();
        for sub in &s.regions {
            if !rnames.insert(&sub.name) {
                self.push(ModelErrorKind::DuplicateDeclaration, &path, &sub.span, format!("region `{}` declared twice", sub.name));
            }
            self.region(&path, sub);
        }
    }

    fn block(&mut self, path: &str, b: &'m Block) {
        for (i, n) in b.iter().enumerate() {
            match &n.kind {
                NodeKind::Task { label, assign } => {
                    if label.is_none() && assign.is_none() {
                        self.push(ModelErrorKind::EmptyTask, path, &n.span, "task without label or assignment".into());
                    }
                    if let Some(a) = assign {
                        self.var(&a.target, path, &n.span);
                        if let Operand::Var(v) = &a.source {
                            self.var(v, path, &n.span);
                        }
                    }
                }
                NodeKind::Send { signal, .. } => self.signal(signal, path, &n.span),
                NodeKind::Accept { signals } => {
                    if signals.is_empty() {
                        self.push(ModelErrorKind::EmptyAccept, path, &n.span, "accept without signals".into());
                    }
                    for s in signals {
                        self.signal(s, path, &n.span);
                    }
                }
                NodeKind::Par { branches } => {
                    if branches.is_empty() {
                        self.push(ModelErrorKind::EmptyPar, path, &n.span, "par without branches".into());
                    }
                    for br in branches {
                        self.block(path, br);
                    }
                }
                NodeKind::Final => {
                    if i + 1 != b.len() {
                        self.push(ModelErrorKind::FinalNotLast, path, &n.span, "final node is not last in its block".into());
                    }
                }
            }
        }
    }
}

pub(crate) fn contains_accept(b: &Block) -> bool {
    b.iter().any(|n| match &n.kind {
        NodeKind::Accept { .. } => true,
        NodeKind::Par { branches } => branches.iter().any(contains_accept),
        _ => false,
    })
}

/// Every well-formedness violation of `model`; empty iff the model is valid.
pub fn validate(model: &MachineModel) -> Vec<ModelError> {
    let mut v = Validator {
        model,
        signals: model.signals.iter().map(String::as_str).collect(),
        vars: model.vars.iter().map(String::as_str).collect(),
        errors: Vec::new(),
    };
    let root = format!("{}", model.name);
    let mut seen = BTreeSet::new();
    for s in &model.signals {
        if !seen.insert(s.as_str()) {
            v.push(ModelErrorKind::DuplicateDeclaration, &root, &model.span, format!("signal `{s}` declared twice"));
        }
    }
    let mut seen = BTreeSet::new();
    for x in &model.vars {
        if !seen.insert(x.as_str()) {
            v.push(ModelErrorKind::DuplicateDeclaration, &root, &model.span, format!("variable `{x}` declared twice"));
        }
    }
    if model.root_regions.is_empty() {
        v.push(ModelErrorKind::MissingInitial, &root, &model.span, "machine has no region".into());
    }
    let mut names: BTreeMap<&str, &str> = BTreeMap::new();
    let mut rnames = BTreeSet::new();
    for r in &model.root_regions {
        if !rnames.insert(&r.name) {
            v.push(ModelErrorKind::DuplicateDeclaration, &root, &r.span, format!("region `{}` declared twice", r.name));
        }
        for vert in &r.vertices {
            if matches!(vert, Vertex::Initial(_)) {
                continue;
            }
            if let Some(other) = names.insert(vert.name(), &r.name) {
                if other != r.name {
                    v.push(
                        ModelErrorKind::SiblingNameClash,
                        &root,
                        vert.span(),
                        format!("`{}` appears in sibling regions `{other}` and `{}`", vert.name(), r.name),
                    );
                }
            }
        }
        v.region(&root, r);
    }
    for a in model.activities.values() {
        let path = format!("{root}/activity {}", a.name);
        v.block(&path, &a.body);
    }
    v.errors
}
