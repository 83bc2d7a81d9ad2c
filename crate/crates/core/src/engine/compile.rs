//! Flattened, index-addressed view of a validated model.

use std::collections::HashMap;

use crate::model::*;

use super::EngineError;

pub type VId = usize;
pub type RId = usize;
pub type TId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VKind {
    State,
    Final,
    Initial,
}

#[derive(Clone, Debug)]
pub struct VertexInfo {
    pub name: Ident,
    /// Dotted path of state names, region names omitted.
    pub path: String,
    pub kind: VKind,
    pub region: RId,
    /// State owning `region`, if any.
    pub parent: Option<VId>,
    pub entry: Option<Ident>,
    pub exit: Option<Ident>,
    pub do_activity: Option<Ident>,
    pub defer: Vec<Ident>,
    pub regions: Vec<RId>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub struct RegionInfo {
    pub name: Ident,
    /// Owner path and region name joined by `/`; root regions use the bare name.
    pub path: String,
    pub owner: Option<VId>,
    pub vertices: Vec<VId>,
    pub initial: TId,
    pub transitions: Vec<TId>,
}

#[derive(Clone, Debug)]
pub struct TransitionInfo {
    pub name: Ident,
    pub region: RId,
    pub source: VId,
    pub target: VId,
    pub kind: TransitionKind,
    pub trigger: Option<Ident>,
    pub guard: Option<Guard>,
    pub effect: Option<Ident>,
}

#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub model: MachineModel,
    pub vertices: Vec<VertexInfo>,
    pub regions: Vec<RegionInfo>,
    pub transitions: Vec<TransitionInfo>,
    pub root_regions: Vec<RId>,
    by_path: HashMap<String, VId>,
}

impl CompiledModel {
    pub fn new(model: &MachineModel) -> Result<CompiledModel, EngineError> {
        let errors = validate(model);
        if !errors.is_empty() {
            return Err(EngineError::Invalid(errors));
        }
        let mut c = CompiledModel {
            model: model.clone(),
            vertices: vec![],
            regions: vec![],
            transitions: vec![],
            root_regions: vec![],
            by_path: HashMap::new(),
        };
        for r in &model.root_regions {
            let id = c.add_region(r, None, "");
            c.root_regions.push(id);
        }
        for (i, v) in c.vertices.iter().enumerate() {
            if v.kind != VKind::Initial {
                c.by_path.insert(v.path.clone(), i);
            }
        }
        Ok(c)
    }

    fn add_region(&mut self, r: &Region, owner: Option<VId>, prefix: &str) -> RId {
        let rid = self.regions.len();
        let path = if prefix.is_empty() { r.name.clone() } else { format!("{prefix}/{}", r.name) };
        self.regions.push(RegionInfo { name: r.name.clone(), path, owner, vertices: vec![], initial: 0, transitions: vec![] });
        let mut local: HashMap<&str, VId> = HashMap::new();
        for v in &r.vertices {
            let vid = self.vertices.len();
            let (kind, name) = match v {
                Vertex::State(s) => (VKind::State, s.name.clone()),
                Vertex::Final { name, .. } => (VKind::Final, name.clone()),
                Vertex::Initial(_) => (VKind::Initial, INITIAL.to_string()),
            };
            let state = v.as_state();
            self.vertices.push(VertexInfo {
                path: join_path(prefix, &name),
                name,
                kind,
                region: rid,
                parent: owner,
                entry: state.and_then(|s| s.entry.clone()),
                exit: state.and_then(|s| s.exit.clone()),
                do_activity: state.and_then(|s| s.do_activity.clone()),
                defer: state.map(|s| s.defer.clone()).unwrap_or_default(),
                regions: vec![],
                span: v.span().clone(),
            });
            local.insert(v.name(), vid);
            self.regions[rid].vertices.push(vid);
        }
        for t in &r.transitions {
            let tid = self.transitions.len();
            self.transitions.push(TransitionInfo {
                name: t.name.clone(),
                region: rid,
                source: local[t.source.as_str()],
                target: local[t.target.as_str()],
                kind: t.kind,
                trigger: t.trigger.clone(),
                guard: t.guard.clone(),
                effect: t.effect.clone(),
            });
            if t.source == INITIAL {
                self.regions[rid].initial = tid;
            }
            self.regions[rid].transitions.push(tid);
        }
        for v in &r.vertices {
            if let Vertex::State(s) = v {
                let vid = local[s.name.as_str()];
                let path = self.vertices[vid].path.clone();
                for sub in &s.regions {
                    let sr = self.add_region(sub, Some(vid), &path);
                    self.vertices[vid].regions.push(sr);
                }
            }
        }
        rid
    }

    pub fn vertex_by_path(&self, path: &str) -> Option<VId> {
        self.by_path.get(path).copied()
    }

    pub fn activity(&self, name: &str) -> Option<&Activity> {
        self.model.activities.get(name)
    }

    /// True iff `a` lies strictly inside state `b`.
    pub fn is_proper_descendant(&self, a: VId, b: VId) -> bool {
        let mut cur = self.vertices[a].parent;
        while let Some(p) = cur {
            if p == b {
                return true;
            }
            cur = self.vertices[p].parent;
        }
        false
    }

    pub fn depth(&self, v: VId) -> usize {
        let mut d = 0;
        let mut cur = self.vertices[v].parent;
        while let Some(p) = cur {
            d += 1;
            cur = self.vertices[p].parent;
        }
        d
    }

    pub fn has_completion_transition(&self, v: VId) -> bool {
        let r = &self.regions[self.vertices[v].region];
        r.transitions.iter().any(|&t| self.transitions[t].source == v && self.transitions[t].kind == TransitionKind::Completion)
    }

    pub fn is_signal(&self, name: &str) -> bool {
        self.model.signals.iter().any(|s| s == name)
    }
}
