use std::fmt::Write;

use crate::model::*;

/// Renders `m` in the concrete syntax accepted by
/// [`parse_model`](super::parse_model). Reparsing the output yields a model
/// equal to `m` up to spans.
pub fn print_model(m: &MachineModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "machine {} {{", m.name);
    if !m.signals.is_empty() {
        let _ = writeln!(out, "  signals {};", m.signals.join(", "));
    }
    if !m.vars.is_empty() {
        let _ = writeln!(out, "  vars {};", m.vars.join(", "));
    }
    for r in &m.root_regions {
        region(&mut out, r, 1);
    }
    for a in m.activities.values() {
        let _ = write!(out, "  activity {} ", a.name);
        block(&mut out, &a.body, 1);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn pad(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn region(out: &mut String, r: &Region, depth: usize) {
    pad(out, depth);
    let _ = writeln!(out, "region {} {{", r.name);
    if let Some(t) = r.initial_transition() {
        pad(out, depth + 1);
        let _ = write!(out, "initial {} -> {}", t.name, t.target);
        if let Some(e) = &t.effect {
            let _ = write!(out, " / {e}");
        }
        out.push_str(";\n");
    }
    for v in &r.vertices {
        match v {
            Vertex::Initial(_) => {}
            Vertex::Final { name, .. } => {
                pad(out, depth + 1);
                let _ = writeln!(out, "final {name};");
            }
            Vertex::State(s) => state(out, s, depth + 1),
        }
    }
    for t in r.transitions.iter().filter(|t| t.source != INITIAL) {
        pad(out, depth + 1);
        match t.kind {
            TransitionKind::Internal => {
                let _ = write!(out, "internal {}: {}", t.name, t.source);
            }
            _ => {
                let _ = write!(out, "transition {}: {} -> {}", t.name, t.source, t.target);
            }
        }
        if let Some(trig) = &t.trigger {
            let _ = write!(out, " on {trig}");
        }
        if let Some(g) = &t.guard {
            let _ = write!(out, " [{} {} {}]", g.var, g.op.symbol(), g.value);
        }
        if let Some(e) = &t.effect {
            let _ = write!(out, " / {e}");
        }
        out.push_str(";\n");
    }
    pad(out, depth);
    out.push_str("}\n");
}

fn state(out: &mut String, s: &State, depth: usize) {
    pad(out, depth);
    let plain = s.entry.is_none() && s.exit.is_none() && s.do_activity.is_none() && s.defer.is_empty() && s.regions.is_empty();
    if plain {
        let _ = writeln!(out, "state {};", s.name);
        return;
    }
    let _ = writeln!(out, "state {} {{", s.name);
    for (kw, slot) in [("entry", &s.entry), ("do", &s.do_activity), ("exit", &s.exit)] {
        if let Some(a) = slot {
            pad(out, depth + 1);
            let _ = writeln!(out, "{kw} {a};");
        }
    }
    if !s.defer.is_empty() {
        pad(out, depth + 1);
        let _ = writeln!(out, "defer {};", s.defer.join(", "));
    }
    for r in &s.regions {
        region(out, r, depth + 1);
    }
    pad(out, depth);
    out.push_str("}\n");
}

fn block(out: &mut String, b: &Block, depth: usize) {
    out.push_str("{\n");
    for n in b {
        pad(out, depth + 1);
        node(out, n, depth + 1);
        out.push('\n');
    }
    pad(out, depth);
    out.push('}');
}

fn assign(a: &Assign) -> String {
    let src = match &a.source {
        Operand::Var(v) => v.clone(),
        Operand::Lit(i) => i.to_string(),
    };
    match a.delta {
        0 => format!("{} := {src}", a.target),
        d if d > 0 => format!("{} := {src} + {d}", a.target),
        d => format!("{} := {src} - {}", a.target, d.unsigned_abs()),
    }
}

fn node(out: &mut String, n: &Node, depth: usize) {
    match &n.kind {
        NodeKind::Task { label: Some(l), assign: Some(a) } => {
            let _ = write!(out, "task {l} with {};", assign(a));
        }
        NodeKind::Task { label: Some(l), assign: None } => {
            let _ = write!(out, "task {l};");
        }
        NodeKind::Task { label: None, assign: Some(a) } => {
            let _ = write!(out, "{};", assign(a));
        }
        NodeKind::Task { label: None, assign: None } => {
            out.push_str("task _;");
        }
        NodeKind::Send { signal, dest } => {
            let d = match dest {
                Destination::Env => "env",
                Destination::SelfTarget => "self",
            };
            let _ = write!(out, "send {signal} to {d};");
        }
        NodeKind::Accept { signals } => {
            let _ = write!(out, "accept {};", signals.join("|"));
        }
        NodeKind::Par { branches } => {
            out.push_str("par ");
            for (i, br) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                block(out, br, depth);
            }
        }
        NodeKind::Final => out.push_str("final;"),
    }
}
