//! Program counters over an activity body. A `Par` node forks one frame per
//! branch and joins implicitly once every branch has run off its end.

use serde::{Deserialize, Serialize};

use crate::model::{Block, Node, NodeKind};

/// Alternating `[pc, branch, pc, branch, ..., pc]` indices from the
/// activity root down to one node.
pub type NodePath = Vec<u32>;

pub fn render_path(p: &NodePath) -> String {
    p.iter().map(u32::to_string).collect::<Vec<_>>().join(".")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
struct Frame {
    pc: usize,
    /// Non-empty iff the node at `pc` is a `Par` being executed.
    branches: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exec {
    root: Frame,
    terminated: bool,
}

impl Exec {
    pub fn new(body: &Block) -> Exec {
        let mut e = Exec { root: Frame { pc: 0, branches: vec![] }, terminated: false };
        normalize(&mut e.root, body);
        e
    }

    pub fn done(&self, body: &Block) -> bool {
        self.terminated || self.root.pc >= body.len()
    }

    /// Nodes ready to execute, in path order.
    pub fn positions(&self, body: &Block) -> Vec<NodePath> {
        let mut out = Vec::new();
        if !self.terminated {
            collect(&self.root, body, &mut vec![], &mut out);
        }
        out
    }

    pub fn advance(&mut self, body: &Block, path: &NodePath) {
        let mut f = &mut self.root;
        let mut i = 0;
        while i + 1 < path.len() {
            f = &mut f.branches[path[i + 1] as usize];
            i += 2;
        }
        debug_assert_eq!(f.pc as u32, path[i]);
        f.pc += 1;
        normalize(&mut self.root, body);
    }

    pub fn terminate(&mut self) {
        self.terminated = true;
    }
}

pub fn node_at<'a>(body: &'a Block, path: &NodePath) -> &'a Node {
    let mut block = body;
    let mut i = 0;
    loop {
        let n = &block[path[i] as usize];
        if i + 1 == path.len() {
            return n;
        }
        match &n.kind {
            NodeKind::Par { branches } => block = &branches[path[i + 1] as usize],
            _ => unreachable!("path descends through a non-par node"),
        }
        i += 2;
    }
}

fn collect(f: &Frame, block: &Block, prefix: &mut Vec<u32>, out: &mut Vec<NodePath>) {
    if f.pc >= block.len() {
        return;
    }
    match &block[f.pc].kind {
        NodeKind::Par { branches } => {
            for (i, (sub, b)) in f.branches.iter().zip(branches).enumerate() {
                prefix.push(f.pc as u32);
                prefix.push(i as u32);
                collect(sub, b, prefix, out);
                prefix.pop();
                prefix.pop();
            }
        }
        _ => {
            let mut p = prefix.clone();
            p.push(f.pc as u32);
            out.push(p);
        }
    }
}

fn normalize(f: &mut Frame, block: &Block) {
    while f.pc < block.len() {
        let NodeKind::Par { branches } = &block[f.pc].kind else { return };
        if f.branches.is_empty() {
            f.branches = branches.iter().map(|_| Frame { pc: 0, branches: vec![] }).collect();
        }
        let mut all_done = true;
        for (sub, b) in f.branches.iter_mut().zip(branches) {
            normalize(sub, b);
            all_done &= sub.pc >= b.len();
        }
        if !all_done {
            return;
        }
        f.pc += 1;
        f.branches.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Node;

    fn task(l: &str) -> Node {
        Node::new(NodeKind::Task { label: Some(l.into()), assign: None })
    }

    #[test]
    fn par_forks_and_joins() {
        let body = vec![
            task("a"),
            Node::new(NodeKind::Par { branches: vec![vec![task("b")], vec![task("c"), task("d")]] }),
            task("e"),
        ];
        let mut e = Exec::new(&body);
        assert_eq!(e.positions(&body), vec![vec![0]]);
        e.advance(&body, &vec![0]);
        assert_eq!(e.positions(&body), vec![vec![1, 0, 0], vec![1, 1, 0]]);
        e.advance(&body, &vec![1, 1, 0]);
        e.advance(&body, &vec![1, 0, 0]);
        assert_eq!(e.positions(&body), vec![vec![1, 1, 1]]);
        e.advance(&body, &vec![1, 1, 1]);
        assert_eq!(e.positions(&body), vec![vec![2]]);
        e.advance(&body, &vec![2]);
        assert!(e.done(&body));
    }

    #[test]
    fn empty_body_is_done_at_once() {
        assert!(Exec::new(&vec![]).done(&vec![]));
    }
}
