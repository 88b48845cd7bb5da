use serde::Serialize;

use crate::tree::{NodeId, TaskTree};

/// Start time and processor of every node.
///
/// `order` is the dispatch sequence: every node once, sorted by start time.
/// Among nodes starting at the same instant it fixes which happened first,
/// which matters for zero-duration nodes feeding a parent at that instant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub processors: usize,
    pub start: Vec<u64>,
    /// 0-based processor index of each node.
    pub proc: Vec<usize>,
    pub order: Vec<NodeId>,
}

impl Schedule {
    /// Builds a schedule whose dispatch order is `sequence` stably sorted by
    /// start time. `sequence` must list each processor's nodes in execution
    /// order and place every child before its parent.
    pub fn from_sequence(processors: usize, start: Vec<u64>, proc: Vec<usize>, mut sequence: Vec<NodeId>) -> Self {
        sequence.sort_by_key(|v| start[v.index()]);
        Schedule {
            processors,
            start,
            proc,
            order: sequence,
        }
    }

    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }

    pub fn start(&self, v: NodeId) -> u64 {
        self.start[v.index()]
    }

    pub fn finish(&self, tree: &TaskTree, v: NodeId) -> u64 {
        self.start[v.index()] + tree.time(v)
    }

    pub fn makespan(&self, tree: &TaskTree) -> u64 {
        tree.ids().map(|v| self.finish(tree, v)).max().unwrap_or(0)
    }

    /// Text form: one `<node> <start> <processor>` line per node in dispatch
    /// order, node and processor numbered from 1.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# node start processor\n");
        for &v in &self.order {
            out.push_str(&format!("{} {} {}\n", v.number(), self.start[v.index()], self.proc[v.index()] + 1));
        }
        out
    }
}
