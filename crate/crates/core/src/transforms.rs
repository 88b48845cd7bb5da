//! Tree rewrites that simplify memory accounting: execution files become
//! zero-time leaves, and nodes whose output outgrows their inputs receive a
//! leaf making up the difference. Schedules move between the two trees.

use std::collections::HashSet;

use thiserror::Error;

use crate::schedule::Schedule;
use crate::tree::{NodeId, TaskTree, Weights};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("the reduction transform requires every execution file to be empty; node {0} has one")]
    ExecFilesPresent(NodeId),
    #[error("schedule covers {got} nodes but the transformed tree has {expected}")]
    ScheduleMismatch { expected: usize, got: usize },
    #[error("mapping file line {line}: {message}")]
    MalformedMap { line: usize, message: String },
}

/// Relates a transformed tree to the original one. Retained nodes keep their
/// ids; added leaves follow them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformMap {
    /// Added leaves, in id order.
    pub added: Vec<NodeId>,
    /// Original node for each transformed node, `None` for added leaves.
    pub origin: Vec<Option<NodeId>>,
}

impl TransformMap {
    pub fn identity(n: usize) -> Self {
        TransformMap {
            added: Vec::new(),
            origin: (0..n).map(|i| Some(NodeId::from_index(i))).collect(),
        }
    }

    pub fn transformed_len(&self) -> usize {
        self.origin.len()
    }

    pub fn original_len(&self) -> usize {
        self.origin.len() - self.added.len()
    }

    pub fn is_added(&self, v: NodeId) -> bool {
        self.origin[v.index()].is_none()
    }

    /// Map of `second` applied after `self`.
    pub fn then(&self, second: &TransformMap) -> TransformMap {
        let origin: Vec<Option<NodeId>> = second
            .origin
            .iter()
            .map(|o| o.and_then(|mid| self.origin[mid.index()]))
            .collect();
        let added = (0..origin.len())
            .filter(|&i| origin[i].is_none())
            .map(NodeId::from_index)
            .collect();
        TransformMap { added, origin }
    }

    /// Two-column text: transformed id, then original id or 0 for an added
    /// leaf.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# transformed original\n");
        for (i, o) in self.origin.iter().enumerate() {
            out.push_str(&format!("{} {}\n", i + 1, o.map_or(0, NodeId::number)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TransformError> {
        let mut origin = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let bad = |message: &str| TransformError::MalformedMap {
                line,
                message: message.to_string(),
            };
            let fields: Vec<&str> = s.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(bad("expected two columns"));
            }
            let ids: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("non-numeric id"))?;
            if ids[0] != origin.len() + 1 {
                return Err(bad("transformed ids must be listed as 1, 2, 3, ..."));
            }
            let o = NodeId::from_number(ids[1]);
            if let Some(o) = o {
                if !seen.insert(o) {
                    return Err(bad("original id mapped twice"));
                }
            }
            origin.push(o);
        }
        let added = (0..origin.len())
            .filter(|&i| origin[i].is_none())
            .map(NodeId::from_index)
            .collect();
        Ok(TransformMap { added, origin })
    }
}

/// Appends one zero-time leaf per `(parent, output)` request; requests are
/// in ascending parent order.
fn with_added_leaves(tree: &TaskTree, mut weights: Vec<Weights>, leaves: &[(NodeId, u64)]) -> (TaskTree, TransformMap) {
    let n = tree.len();
    let mut parents: Vec<Option<NodeId>> = tree.ids().map(|v| tree.parent(v)).collect();
    for &(parent, out) in leaves {
        parents.push(Some(parent));
        weights.push(Weights::new(0, 0, out));
    }
    let out = TaskTree::from_parents(&parents, &weights).expect("adding leaves keeps a tree");
    let mut map = TransformMap::identity(n);
    for i in n..out.len() {
        map.added.push(NodeId::from_index(i));
        map.origin.push(None);
    }
    (out, map)
}

/// Moves every execution file into a zero-time leaf child of the same size.
pub fn eliminate_execution_files(tree: &TaskTree) -> (TaskTree, TransformMap) {
    let mut weights: Vec<Weights> = tree.ids().map(|v| tree.weights(v)).collect();
    let mut leaves = Vec::new();
    for v in tree.ids() {
        let exec = tree.exec_size(v);
        if exec > 0 {
            leaves.push((v, exec));
            weights[v.index()].exec_size = 0;
        }
    }
    with_added_leaves(tree, weights, &leaves)
}

/// Gives every node whose output exceeds its inputs a zero-time leaf child
/// carrying the difference.
pub fn to_reduction_tree(tree: &TaskTree) -> Result<(TaskTree, TransformMap), TransformError> {
    if let Some(v) = tree.ids().find(|&v| tree.exec_size(v) > 0) {
        return Err(TransformError::ExecFilesPresent(v));
    }
    let weights: Vec<Weights> = tree.ids().map(|v| tree.weights(v)).collect();
    let leaves: Vec<(NodeId, u64)> = tree
        .ids()
        .filter(|&v| !tree.is_leaf(v))
        .filter_map(|v| {
            let gap = tree.out_size(v).saturating_sub(tree.inputs(v));
            (gap > 0).then_some((v, gap))
        })
        .collect();
    Ok(with_added_leaves(tree, weights, &leaves))
}

/// Both rewrites in sequence, with the composed map.
pub fn normalize_for_memory_limit(tree: &TaskTree) -> (TaskTree, TransformMap) {
    let (flat, first) = eliminate_execution_files(tree);
    let (reduced, second) = to_reduction_tree(&flat).expect("execution files were eliminated");
    (reduced, first.then(&second))
}

/// Drops the added leaves; retained nodes keep their start and processor.
pub fn lift_schedule(sched: &Schedule, map: &TransformMap) -> Result<Schedule, TransformError> {
    if sched.len() != map.transformed_len() {
        return Err(TransformError::ScheduleMismatch {
            expected: map.transformed_len(),
            got: sched.len(),
        });
    }
    let n = map.original_len();
    let mut start = vec![0; n];
    let mut proc = vec![0; n];
    for (i, o) in map.origin.iter().enumerate() {
        if let Some(o) = o {
            start[o.index()] = sched.start[i];
            proc[o.index()] = sched.proc[i];
        }
    }
    let order = sched.order.iter().filter_map(|v| map.origin[v.index()]).collect();
    Ok(Schedule {
        processors: sched.processors,
        start,
        proc,
        order,
    })
}

/// Inverse direction of [`lift_schedule`]: each added leaf runs on its
/// parent's processor at the parent's start, dispatched just before it.
pub fn extend_schedule(sched: &Schedule, transformed: &TaskTree, map: &TransformMap) -> Result<Schedule, TransformError> {
    if sched.len() != map.original_len() {
        return Err(TransformError::ScheduleMismatch {
            expected: map.original_len(),
            got: sched.len(),
        });
    }
    let mut to_new = vec![NodeId::from_index(0); map.original_len()];
    for (i, o) in map.origin.iter().enumerate() {
        if let Some(o) = o {
            to_new[o.index()] = NodeId::from_index(i);
        }
    }
    let m = map.transformed_len();
    let mut start = vec![0; m];
    let mut proc = vec![0; m];
    let mut order = Vec::with_capacity(m);
    for &v in &sched.order {
        let nv = to_new[v.index()];
        for &c in transformed.children(nv) {
            if map.is_added(c) {
                start[c.index()] = sched.start(v);
                proc[c.index()] = sched.proc[v.index()];
                order.push(c);
            }
        }
        start[nv.index()] = sched.start(v);
        proc[nv.index()] = sched.proc[v.index()];
        order.push(nv);
    }
    Ok(Schedule {
        processors: sched.processors,
        start,
        proc,
        order,
    })
}
