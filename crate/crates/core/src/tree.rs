//! Task-tree data model and the line-oriented tree file format.
//!
//! A tree file holds one node per line, `<id> <parent-id> <time> <exec> <out>`,
//! where parent-id `0` marks the root and lines starting with `#` are
//! comments. Node ids must be exactly `1..=n`.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Identifier of a node inside a [`TaskTree`].
///
/// Stored as a dense 0-based index; rendered 1-based everywhere a human or a
/// file sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    /// Builds an id from its 0-based index.
    pub fn from_index(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("node index exceeds u32"))
    }

    /// Builds an id from the 1-based number used in files.
    pub fn from_number(number: usize) -> Option<Self> {
        number.checked_sub(1).map(Self::from_index)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 1-based number of the node.
    pub fn number(self) -> usize {
        self.0 as usize + 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl serde::Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.number() as u64)
    }
}

/// Per-node weights: processing time, execution-file size and output-file size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Weights {
    pub time: u64,
    pub exec_size: u64,
    pub out_size: u64,
}

impl Weights {
    pub const fn new(time: u64, exec_size: u64, out_size: u64) -> Self {
        Weights {
            time,
            exec_size,
            out_size,
        }
    }

    /// Unit task of the pebble-game model.
    pub const PEBBLE: Weights = Weights::new(1, 0, 1);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub weights: Weights,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate node id {id}")]
    DuplicateId { line: usize, id: usize },
    #[error("line {line}: node {id} references unknown parent {parent}")]
    UnknownParent { line: usize, id: usize, parent: usize },
    #[error("node ids must be exactly 1..={expected}; id {missing} is missing")]
    MissingId { expected: usize, missing: usize },
    #[error("no root node (every node has a parent)")]
    MissingRoot,
    #[error("line {line}: node {id} is a second root (first root is node {first})")]
    MultipleRoots { line: usize, id: usize, first: usize },
    #[error("line {line}: node {id} lies on a parent cycle")]
    Cycle { line: usize, id: usize },
    #[error("tree is empty")]
    Empty,
    #[error("unknown node id {0}")]
    UnknownNode(usize),
}

/// Immutable in-tree of tasks. Children complete before their parent starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTree {
    nodes: Vec<NodeRecord>,
    root: NodeId,
}

impl TaskTree {
    /// Builds a tree from per-node parent links and weights, validating that
    /// the links form a single in-tree. Children keep the order in which they
    /// appear in `parents`.
    pub fn from_parents(parents: &[Option<NodeId>], weights: &[Weights]) -> Result<Self, TreeError> {
        assert_eq!(parents.len(), weights.len(), "parents/weights length mismatch");
        let lines: Vec<usize> = (1..=parents.len()).collect();
        Self::assemble(parents, weights, &lines, &(0..parents.len()).collect::<Vec<_>>())
    }

    /// `line_of[i]` is the source line of node `i`; `appearance` lists node
    /// indices in source order and fixes the order of each children list.
    fn assemble(
        parents: &[Option<NodeId>],
        weights: &[Weights],
        line_of: &[usize],
        appearance: &[usize],
    ) -> Result<Self, TreeError> {
        let n = parents.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        let mut root: Option<usize> = None;
        for &i in appearance {
            match parents[i] {
                None => {
                    if let Some(first) = root {
                        return Err(TreeError::MultipleRoots {
                            line: line_of[i],
                            id: i + 1,
                            first: first + 1,
                        });
                    }
                    root = Some(i);
                }
                Some(p) if p.index() >= n => {
                    return Err(TreeError::UnknownParent {
                        line: line_of[i],
                        id: i + 1,
                        parent: p.number(),
                    })
                }
                Some(_) => {}
            }
        }

        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for &i in appearance {
            if let Some(p) = parents[i] {
                children[p.index()].push(NodeId::from_index(i));
            }
        }

        // Every node must be reachable from the root; the unreached ones sit
        // on a cycle (or hang below one).
        let mut reached = vec![false; n];
        let Some(root) = root else {
            return Err(TreeError::MissingRoot);
        };
        let mut queue = VecDeque::from([root]);
        reached[root] = true;
        while let Some(v) = queue.pop_front() {
            for c in &children[v] {
                if !reached[c.index()] {
                    reached[c.index()] = true;
                    queue.push_back(c.index());
                }
            }
        }
        if let Some(&bad) = appearance
            .iter()
            .filter(|&&i| !reached[i])
            .min_by_key(|&&i| line_of[i])
        {
            // report a node that is itself on the cycle
            let mut seen = vec![false; n];
            let mut v = bad;
            while !seen[v] {
                seen[v] = true;
                v = parents[v].expect("unreached node has a parent").index();
            }
            return Err(TreeError::Cycle {
                line: line_of[v],
                id: v + 1,
            });
        }

        let nodes = (0..n)
            .map(|i| NodeRecord {
                parent: parents[i],
                children: std::mem::take(&mut children[i]),
                weights: weights[i],
            })
            .collect();
        Ok(TaskTree {
            nodes,
            root: NodeId::from_index(root),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &NodeRecord {
        &self.nodes[id.index()]
    }

    /// Checked lookup for ids coming from outside the library.
    pub fn get(&self, id: NodeId) -> Result<&NodeRecord, TreeError> {
        self.nodes.get(id.index()).ok_or(TreeError::UnknownNode(id.number()))
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator + '_ {
        (0..self.nodes.len()).map(NodeId::from_index)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.index()].children
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.index()].children.is_empty()
    }

    pub fn weights(&self, id: NodeId) -> Weights {
        self.nodes[id.index()].weights
    }

    pub fn time(&self, id: NodeId) -> u64 {
        self.nodes[id.index()].weights.time
    }

    pub fn exec_size(&self, id: NodeId) -> u64 {
        self.nodes[id.index()].weights.exec_size
    }

    pub fn out_size(&self, id: NodeId) -> u64 {
        self.nodes[id.index()].weights.out_size
    }

    /// Total size of the input files of `id`: the outputs of its children.
    pub fn inputs(&self, id: NodeId) -> u64 {
        self.children(id).iter().map(|&c| self.out_size(c)).sum()
    }

    /// Memory held while `id` executes: its inputs, execution file and output.
    pub fn node_memory(&self, id: NodeId) -> u64 {
        self.inputs(id) + self.exec_size(id) + self.out_size(id)
    }

    pub fn checked_inputs(&self, id: NodeId) -> Result<u64, TreeError> {
        self.get(id)?;
        Ok(self.inputs(id))
    }

    pub fn checked_node_memory(&self, id: NodeId) -> Result<u64, TreeError> {
        self.get(id)?;
        Ok(self.node_memory(id))
    }

    pub fn total_time(&self) -> u64 {
        self.nodes.iter().map(|r| r.weights.time).sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|r| r.children.is_empty()).count()
    }

    /// Nodes in breadth-first order from the root; every parent precedes its
    /// children, so the reverse is a valid bottom-up processing order.
    pub fn top_down(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.len());
        order.push(self.root);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            order.extend_from_slice(self.children(v));
        }
        order
    }

    /// Number of nodes in each subtree.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1usize; self.len()];
        for v in self.top_down().into_iter().rev() {
            if let Some(p) = self.parent(v) {
                size[p.index()] += size[v.index()];
            }
        }
        size
    }

    /// Total processing time of each subtree.
    pub fn subtree_work(&self) -> Vec<u64> {
        let mut work: Vec<u64> = self.nodes.iter().map(|r| r.weights.time).collect();
        for v in self.top_down().into_iter().rev() {
            if let Some(p) = self.parent(v) {
                work[p.index()] += work[v.index()];
            }
        }
        work
    }

    /// Whether every inner node's output is no larger than its inputs.
    pub fn is_reduction_tree(&self) -> bool {
        self.ids()
            .all(|v| self.is_leaf(v) || self.out_size(v) <= self.inputs(v))
    }

    pub fn has_exec_files(&self) -> bool {
        self.nodes.iter().any(|r| r.weights.exec_size > 0)
    }

    /// Parses the tree file format.
    pub fn parse(text: &str) -> Result<Self, TreeError> {
        struct Line {
            line: usize,
            id: usize,
            parent: usize,
            weights: Weights,
        }
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(TreeError::Malformed {
                    line,
                    message: format!("expected 5 fields, found {}", fields.len()),
                });
            }
            let mut values = [0u64; 5];
            for (slot, field) in values.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| TreeError::Malformed {
                    line,
                    message: format!("`{field}` is not a nonnegative integer"),
                })?;
            }
            if values[0] == 0 {
                return Err(TreeError::Malformed {
                    line,
                    message: "node id 0 is reserved for `no parent`".into(),
                });
            }
            entries.push(Line {
                line,
                id: values[0] as usize,
                parent: values[1] as usize,
                weights: Weights::new(values[2], values[3], values[4]),
            });
        }

        let n = entries.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        let mut slot_line: Vec<Option<usize>> = vec![None; n];
        let mut parents = vec![None; n];
        let mut weights = vec![Weights::default(); n];
        let mut appearance = Vec::with_capacity(n);
        for e in &entries {
            if e.id > n {
                // an id past n means some id in 1..=n is absent (or duplicated)
                if let Some(dup) = find_duplicate(&entries.iter().map(|x| (x.line, x.id)).collect::<Vec<_>>()) {
                    return Err(dup);
                }
                let missing = (1..=n)
                    .find(|k| !entries.iter().any(|x| x.id == *k))
                    .unwrap_or(n);
                return Err(TreeError::MissingId { expected: n, missing });
            }
            let i = e.id - 1;
            if slot_line[i].is_some() {
                return Err(TreeError::DuplicateId {
                    line: e.line,
                    id: e.id,
                });
            }
            if e.parent > n {
                return Err(TreeError::UnknownParent {
                    line: e.line,
                    id: e.id,
                    parent: e.parent,
                });
            }
            if e.parent == e.id {
                return Err(TreeError::Cycle {
                    line: e.line,
                    id: e.id,
                });
            }
            slot_line[i] = Some(e.line);
            parents[i] = NodeId::from_number(e.parent);
            weights[i] = e.weights;
            appearance.push(i);
        }
        let line_of: Vec<usize> = slot_line.into_iter().map(|l| l.unwrap_or(0)).collect();
        Self::assemble(&parents, &weights, &line_of, &appearance)
    }

    /// Serializes to the tree file format, nodes in ascending id order.
    pub fn to_text(&self) -> String {
        self.to_text_with_header(&[])
    }

    /// Like [`TaskTree::to_text`], prefixed by `#` comment lines.
    pub fn to_text_with_header(&self, header: &[String]) -> String {
        let mut out = String::with_capacity(self.len() * 16);
        for h in header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        for v in self.ids() {
            let r = self.node(v);
            let parent = r.parent.map_or(0, NodeId::number);
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                v.number(),
                parent,
                r.weights.time,
                r.weights.exec_size,
                r.weights.out_size
            ));
        }
        out
    }
}

fn find_duplicate(ids: &[(usize, usize)]) -> Option<TreeError> {
    let mut seen = std::collections::HashSet::new();
    ids.iter().find_map(|&(line, id)| {
        (!seen.insert(id)).then_some(TreeError::DuplicateId { line, id })
    })
}

/// Incremental top-down construction: every node is attached to an existing
/// parent, so the result is a valid tree by construction. Ids are assigned in
/// insertion order, the first node being the root.
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    parents: Vec<Option<NodeId>>,
    weights: Vec<Weights>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_root(weights: Weights) -> (Self, NodeId) {
        let mut b = Self::new();
        let root = b.push(None, weights);
        (b, root)
    }

    /// Adds a child of `parent`.
    pub fn add(&mut self, parent: NodeId, weights: Weights) -> NodeId {
        assert!(parent.index() < self.parents.len(), "unknown parent {parent}");
        self.push(Some(parent), weights)
    }

    /// Adds a chain of `len` nodes below `parent`, returning them top to bottom.
    pub fn add_chain(&mut self, parent: NodeId, len: usize, weights: Weights) -> Vec<NodeId> {
        let mut chain = Vec::with_capacity(len);
        let mut at = parent;
        for _ in 0..len {
            at = self.add(at, weights);
            chain.push(at);
        }
        chain
    }

    fn push(&mut self, parent: Option<NodeId>, weights: Weights) -> NodeId {
        assert!(
            parent.is_some() || self.parents.is_empty(),
            "only the first node may be a root"
        );
        self.parents.push(parent);
        self.weights.push(weights);
        NodeId::from_index(self.parents.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn build(self) -> TaskTree {
        TaskTree::from_parents(&self.parents, &self.weights).expect("builder always yields a tree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(k: usize) -> NodeId {
        NodeId::from_number(k).unwrap()
    }

    #[test]
    fn parses_three_node_fork() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 1 0 1\n3 1 1 0 1").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.root(), id(1));
        assert_eq!(t.children(id(1)), &[id(2), id(3)]);
        assert!(t.is_leaf(id(2)) && t.is_leaf(id(3)));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let t = TaskTree::parse("# header\n\n2 1 4 0 2\n# mid\n1 0 1 1 1\n").unwrap();
        assert_eq!(t.root(), id(1));
        assert_eq!(t.weights(id(2)), Weights::new(4, 0, 2));
    }

    #[test]
    fn two_node_cycle_is_reported() {
        let err = TaskTree::parse("1 0 1 0 1\n2 3 1 0 1\n3 2 1 0 1").unwrap_err();
        assert!(matches!(err, TreeError::Cycle { line: 2 | 3, .. }), "{err:?}");
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let err = TaskTree::parse("1 0 1 0 1\n2 2 1 0 1").unwrap_err();
        assert_eq!(err, TreeError::Cycle { line: 2, id: 2 });
    }

    #[test]
    fn structural_errors_carry_line_numbers() {
        assert_eq!(
            TaskTree::parse("1 0 1 0 1\n1 0 1 0 1").unwrap_err(),
            TreeError::DuplicateId { line: 2, id: 1 }
        );
        assert_eq!(
            TaskTree::parse("1 0 1 0 1\n2 0 1 0 1").unwrap_err(),
            TreeError::MultipleRoots { line: 2, id: 2, first: 1 }
        );
        assert_eq!(
            TaskTree::parse("1 2 1 0 1\n2 1 1 0 1").unwrap_err(),
            TreeError::MissingRoot
        );
        assert!(matches!(
            TaskTree::parse("1 0 1 0\n").unwrap_err(),
            TreeError::Malformed { line: 1, .. }
        ));
        assert!(matches!(
            TaskTree::parse("1 0 1 0 -1\n").unwrap_err(),
            TreeError::Malformed { line: 1, .. }
        ));
        assert_eq!(
            TaskTree::parse("1 0 1 0 1\n2 7 1 0 1").unwrap_err(),
            TreeError::UnknownParent { line: 2, id: 2, parent: 7 }
        );
        assert_eq!(
            TaskTree::parse("1 0 1 0 1\n3 1 1 0 1").unwrap_err(),
            TreeError::MissingId { expected: 2, missing: 2 }
        );
        assert_eq!(TaskTree::parse("# nothing\n").unwrap_err(), TreeError::Empty);
    }

    #[test]
    fn inputs_and_node_memory() {
        let (mut b2, root) = TreeBuilder::with_root(Weights::new(1, 2, 5));
        b2.add(root, Weights::new(1, 0, 3));
        b2.add(root, Weights::new(1, 0, 4));
        let t = b2.build();
        assert_eq!(t.inputs(root), 7);
        assert_eq!(t.node_memory(root), 14);
        assert_eq!(t.inputs(id(2)), 0);

        let single = TreeBuilder::with_root(Weights::new(2, 1, 3)).0.build();
        assert_eq!(single.node_memory(single.root()), 4);
        assert_eq!(single.checked_inputs(id(9)), Err(TreeError::UnknownNode(9)));
    }

    #[test]
    fn serialization_is_ascending_and_round_trips() {
        let t = TaskTree::parse("3 1 1 0 1\n1 0 5 2 0\n2 1 1 0 1\n").unwrap();
        let text = t.to_text();
        assert_eq!(text, "1 0 5 2 0\n2 1 1 0 1\n3 1 1 0 1\n");
        assert_eq!(TaskTree::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn derived_quantities() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 2 0 1\n3 2 3 0 1\n4 1 4 0 1").unwrap();
        assert_eq!(t.subtree_work(), vec![10, 5, 3, 4]);
        assert_eq!(t.subtree_sizes(), vec![4, 2, 1, 1]);
        assert_eq!(t.total_time(), 10);
        assert_eq!(t.leaf_count(), 2);
        let child_links: usize = t.ids().map(|v| t.children(v).len()).sum();
        assert_eq!(child_links, t.len() - 1);
    }
}
