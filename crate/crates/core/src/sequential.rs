//! Sequential baselines: the memory-minimizing postorder, peak evaluation of
//! an arbitrary topological order, and an exhaustive minimum-peak oracle for
//! small trees.

use thiserror::Error;

use crate::tree::{NodeId, TaskTree};

/// Largest tree accepted by [`brute_force_min_peak`].
pub const BRUTE_FORCE_MAX_NODES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    Postorder,
    InnerFirst,
    DeepestFirst,
    Custom,
}

/// A total priority order over the nodes of a tree. Rank 0 comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeOrder {
    rank: Vec<usize>,
    sequence: Vec<NodeId>,
    kind: OrderKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("order lists {got} nodes but the tree has {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("node {0} appears twice in the order")]
    Repeated(NodeId),
    #[error("node {parent} is ordered before its child {child}")]
    NotTopological { parent: NodeId, child: NodeId },
    #[error("tree has {0} nodes; the exhaustive oracle is limited to {BRUTE_FORCE_MAX_NODES}")]
    TooLarge(usize),
}

impl NodeOrder {
    /// Builds an order from the node sequence, first node = highest priority.
    pub fn from_sequence(sequence: Vec<NodeId>, kind: OrderKind) -> Result<Self, OrderError> {
        let n = sequence.len();
        let mut rank = vec![usize::MAX; n];
        for (pos, &v) in sequence.iter().enumerate() {
            if v.index() >= n {
                return Err(OrderError::WrongLength {
                    expected: v.number(),
                    got: n,
                });
            }
            if rank[v.index()] != usize::MAX {
                return Err(OrderError::Repeated(v));
            }
            rank[v.index()] = pos;
        }
        Ok(NodeOrder {
            rank,
            sequence,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// 0-based position of `v` in the order.
    pub fn rank(&self, v: NodeId) -> usize {
        self.rank[v.index()]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }

    pub fn sequence(&self) -> &[NodeId] {
        &self.sequence
    }

    pub fn kind(&self) -> OrderKind {
        self.kind
    }

    /// Whether every child precedes its parent.
    pub fn is_topological(&self, tree: &TaskTree) -> bool {
        self.first_inversion(tree).is_none()
    }

    fn first_inversion(&self, tree: &TaskTree) -> Option<OrderError> {
        self.sequence.iter().find_map(|&v| {
            tree.parent(v).and_then(|p| {
                (self.rank(p) < self.rank(v)).then_some(OrderError::NotTopological { parent: p, child: v })
            })
        })
    }

    /// Whether this is a postorder: topological and every subtree occupies a
    /// contiguous block of ranks ending at its root.
    pub fn is_postorder(&self, tree: &TaskTree) -> bool {
        if self.len() != tree.len() || !self.is_topological(tree) {
            return false;
        }
        let size = tree.subtree_sizes();
        let mut lowest = self.rank.clone();
        for v in tree.top_down().into_iter().rev() {
            if let Some(p) = tree.parent(v) {
                lowest[p.index()] = lowest[p.index()].min(lowest[v.index()]);
            }
        }
        tree.ids()
            .all(|v| self.rank(v) + 1 - lowest[v.index()] == size[v.index()])
    }
}

/// Optimal postorder and its sequential peak memory.
///
/// Children are visited by non-increasing `peak(child) - out(child)`, ties by
/// smaller id; this is the classical memory-optimal postorder.
pub fn optimal_postorder(tree: &TaskTree) -> (NodeOrder, u64) {
    let (sorted_children, peak) = postorder_plan(tree);
    let mut sequence = Vec::with_capacity(tree.len());
    // explicit stack of (node, next child cursor)
    let mut stack: Vec<(NodeId, usize)> = vec![(tree.root(), 0)];
    while let Some((v, cursor)) = stack.last_mut() {
        let kids = &sorted_children[v.index()];
        if *cursor < kids.len() {
            let c = kids[*cursor];
            *cursor += 1;
            stack.push((c, 0));
        } else {
            sequence.push(*v);
            stack.pop();
        }
    }
    let order = NodeOrder::from_sequence(sequence, OrderKind::Postorder).expect("postorder is a permutation");
    (order, peak[tree.root().index()])
}

/// Peak memory of each subtree under its optimal postorder.
pub fn subtree_postorder_peaks(tree: &TaskTree) -> Vec<u64> {
    postorder_plan(tree).1
}

fn postorder_plan(tree: &TaskTree) -> (Vec<Vec<NodeId>>, Vec<u64>) {
    let n = tree.len();
    let mut peak = vec![0u64; n];
    let mut sorted: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for v in tree.top_down().into_iter().rev() {
        let mut kids = tree.children(v).to_vec();
        kids.sort_by(|&a, &b| {
            let ka = peak[a.index()] - tree.out_size(a);
            let kb = peak[b.index()] - tree.out_size(b);
            kb.cmp(&ka).then(a.cmp(&b))
        });
        let mut held = 0u64;
        let mut best = tree.node_memory(v);
        for &c in &kids {
            best = best.max(held + peak[c.index()]);
            held += tree.out_size(c);
        }
        peak[v.index()] = best;
        sorted[v.index()] = kids;
    }
    (sorted, peak)
}

/// Peak memory of the one-processor execution following `order`.
pub fn sequential_peak(tree: &TaskTree, order: &NodeOrder) -> Result<u64, OrderError> {
    if order.len() != tree.len() {
        return Err(OrderError::WrongLength {
            expected: tree.len(),
            got: order.len(),
        });
    }
    if let Some(err) = order.first_inversion(tree) {
        return Err(err);
    }
    let mut live = 0u64;
    let mut peak = 0u64;
    for &v in order.sequence() {
        live += tree.exec_size(v) + tree.out_size(v);
        peak = peak.max(live);
        live -= tree.exec_size(v) + tree.inputs(v);
    }
    Ok(peak)
}

/// Minimum sequential peak over every topological order, by dynamic
/// programming over the sets of completed nodes.
pub fn brute_force_min_peak(tree: &TaskTree) -> Result<u64, OrderError> {
    let n = tree.len();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(OrderError::TooLarge(n));
    }
    let child_mask: Vec<u32> = tree
        .ids()
        .map(|v| tree.children(v).iter().fold(0u32, |m, c| m | 1 << c.index()))
        .collect();
    let parent_bit: Vec<u32> = tree
        .ids()
        .map(|v| tree.parent(v).map_or(0, |p| 1 << p.index()))
        .collect();
    let full = (1u32 << n) - 1;
    let mut best = vec![u64::MAX; 1usize << n];
    best[0] = 0;
    // Live memory between steps is a function of the completed set alone.
    let live_of = |mask: u32| -> u64 {
        (0..n)
            .filter(|&i| mask >> i & 1 == 1 && mask & parent_bit[i] == 0)
            .map(|i| tree.out_size(NodeId::from_index(i)))
            .sum()
    };
    // Completed sets only grow, so increasing numeric order is a valid
    // processing order for the transitions.
    for mask in 0..=full {
        let cur = best[mask as usize];
        if cur == u64::MAX {
            continue;
        }
        let live = live_of(mask);
        for (i, &kids) in child_mask.iter().enumerate() {
            if mask >> i & 1 == 1 || kids & !mask != 0 {
                continue;
            }
            let v = NodeId::from_index(i);
            let step = cur.max(live + tree.exec_size(v) + tree.out_size(v));
            let next = (mask | 1 << i) as usize;
            if step < best[next] {
                best[next] = step;
            }
        }
    }
    Ok(best[full as usize])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::tree::{TreeBuilder, Weights};

    fn pebble_chain(len: usize) -> TaskTree {
        let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
        b.add_chain(root, len - 1, Weights::PEBBLE);
        b.build()
    }

    #[test]
    fn widefork_postorder_peak_is_twice_the_width() {
        for m in 1..=5 {
            let t = generators::gen_widefork(m);
            let (order, peak) = optimal_postorder(&t);
            assert_eq!(peak, 2 * m as u64);
            assert!(order.is_postorder(&t));
            assert_eq!(sequential_peak(&t, &order).unwrap(), peak);
        }
    }

    #[test]
    fn single_node_peak() {
        let t = TreeBuilder::with_root(Weights::new(1, 0, 1)).0.build();
        assert_eq!(optimal_postorder(&t).1, 1);
        assert_eq!(brute_force_min_peak(&t).unwrap(), 1);
    }

    #[test]
    fn small_reference_trees() {
        assert_eq!(brute_force_min_peak(&pebble_chain(3)).unwrap(), 2);
        assert_eq!(optimal_postorder(&pebble_chain(3)).1, 2);
        let fork = TaskTree::parse("1 0 1 0 1\n2 1 1 0 1\n3 1 1 0 1").unwrap();
        assert_eq!(brute_force_min_peak(&fork).unwrap(), 3);
        let (order, _) = optimal_postorder(&fork);
        assert_eq!(sequential_peak(&fork, &order).unwrap(), 3);
    }

    #[test]
    fn left_to_right_widefork_postorder_peaks_at_2m() {
        // subtrees a_1..a_m processed left to right: peak (m-1) + (m+1)
        let t = generators::gen_widefork(3);
        let mut seq = Vec::new();
        for &a in t.children(t.root()) {
            seq.extend_from_slice(t.children(a));
            seq.push(a);
        }
        seq.push(t.root());
        let order = NodeOrder::from_sequence(seq, OrderKind::Custom).unwrap();
        assert_eq!(sequential_peak(&t, &order).unwrap(), 6);
    }

    #[test]
    fn non_topological_order_is_rejected() {
        let t = pebble_chain(2);
        let order = NodeOrder::from_sequence(vec![t.root(), NodeId::from_index(1)], OrderKind::Custom).unwrap();
        assert!(matches!(
            sequential_peak(&t, &order),
            Err(OrderError::NotTopological { .. })
        ));
    }

    #[test]
    fn oracle_refuses_large_trees() {
        let t = pebble_chain(BRUTE_FORCE_MAX_NODES + 1);
        assert_eq!(
            brute_force_min_peak(&t),
            Err(OrderError::TooLarge(BRUTE_FORCE_MAX_NODES + 1))
        );
    }

    #[test]
    fn children_ties_break_by_id() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 1 0 1\n3 1 1 0 1\n4 1 1 0 1").unwrap();
        let (order, _) = optimal_postorder(&t);
        let seq: Vec<usize> = order.sequence().iter().map(|v| v.number()).collect();
        assert_eq!(seq, vec![2, 3, 4, 1]);
    }

    #[test]
    fn heavier_subtree_goes_first() {
        // child 2 has a costly subtree (peak 10, out 1), child 3 is a big leaf
        let t = TaskTree::parse("1 0 1 0 1\n2 1 1 0 1\n3 1 1 0 5\n4 2 1 9 0").unwrap();
        let (order, peak) = optimal_postorder(&t);
        assert_eq!(order.sequence()[0].number(), 4);
        assert_eq!(peak, 9);
        assert_eq!(brute_force_min_peak(&t).unwrap(), 9);
    }
}
