//! Work-conserving list scheduling under the inner-first and deepest-first
//! priorities.

use std::cmp::Reverse;

use crate::bounds::depths;
use crate::schedule::Schedule;
use crate::sequential::{optimal_postorder, NodeOrder, OrderKind};
use crate::tree::{NodeId, TaskTree};

use super::engine::{self, Unlimited};

/// Inner nodes first, then leaves; both groups in optimal-postorder order.
pub fn order_inner_first(tree: &TaskTree) -> NodeOrder {
    let (po, _) = optimal_postorder(tree);
    let (inner, leaves): (Vec<NodeId>, Vec<NodeId>) = po.sequence().iter().partition(|&&v| !tree.is_leaf(v));
    let mut seq = inner;
    seq.extend(leaves);
    NodeOrder::from_sequence(seq, OrderKind::InnerFirst).expect("permutation")
}

/// Deeper nodes first; at equal depth inner nodes before leaves, then
/// optimal-postorder order.
pub fn order_deepest_first(tree: &TaskTree) -> NodeOrder {
    let (po, _) = optimal_postorder(tree);
    let depth = depths(tree);
    let mut seq: Vec<NodeId> = tree.ids().collect();
    seq.sort_by_key(|&v| (Reverse(depth[v.index()]), tree.is_leaf(v), po.rank(v)));
    NodeOrder::from_sequence(seq, OrderKind::DeepestFirst).expect("permutation")
}

/// List schedule with unlimited memory: a free processor always takes the
/// highest-priority ready node.
pub fn list_schedule(tree: &TaskTree, p: usize, order: &NodeOrder) -> Schedule {
    engine::run(tree, p, order, &mut Unlimited).expect("unlimited memory never stalls")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::critical_path;
    use crate::generators::{gen_fork, gen_inner_adversary, gen_widefork};
    use crate::simulator::{check_feasible, simulate};

    #[test]
    fn inner_first_ranks_inner_nodes_first() {
        let t = gen_fork(1, 2);
        let seq: Vec<usize> = order_inner_first(&t).sequence().iter().map(|v| v.number()).collect();
        assert_eq!(seq, vec![1, 2, 3]);

        let t = gen_inner_adversary(3, 5).unwrap();
        let o = order_inner_first(&t);
        let last_inner = t.ids().filter(|&v| !t.is_leaf(v)).map(|v| o.rank(v)).max().unwrap();
        let first_leaf = t.ids().filter(|&v| t.is_leaf(v)).map(|v| o.rank(v)).min().unwrap();
        assert!(last_inner < first_leaf);
    }

    #[test]
    fn deepest_first_ranks() {
        let t = gen_widefork(3);
        let o = order_deepest_first(&t);
        let d = depths(&t);
        for w in o.sequence().windows(2) {
            assert!(d[w[0].index()] >= d[w[1].index()]);
        }
        assert_eq!(o.sequence().last(), Some(&t.root()));

        // an inner node and a leaf at the same depth: inner first
        let t = TaskTree::parse("1 0 1 0 1\n2 1 1 0 1\n3 1 1 0 1\n4 2 1 0 1").unwrap();
        let o = order_deepest_first(&t);
        let ids: Vec<NodeId> = t.ids().collect();
        assert!(o.rank(ids[1]) < o.rank(ids[2]));
        assert_eq!(o.sequence()[0], ids[3]);
    }

    #[test]
    fn fork_makespan_is_optimal() {
        for (p, k) in [(2, 3), (4, 10), (3, 1)] {
            let t = gen_fork(p, k);
            let s = list_schedule(&t, p, &order_deepest_first(&t));
            assert!(check_feasible(&t, &s).is_ok());
            assert_eq!(s.makespan(&t), k as u64 + 1);
        }
    }

    #[test]
    fn widefork_full_parallelism() {
        let t = gen_widefork(3);
        let s = list_schedule(&t, 9, &order_deepest_first(&t));
        assert_eq!(s.makespan(&t), 3);
    }

    #[test]
    fn inner_first_adversary_peak() {
        let t = gen_inner_adversary(3, 5).unwrap();
        let s = list_schedule(&t, 3, &order_inner_first(&t));
        assert_eq!(simulate(&t, &s).unwrap().peak_memory, 9);
    }

    #[test]
    fn chain_runs_bottom_up() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 2 0 1\n3 2 3 0 1").unwrap();
        let s = list_schedule(&t, 4, &order_inner_first(&t));
        assert_eq!(s.start, vec![5, 3, 0]);
        assert_eq!(s.makespan(&t), t.total_time());
        assert_eq!(critical_path(&t), 6);
    }

    #[test]
    fn zero_time_nodes_chain_within_an_instant() {
        let t = TaskTree::parse("1 0 0 0 1\n2 1 0 0 1\n3 2 2 0 1").unwrap();
        let s = list_schedule(&t, 1, &order_inner_first(&t));
        assert_eq!(s.start, vec![2, 2, 0]);
        assert!(check_feasible(&t, &s).is_ok());
    }
}
