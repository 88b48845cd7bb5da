//! Inner-first list scheduling that books memory for every parent output
//! ahead of time, so the resident memory never exceeds the limit.

use crate::schedule::Schedule;
use crate::sequential::{sequential_peak, NodeOrder};
use crate::tree::{NodeId, TaskTree};

use super::engine::{self, Admission};
use super::{check_memory_model, ScheduleError};

/// Share of its parent's output each node reserves. Within a sibling group,
/// children are visited from the last in `po` to the first: an inner child
/// reserves up to its own inputs, a leaf takes whatever remains.
pub fn compute_contribs(tree: &TaskTree, po: &NodeOrder) -> Result<Vec<u64>, ScheduleError> {
    if let Some(v) = tree.ids().find(|&v| !tree.is_leaf(v) && tree.out_size(v) > tree.inputs(v)) {
        return Err(ScheduleError::NotReductionTree(v));
    }
    let mut contrib = vec![0u64; tree.len()];
    for i in tree.ids() {
        let mut kids = tree.children(i).to_vec();
        kids.sort_by_key(|&c| std::cmp::Reverse(po.rank(c)));
        let mut left = tree.out_size(i);
        for c in kids {
            let share = if tree.is_leaf(c) { left } else { tree.inputs(c).min(left) };
            contrib[c.index()] = share;
            left -= share;
        }
    }
    Ok(contrib)
}

struct Booking {
    limit: u128,
    contrib: Vec<u64>,
    booked: Vec<u128>,
    rank: Vec<usize>,
    by_rank: Vec<NodeId>,
    used: u128,
    // position of the next leaf to start, and the bookings ranked before it
    cursor: usize,
    record: u128,
}

impl Booking {
    fn add_booked(&mut self, k: NodeId, delta: u128) {
        self.booked[k.index()] += delta;
        if self.rank[k.index()] < self.cursor {
            self.record += delta;
        }
    }

    fn clear_booked(&mut self, k: NodeId) {
        let old = std::mem::take(&mut self.booked[k.index()]);
        if self.rank[k.index()] < self.cursor {
            self.record -= old;
        }
    }

    fn advance_to(&mut self, leaf: NodeId) {
        let target = self.rank[leaf.index()];
        debug_assert!(target >= self.cursor, "leaves start in postorder");
        while self.cursor < target {
            self.record += self.booked[self.by_rank[self.cursor].index()];
            self.cursor += 1;
        }
        if cfg!(debug_assertions) && self.by_rank.len() <= 256 {
            let direct: u128 = self.by_rank[..self.cursor].iter().map(|k| self.booked[k.index()]).sum();
            debug_assert_eq!(direct, self.record);
        }
    }
}

impl Admission for Booking {
    fn admit(&mut self, tree: &TaskTree, v: NodeId) -> bool {
        let f = tree.out_size(v) as u128;
        if tree.is_leaf(v) {
            self.advance_to(v);
            self.used + f + self.record <= self.limit
        } else {
            self.used + f <= self.limit
        }
    }

    fn on_start(&mut self, tree: &TaskTree, v: NodeId) {
        self.used += tree.out_size(v) as u128;
        if tree.is_leaf(v) {
            if let Some(parent) = tree.parent(v) {
                self.add_booked(parent, self.contrib[v.index()] as u128);
            }
        } else {
            self.clear_booked(v);
        }
    }

    fn on_finish(&mut self, tree: &TaskTree, v: NodeId) {
        if tree.is_leaf(v) {
            return;
        }
        self.used -= tree.inputs(v) as u128;
        if let Some(parent) = tree.parent(v) {
            self.add_booked(parent, self.contrib[v.index()] as u128);
        }
    }
}

/// Schedules a reduction tree without execution files on `p` processors
/// within memory `limit`, which must cover the sequential peak of `po`.
pub fn mem_booking_inner_first(tree: &TaskTree, p: usize, po: &NodeOrder, limit: u64) -> Result<Schedule, ScheduleError> {
    if p == 0 {
        return Err(ScheduleError::ZeroProcessors);
    }
    check_memory_model(tree)?;
    if !po.is_postorder(tree) {
        return Err(ScheduleError::NotPostorder);
    }
    let required = sequential_peak(tree, po).expect("postorders are topological");
    if limit < required {
        return Err(ScheduleError::MemoryBelowSequential { limit, required });
    }
    let contrib = compute_contribs(tree, po)?;
    let mut policy = Booking {
        limit: limit as u128,
        contrib,
        booked: vec![0; tree.len()],
        rank: po.ranks().to_vec(),
        by_rank: po.sequence().to_vec(),
        used: 0,
        cursor: 0,
        record: 0,
    };
    engine::run(tree, p, po, &mut policy).map_err(|s| ScheduleError::Deadlock {
        time: s.time,
        head: s.head,
        started: s.started,
        limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_fork, gen_widefork};
    use crate::sequential::{optimal_postorder, NodeOrder, OrderKind};
    use crate::simulator::{check_feasible, simulate};

    fn ids(t: &TaskTree) -> Vec<NodeId> {
        t.ids().collect()
    }

    #[test]
    fn contribs_mixed_children() {
        // node 1 (f=4): leaf 2 ranked before inner 3 (inputs 3)
        let t = TaskTree::parse("1 0 1 0 4\n2 1 1 0 1\n3 1 1 0 3\n4 3 1 0 3").unwrap();
        let v = ids(&t);
        let po = NodeOrder::from_sequence(vec![v[1], v[3], v[2], v[0]], OrderKind::Postorder).unwrap();
        let c = compute_contribs(&t, &po).unwrap();
        assert_eq!(c[2], 3);
        assert_eq!(c[1], 1);
        assert_eq!(c[0], 0);
    }

    #[test]
    fn contribs_single_inner_child() {
        let t = TaskTree::parse("1 0 1 0 2\n2 1 1 0 5\n3 2 1 0 5").unwrap();
        let (po, _) = optimal_postorder(&t);
        assert_eq!(compute_contribs(&t, &po).unwrap()[1], 2);
    }

    #[test]
    fn pebble_contribs_go_to_last_child() {
        let t = gen_widefork(3);
        let (po, _) = optimal_postorder(&t);
        let c = compute_contribs(&t, &po).unwrap();
        for i in t.ids().filter(|&i| !t.is_leaf(i)) {
            let kids = t.children(i);
            let last = *kids.iter().max_by_key(|&&k| po.rank(k)).unwrap();
            for &k in kids {
                assert_eq!(c[k.index()], u64::from(k == last));
            }
        }
    }

    #[test]
    fn stays_within_limit() {
        let t = gen_widefork(4);
        let (po, m) = optimal_postorder(&t);
        for p in [1, 2, 4, 8] {
            let s = mem_booking_inner_first(&t, p, &po, m).unwrap();
            assert!(check_feasible(&t, &s).is_ok());
            assert!(simulate(&t, &s).unwrap().peak_memory <= m);
            if p == 1 {
                assert_eq!(s.makespan(&t), t.total_time());
            }
        }
    }

    #[test]
    fn more_memory_allows_parallelism() {
        let t = gen_widefork(4);
        let (po, m) = optimal_postorder(&t);
        let tight = mem_booking_inner_first(&t, 4, &po, m).unwrap();
        let loose = mem_booking_inner_first(&t, 4, &po, 100).unwrap();
        assert!(loose.makespan(&t) < tight.makespan(&t));
        let f = gen_fork(4, 2);
        let (po, _) = optimal_postorder(&f);
        assert_eq!(mem_booking_inner_first(&f, 4, &po, 100).unwrap().makespan(&f), 3);
    }

    #[test]
    fn rejects_small_limit() {
        let t = gen_widefork(2);
        let (po, m) = optimal_postorder(&t);
        assert_eq!(
            mem_booking_inner_first(&t, 2, &po, m - 1),
            Err(ScheduleError::MemoryBelowSequential { limit: m - 1, required: m })
        );
    }
}
