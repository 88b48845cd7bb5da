//! Subtree splitting and the subtree-parallel schedulers built on it.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::schedule::Schedule;
use crate::sequential::optimal_postorder;
use crate::tree::{NodeId, TaskTree, Weights};

/// A cut of the tree into disjoint subtrees plus the nodes above them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Splitting {
    /// The (at most `p`) heaviest subtrees, heaviest first.
    pub parallel_roots: Vec<NodeId>,
    /// Remaining subtrees, heaviest first.
    pub surplus_roots: Vec<NodeId>,
    /// Split nodes, in splitting order.
    pub seq_set: Vec<NodeId>,
    /// Estimated makespan after each splitting step, starting with the
    /// unsplit tree.
    pub step_makespans: Vec<u64>,
    pub chosen_rank: usize,
}

impl Splitting {
    pub fn makespan(&self) -> u64 {
        self.step_makespans[self.chosen_rank]
    }

    /// All subtree roots of the splitting, heaviest first.
    pub fn subtree_roots(&self) -> Vec<NodeId> {
        let mut all = self.parallel_roots.clone();
        all.extend_from_slice(&self.surplus_roots);
        all
    }
}

type Key = (Reverse<u64>, Reverse<u64>, NodeId);

struct Frontier<'a> {
    tree: &'a TaskTree,
    work: &'a [u64],
    queue: BTreeSet<Key>,
    seq: Vec<NodeId>,
    seq_time: u64,
}

impl<'a> Frontier<'a> {
    fn new(tree: &'a TaskTree, work: &'a [u64]) -> Self {
        let mut f = Frontier {
            tree,
            work,
            queue: BTreeSet::new(),
            seq: Vec::new(),
            seq_time: 0,
        };
        f.push(tree.root());
        f
    }

    fn push(&mut self, v: NodeId) {
        self.queue.insert((Reverse(self.work[v.index()]), Reverse(self.tree.time(v)), v));
    }

    fn head_splittable(&self) -> bool {
        let &(Reverse(w_sub), Reverse(w), _) = self.queue.first().expect("frontier is never empty");
        w_sub > w
    }

    fn split_head(&mut self) {
        let (_, _, v) = self.queue.pop_first().expect("frontier is never empty");
        self.seq.push(v);
        self.seq_time += self.tree.time(v);
        for &c in self.tree.children(v) {
            self.push(c);
        }
    }

    /// Heaviest subtree, plus sequential time, plus every subtree beyond the
    /// `p` heaviest.
    fn cost(&self, p: usize) -> u64 {
        let head = self.queue.first().map_or(0, |k| k.0 .0);
        let surplus: u64 = self.queue.iter().skip(p).map(|k| k.0 .0).sum();
        head + self.seq_time + surplus
    }
}

/// Repeatedly splits the heaviest subtree while it is heavier than its own
/// root, and keeps the step with the smallest estimated makespan (earliest
/// on ties).
pub fn split_subtrees(tree: &TaskTree, p: usize) -> Splitting {
    assert!(p >= 1, "at least one processor is required");
    let work = tree.subtree_work();
    let mut frontier = Frontier::new(tree, &work);
    let mut costs = vec![frontier.cost(p)];
    while frontier.head_splittable() {
        frontier.split_head();
        costs.push(frontier.cost(p));
    }
    let chosen = (0..costs.len()).min_by_key(|&s| (costs[s], s)).expect("at least one step");

    let mut replay = Frontier::new(tree, &work);
    for _ in 0..chosen {
        replay.split_head();
    }
    let roots: Vec<NodeId> = replay.queue.iter().map(|k| k.2).collect();
    let cut = roots.len().min(p);
    Splitting {
        parallel_roots: roots[..cut].to_vec(),
        surplus_roots: roots[cut..].to_vec(),
        seq_set: replay.seq,
        step_makespans: costs,
        chosen_rank: chosen,
    }
}

/// Subtree-parallel schedule. Without `optim`, the `p` heaviest subtrees of
/// the splitting run one per processor and everything else runs afterwards on
/// the first processor. With `optim`, every subtree is packed onto the
/// least-loaded processor, heaviest first, and only the split nodes run
/// afterwards. Subtrees and the final sequential part each follow an optimal
/// postorder.
pub fn par_subtrees(tree: &TaskTree, p: usize, optim: bool) -> Schedule {
    let splitting = split_subtrees(tree, p);
    let (po, _) = optimal_postorder(tree);
    let size = tree.subtree_sizes();

    let groups: Vec<Vec<NodeId>> = if optim {
        let mut groups = vec![Vec::new(); p];
        let mut load = vec![0u64; p];
        let work = tree.subtree_work();
        for r in splitting.subtree_roots() {
            let q = (0..p).min_by_key(|&q| (load[q], q)).expect("p >= 1");
            load[q] += work[r.index()];
            groups[q].push(r);
        }
        groups
    } else {
        splitting.parallel_roots.iter().map(|&r| vec![r]).collect()
    };

    let n = tree.len();
    let mut start = vec![0u64; n];
    let mut proc = vec![0usize; n];
    let mut sequence = Vec::with_capacity(n);
    let mut parallel_end = 0;
    for (q, roots) in groups.iter().enumerate() {
        let mut t = 0;
        for &r in roots {
            let last = po.rank(r);
            for &v in &po.sequence()[last + 1 - size[r.index()]..=last] {
                start[v.index()] = t;
                proc[v.index()] = q;
                sequence.push(v);
                t += tree.time(v);
            }
        }
        parallel_end = parallel_end.max(t);
    }

    let done: Vec<NodeId> = groups.into_iter().flatten().collect();
    let mut t = parallel_end;
    for v in remainder_order(tree, &done) {
        start[v.index()] = t;
        proc[v.index()] = 0;
        sequence.push(v);
        t += tree.time(v);
    }
    Schedule::from_sequence(p, start, proc, sequence)
}

/// Optimal postorder of the nodes outside the `done` subtrees, computed on
/// the tree where each done subtree shrinks to a zero-time leaf holding its
/// output.
fn remainder_order(tree: &TaskTree, done: &[NodeId]) -> Vec<NodeId> {
    let n = tree.len();
    let mut is_done = vec![false; n];
    for &r in done {
        is_done[r.index()] = true;
    }
    let mut inside = vec![false; n];
    for v in tree.top_down() {
        if let Some(p) = tree.parent(v) {
            inside[v.index()] = inside[p.index()] || is_done[p.index()];
        }
    }
    let kept: Vec<NodeId> = tree.ids().filter(|v| !inside[v.index()]).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &v) in kept.iter().enumerate() {
        local[v.index()] = i;
    }
    let parents: Vec<Option<NodeId>> = kept
        .iter()
        .map(|&v| tree.parent(v).map(|p| NodeId::from_index(local[p.index()])))
        .collect();
    let weights: Vec<Weights> = kept
        .iter()
        .map(|&v| {
            if is_done[v.index()] {
                Weights::new(0, 0, tree.out_size(v))
            } else {
                tree.weights(v)
            }
        })
        .collect();
    let quotient = TaskTree::from_parents(&parents, &weights).expect("quotient of a tree is a tree");
    let (qpo, _) = optimal_postorder(&quotient);
    qpo.sequence()
        .iter()
        .map(|q| kept[q.index()])
        .filter(|v| !is_done[v.index()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_fork, gen_widefork};
    use crate::sequential::optimal_postorder;
    use crate::simulator::{check_feasible, simulate};
    use crate::tree::{TreeBuilder, Weights};

    #[test]
    fn fork_splitting_costs() {
        let t = gen_fork(2, 3);
        let s = split_subtrees(&t, 2);
        assert_eq!(s.step_makespans, vec![7, 6]);
        assert_eq!(s.chosen_rank, 1);
        assert_eq!(s.parallel_roots.len(), 2);
        assert_eq!(s.surplus_roots.len(), 4);
        assert_eq!(s.seq_set, vec![t.root()]);
    }

    #[test]
    fn single_node_is_not_split() {
        let t = TreeBuilder::with_root(Weights::new(5, 0, 1)).0.build();
        let s = split_subtrees(&t, 3);
        assert_eq!(s.step_makespans, vec![5]);
        assert_eq!(s.parallel_roots, vec![t.root()]);
        let sched = par_subtrees(&t, 3, false);
        assert_eq!(sched.makespan(&t), 5);
    }

    #[test]
    fn fork_makespans() {
        for (p, k) in [(2usize, 3usize), (4, 10), (8, 5)] {
            let t = gen_fork(p, k);
            let s = par_subtrees(&t, p, false);
            assert!(check_feasible(&t, &s).is_ok());
            assert_eq!(s.makespan(&t), (p * (k - 1) + 2) as u64);
        }
    }

    #[test]
    fn single_processor_degenerates_to_postorder() {
        let t = gen_widefork(4);
        for optim in [false, true] {
            let s = par_subtrees(&t, 1, optim);
            let sim = simulate(&t, &s).unwrap();
            assert_eq!(sim.makespan, t.total_time());
            assert_eq!(sim.peak_memory, optimal_postorder(&t).1);
        }
    }

    #[test]
    fn optim_packs_surplus_subtrees() {
        let t = gen_fork(2, 3);
        let s = par_subtrees(&t, 2, true);
        assert!(check_feasible(&t, &s).is_ok());
        // six unit leaves over two processors, then the root
        assert_eq!(s.makespan(&t), 4);
    }

    #[test]
    fn zero_time_subtree_root_precedes_parent() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 0 0 1\n3 2 4 0 1\n4 1 1 0 1").unwrap();
        for p in 1..=3 {
            for optim in [false, true] {
                let s = par_subtrees(&t, p, optim);
                assert_eq!(check_feasible(&t, &s), Ok(()), "p={p} optim={optim}");
            }
        }
    }
}
