//! Event-driven list scheduling with a pluggable admission policy.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::schedule::Schedule;
use crate::sequential::NodeOrder;
use crate::tree::{NodeId, TaskTree};

/// Hooks called by the engine. Only the head of the ready queue is ever
/// offered to [`Admission::admit`]; a refusal idles every free processor
/// until the next completion.
pub(crate) trait Admission {
    fn admit(&mut self, _tree: &TaskTree, _v: NodeId) -> bool {
        true
    }
    fn on_start(&mut self, _tree: &TaskTree, _v: NodeId) {}
    fn on_finish(&mut self, _tree: &TaskTree, _v: NodeId) {}
    fn on_ready(&mut self, _tree: &TaskTree, _v: NodeId) {}
}

pub(crate) struct Unlimited;

impl Admission for Unlimited {}

/// Nothing runs, nothing can start, and work remains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Stall {
    pub time: u64,
    pub head: NodeId,
    pub started: usize,
}

struct State<'a, P> {
    tree: &'a TaskTree,
    order: &'a NodeOrder,
    policy: &'a mut P,
    waiting_children: Vec<usize>,
    queue: BinaryHeap<Reverse<(usize, NodeId)>>,
}

impl<P: Admission> State<'_, P> {
    fn make_ready(&mut self, v: NodeId) {
        self.policy.on_ready(self.tree, v);
        self.queue.push(Reverse((self.order.rank(v), v)));
    }

    fn complete(&mut self, v: NodeId) {
        self.policy.on_finish(self.tree, v);
        if let Some(parent) = self.tree.parent(v) {
            let left = &mut self.waiting_children[parent.index()];
            *left -= 1;
            if *left == 0 {
                self.make_ready(parent);
            }
        }
    }
}

/// Whenever processors are free, the highest-priority ready node is offered
/// to the policy. Completions at one instant are all retired before any
/// assignment; free processors are used lowest index first.
pub(crate) fn run<P: Admission>(tree: &TaskTree, p: usize, order: &NodeOrder, policy: &mut P) -> Result<Schedule, Stall> {
    assert!(p >= 1, "at least one processor is required");
    assert_eq!(order.len(), tree.len(), "order does not match the tree");
    let n = tree.len();
    let mut st = State {
        tree,
        order,
        policy,
        waiting_children: tree.ids().map(|v| tree.children(v).len()).collect(),
        queue: BinaryHeap::new(),
    };
    for v in tree.ids().filter(|&v| tree.is_leaf(v)) {
        st.make_ready(v);
    }

    let mut free: BTreeSet<usize> = (0..p).collect();
    let mut running: BinaryHeap<Reverse<(u64, usize, NodeId)>> = BinaryHeap::new();
    let mut start = vec![0u64; n];
    let mut proc = vec![0usize; n];
    let mut dispatch = Vec::with_capacity(n);
    let mut t = 0u64;
    loop {
        while let (Some(&q), Some(&Reverse((_, v)))) = (free.first(), st.queue.peek()) {
            if !st.policy.admit(tree, v) {
                break;
            }
            st.queue.pop();
            start[v.index()] = t;
            proc[v.index()] = q;
            dispatch.push(v);
            st.policy.on_start(tree, v);
            if tree.time(v) == 0 {
                st.complete(v);
            } else {
                free.remove(&q);
                running.push(Reverse((t + tree.time(v), q, v)));
            }
        }
        let Some(&Reverse((next, _, _))) = running.peek() else {
            if let Some(&Reverse((_, head))) = st.queue.peek() {
                return Err(Stall {
                    time: t,
                    head,
                    started: dispatch.len(),
                });
            }
            break;
        };
        t = next;
        while let Some(&Reverse((finish, q, v))) = running.peek() {
            if finish != t {
                break;
            }
            running.pop();
            free.insert(q);
            st.complete(v);
        }
    }
    debug_assert_eq!(dispatch.len(), n);
    Ok(Schedule {
        processors: p,
        start,
        proc,
        order: dispatch,
    })
}
