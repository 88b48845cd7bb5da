//! List scheduling under a memory limit: inner nodes always start, leaves
//! only while the memory estimate allows it.

use serde::{Deserialize, Serialize};

use crate::schedule::Schedule;
use crate::sequential::NodeOrder;
use crate::simulator::simulate;
use crate::tree::{NodeId, TaskTree};

use super::engine::{self, Admission};
use super::{check_memory_model, ScheduleError};

/// When the inputs of an inner node stop counting against the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// When the node completes: the estimate is the resident memory.
    #[default]
    AtCompletion,
    /// As soon as the node becomes ready. Undercounts memory while the
    /// node waits or runs, so the resident peak can exceed twice the limit.
    AtReady,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MemLimitConfig {
    /// Admit a leaf when `in_inner + out_leaf / 2 + idle + f <= M` instead
    /// of comparing the usage estimate.
    pub optim: bool,
    pub accounting: Accounting,
}

struct MemLimit {
    limit: u128,
    config: MemLimitConfig,
    used: u128,
    // inputs of running inner nodes
    in_inner: u128,
    // outputs of running leaves
    out_leaf: u128,
    // outputs of completed nodes whose parent has not started
    idle: u128,
}

impl Admission for MemLimit {
    fn admit(&mut self, tree: &TaskTree, v: NodeId) -> bool {
        if !tree.is_leaf(v) {
            return true;
        }
        let f = tree.out_size(v) as u128;
        if self.config.optim {
            2 * self.in_inner + self.out_leaf + 2 * self.idle + 2 * f <= 2 * self.limit
        } else {
            self.used + f <= self.limit
        }
    }

    fn on_start(&mut self, tree: &TaskTree, v: NodeId) {
        let f = tree.out_size(v) as u128;
        self.used += f;
        if tree.is_leaf(v) {
            self.out_leaf += f;
        } else {
            let inputs = tree.inputs(v) as u128;
            self.in_inner += inputs;
            self.idle -= inputs;
        }
    }

    fn on_finish(&mut self, tree: &TaskTree, v: NodeId) {
        if tree.is_leaf(v) {
            self.out_leaf -= tree.out_size(v) as u128;
        } else {
            let inputs = tree.inputs(v) as u128;
            self.in_inner -= inputs;
            if self.config.accounting == Accounting::AtCompletion {
                self.used -= inputs;
            }
        }
        if tree.parent(v).is_some() {
            self.idle += tree.out_size(v) as u128;
        }
    }

    fn on_ready(&mut self, tree: &TaskTree, v: NodeId) {
        if self.config.accounting == Accounting::AtReady {
            self.used -= tree.inputs(v) as u128;
        }
    }
}

/// Memory-limited list scheduling with completion-time accounting.
pub fn list_schedule_mem_limit(
    tree: &TaskTree,
    p: usize,
    order: &NodeOrder,
    limit: u64,
    optim: bool,
) -> Result<Schedule, ScheduleError> {
    list_schedule_mem_limit_with(
        tree,
        p,
        order,
        limit,
        MemLimitConfig {
            optim,
            accounting: Accounting::AtCompletion,
        },
    )
}

/// Memory-limited list scheduling on a reduction tree without execution
/// files. A stall (nothing running, head leaf refused) is reported as
/// [`ScheduleError::Deadlock`].
pub fn list_schedule_mem_limit_with(
    tree: &TaskTree,
    p: usize,
    order: &NodeOrder,
    limit: u64,
    config: MemLimitConfig,
) -> Result<Schedule, ScheduleError> {
    if p == 0 {
        return Err(ScheduleError::ZeroProcessors);
    }
    check_memory_model(tree)?;
    if order.len() != tree.len() {
        return Err(ScheduleError::OrderMismatch {
            expected: tree.len(),
            got: order.len(),
        });
    }
    let mut policy = MemLimit {
        limit: limit as u128,
        config,
        used: 0,
        in_inner: 0,
        out_leaf: 0,
        idle: 0,
    };
    engine::run(tree, p, order, &mut policy).map_err(|s| ScheduleError::Deadlock {
        time: s.time,
        head: s.head,
        started: s.started,
        limit,
    })
}

/// Peak memory of the one-processor execution induced by `order`: the
/// smallest limit at which the memory-limited scheduler is guaranteed to
/// finish.
pub fn sequential_requirement(tree: &TaskTree, order: &NodeOrder) -> u64 {
    let sched = super::list::list_schedule(tree, 1, order);
    simulate(tree, &sched).expect("list schedules are feasible").peak_memory
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_fork, gen_widefork};
    use crate::schedulers::list::{list_schedule, order_deepest_first, order_inner_first};
    use crate::sequential::optimal_postorder;
    use crate::simulator::{check_feasible, simulate};
    use crate::tree::{TreeBuilder, Weights};

    #[test]
    fn one_processor_follows_the_postorder() {
        let t = gen_widefork(3);
        let m = optimal_postorder(&t).1;
        let order = order_inner_first(&t);
        let s = list_schedule_mem_limit(&t, 1, &order, m, false).unwrap();
        assert_eq!(s, list_schedule(&t, 1, &order));
        assert_eq!(simulate(&t, &s).unwrap().peak_memory, m);
    }

    #[test]
    fn limit_throttles_leaves() {
        let t = gen_widefork(4);
        let order = order_inner_first(&t);
        let m = sequential_requirement(&t, &order);
        let free = list_schedule(&t, 4, &order);
        assert!(simulate(&t, &free).unwrap().peak_memory > m);
        for optim in [false, true] {
            let s = list_schedule_mem_limit(&t, 4, &order, m, optim).unwrap();
            assert!(check_feasible(&t, &s).is_ok());
            assert!(simulate(&t, &s).unwrap().peak_memory <= 2 * m);
            assert!(s.makespan(&t) >= free.makespan(&t));
        }
        let fork = gen_fork(4, 3);
        let o = order_inner_first(&fork);
        assert!(list_schedule_mem_limit(&fork, 4, &o, 2, false).is_err());
    }

    #[test]
    fn deadlock_is_reported() {
        let t = gen_fork(2, 2);
        let order = order_deepest_first(&t);
        let err = list_schedule_mem_limit(&t, 2, &order, 0, false).unwrap_err();
        assert!(matches!(err, ScheduleError::Deadlock { time: 0, started: 0, .. }));
    }

    #[test]
    fn rejects_non_reduction_trees() {
        let t = TaskTree::parse("1 0 1 0 5\n2 1 1 0 1").unwrap();
        let order = order_inner_first(&t);
        assert!(matches!(
            list_schedule_mem_limit(&t, 2, &order, 10, false),
            Err(ScheduleError::NotReductionTree(_))
        ));
    }

    /// Three branches `X_i` (long, empty output) each fed by a leaf with
    /// output `m`. Freeing inputs at readiness lets all three leaves in.
    fn ready_accounting_gadget(m: u64) -> TaskTree {
        let (mut b, root) = TreeBuilder::with_root(Weights::new(1, 0, 0));
        for _ in 0..3 {
            let x = b.add(root, Weights::new(100, 0, 0));
            b.add(x, Weights::new(1, 0, m));
        }
        b.build()
    }

    #[test]
    fn ready_time_accounting_can_exceed_twice_the_limit() {
        let m = 10;
        let t = ready_accounting_gadget(m);
        assert!(t.is_reduction_tree());
        let order = order_inner_first(&t);
        let literal = MemLimitConfig {
            optim: false,
            accounting: Accounting::AtReady,
        };
        let s = list_schedule_mem_limit_with(&t, 3, &order, m, literal).unwrap();
        assert_eq!(simulate(&t, &s).unwrap().peak_memory, 3 * m);

        let s = list_schedule_mem_limit(&t, 3, &order, m, false).unwrap();
        assert!(simulate(&t, &s).unwrap().peak_memory <= m);
    }

    #[test]
    fn sequential_requirement_matches_one_processor_run() {
        let t = gen_widefork(3);
        assert_eq!(sequential_requirement(&t, &order_inner_first(&t)), 6);
        assert!(sequential_requirement(&t, &order_deepest_first(&t)) >= 6);
    }
}
