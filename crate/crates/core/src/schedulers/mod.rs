//! Scheduling heuristics. Every scheduler is a pure function of its inputs.

mod booking;
mod engine;
mod list;
mod memlimit;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::Schedule;
use crate::sequential::optimal_postorder;
use crate::tree::{NodeId, TaskTree};

pub use booking::{compute_contribs, mem_booking_inner_first};
pub use list::{list_schedule, order_deepest_first, order_inner_first};
pub use memlimit::{list_schedule_mem_limit, list_schedule_mem_limit_with, sequential_requirement, Accounting, MemLimitConfig};
pub use split::{par_subtrees, split_subtrees, Splitting};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("processor count must be at least 1")]
    ZeroProcessors,
    #[error("node {0} has an execution file; memory-limited schedulers need them eliminated first")]
    ExecFilesPresent(NodeId),
    #[error("node {0} outputs more than its inputs; memory-limited schedulers need a reduction tree")]
    NotReductionTree(NodeId),
    #[error("order covers {got} nodes but the tree has {expected}")]
    OrderMismatch { expected: usize, got: usize },
    #[error("the given order is not a postorder of the tree")]
    NotPostorder,
    #[error("memory limit {limit} is below the sequential peak {required}")]
    MemoryBelowSequential { limit: u64, required: u64 },
    #[error("stalled at time {time} with memory limit {limit}: node {head} cannot start and nothing is running ({started} nodes started)")]
    Deadlock { time: u64, head: NodeId, started: usize, limit: u64 },
    #[error("heuristic {0} needs a memory limit")]
    MissingLimit(Heuristic),
}

impl ScheduleError {
    /// Whether the failure is due to the memory limit being too small.
    pub fn is_memory_infeasible(&self) -> bool {
        matches!(self, ScheduleError::MemoryBelowSequential { .. } | ScheduleError::Deadlock { .. })
    }
}

pub(crate) fn check_memory_model(tree: &TaskTree) -> Result<(), ScheduleError> {
    if let Some(v) = tree.ids().find(|&v| tree.exec_size(v) > 0) {
        return Err(ScheduleError::ExecFilesPresent(v));
    }
    if let Some(v) = tree.ids().find(|&v| !tree.is_leaf(v) && tree.out_size(v) > tree.inputs(v)) {
        return Err(ScheduleError::NotReductionTree(v));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    ParSubtrees,
    ParSubtreesOptim,
    ParInnerFirst,
    ParDeepestFirst,
    ParInnerFirstMemlimit,
    ParInnerFirstMemlimitOptim,
    ParDeepestFirstMemlimit,
    ParDeepestFirstMemlimitOptim,
    MemBookingInnerFirst,
}

impl Heuristic {
    pub const ALL: [Heuristic; 9] = [
        Heuristic::ParSubtrees,
        Heuristic::ParSubtreesOptim,
        Heuristic::ParInnerFirst,
        Heuristic::ParDeepestFirst,
        Heuristic::ParInnerFirstMemlimit,
        Heuristic::ParInnerFirstMemlimitOptim,
        Heuristic::ParDeepestFirstMemlimit,
        Heuristic::ParDeepestFirstMemlimitOptim,
        Heuristic::MemBookingInnerFirst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::ParSubtrees => "par-subtrees",
            Heuristic::ParSubtreesOptim => "par-subtrees-optim",
            Heuristic::ParInnerFirst => "par-inner-first",
            Heuristic::ParDeepestFirst => "par-deepest-first",
            Heuristic::ParInnerFirstMemlimit => "par-inner-first-memlimit",
            Heuristic::ParInnerFirstMemlimitOptim => "par-inner-first-memlimit-optim",
            Heuristic::ParDeepestFirstMemlimit => "par-deepest-first-memlimit",
            Heuristic::ParDeepestFirstMemlimitOptim => "par-deepest-first-memlimit-optim",
            Heuristic::MemBookingInnerFirst => "mem-booking-inner-first",
        }
    }

    pub fn is_memory_limited(self) -> bool {
        matches!(
            self,
            Heuristic::ParInnerFirstMemlimit
                | Heuristic::ParInnerFirstMemlimitOptim
                | Heuristic::ParDeepestFirstMemlimit
                | Heuristic::ParDeepestFirstMemlimitOptim
                | Heuristic::MemBookingInnerFirst
        )
    }

    /// Runs the heuristic on `tree` as given. Memory-limited heuristics need
    /// `limit` and a reduction tree without execution files.
    pub fn schedule(self, tree: &TaskTree, p: usize, limit: Option<u64>) -> Result<Schedule, ScheduleError> {
        if p == 0 {
            return Err(ScheduleError::ZeroProcessors);
        }
        let need = || limit.ok_or(ScheduleError::MissingLimit(self));
        match self {
            Heuristic::ParSubtrees => Ok(par_subtrees(tree, p, false)),
            Heuristic::ParSubtreesOptim => Ok(par_subtrees(tree, p, true)),
            Heuristic::ParInnerFirst => Ok(list_schedule(tree, p, &order_inner_first(tree))),
            Heuristic::ParDeepestFirst => Ok(list_schedule(tree, p, &order_deepest_first(tree))),
            Heuristic::ParInnerFirstMemlimit => list_schedule_mem_limit(tree, p, &order_inner_first(tree), need()?, false),
            Heuristic::ParInnerFirstMemlimitOptim => {
                list_schedule_mem_limit(tree, p, &order_inner_first(tree), need()?, true)
            }
            Heuristic::ParDeepestFirstMemlimit => {
                list_schedule_mem_limit(tree, p, &order_deepest_first(tree), need()?, false)
            }
            Heuristic::ParDeepestFirstMemlimitOptim => {
                list_schedule_mem_limit(tree, p, &order_deepest_first(tree), need()?, true)
            }
            Heuristic::MemBookingInnerFirst => {
                let (po, _) = optimal_postorder(tree);
                mem_booking_inner_first(tree, p, &po, need()?)
            }
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown heuristic {0:?}")]
pub struct UnknownHeuristic(pub String);

impl FromStr for Heuristic {
    type Err = UnknownHeuristic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| UnknownHeuristic(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_fork;

    #[test]
    fn names_round_trip() {
        for h in Heuristic::ALL {
            assert_eq!(h.name().parse::<Heuristic>().unwrap(), h);
            assert_eq!(serde_json::to_string(&h).unwrap(), format!("\"{}\"", h.name()));
        }
        assert!("par-everything".parse::<Heuristic>().is_err());
    }

    #[test]
    fn memory_limited_heuristics_need_a_limit() {
        let t = gen_fork(2, 2);
        for h in Heuristic::ALL {
            let r = h.schedule(&t, 2, None);
            assert_eq!(r.is_err(), h.is_memory_limited(), "{h}");
        }
        assert_eq!(Heuristic::ParSubtrees.schedule(&t, 0, None), Err(ScheduleError::ZeroProcessors));
    }
}
