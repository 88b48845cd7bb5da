//! Exact replay of a schedule: feasibility, makespan and memory over time.

use std::fmt;

use serde::Serialize;

use crate::bounds::{makespan_lower_bound, Ratio};
use crate::schedule::Schedule;
use crate::sequential::optimal_postorder;
use crate::tree::{NodeId, TaskTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    WrongLength { expected: usize, got: usize },
    NoProcessors,
    OrderNotPermutation,
    OrderNotByStart { node: NodeId },
    ProcessorOutOfRange { node: NodeId, proc: usize },
    Precedence { node: NodeId, child: NodeId, start: u64, child_finish: u64 },
    ZeroTimeChildAfterParent { node: NodeId, child: NodeId, at: u64 },
    Overlap { proc: usize, first: NodeId, second: NodeId, at: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongLength { expected, got } => {
                write!(f, "schedule covers {got} nodes, tree has {expected}")
            }
            Violation::NoProcessors => write!(f, "schedule uses zero processors"),
            Violation::OrderNotPermutation => write!(f, "dispatch order is not a permutation of the nodes"),
            Violation::OrderNotByStart { node } => {
                write!(f, "node {node} is dispatched out of start-time order")
            }
            Violation::ProcessorOutOfRange { node, proc } => {
                write!(f, "node {node} runs on processor {} which does not exist", proc + 1)
            }
            Violation::Precedence {
                node,
                child,
                start,
                child_finish,
            } => write!(f, "node {node} starts at {start} before child {child} finishes at {child_finish}"),
            Violation::ZeroTimeChildAfterParent { node, child, at } => {
                write!(f, "zero-time child {child} is dispatched after its parent {node} at {at}")
            }
            Violation::Overlap { proc, first, second, at } => write!(
                f,
                "nodes {first} and {second} overlap on processor {} at {at}",
                proc + 1
            ),
        }
    }
}

/// Checks precedence, processor capacity and dispatch-order consistency.
pub fn check_feasible(tree: &TaskTree, sched: &Schedule) -> Result<(), Vec<Violation>> {
    let n = tree.len();
    if sched.processors == 0 {
        return Err(vec![Violation::NoProcessors]);
    }
    for got in [sched.start.len(), sched.proc.len(), sched.order.len()] {
        if got != n {
            return Err(vec![Violation::WrongLength { expected: n, got }]);
        }
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in sched.order.iter().enumerate() {
        if v.index() >= n || pos[v.index()] != usize::MAX {
            return Err(vec![Violation::OrderNotPermutation]);
        }
        pos[v.index()] = i;
    }

    let mut out = Vec::new();
    for w in sched.order.windows(2) {
        if sched.start(w[0]) > sched.start(w[1]) {
            out.push(Violation::OrderNotByStart { node: w[1] });
        }
    }
    for v in tree.ids() {
        if sched.proc[v.index()] >= sched.processors {
            out.push(Violation::ProcessorOutOfRange {
                node: v,
                proc: sched.proc[v.index()],
            });
        }
        for &c in tree.children(v) {
            let child_finish = sched.finish(tree, c);
            if sched.start(v) < child_finish {
                out.push(Violation::Precedence {
                    node: v,
                    child: c,
                    start: sched.start(v),
                    child_finish,
                });
            } else if tree.time(c) == 0 && sched.start(c) == sched.start(v) && pos[c.index()] > pos[v.index()] {
                out.push(Violation::ZeroTimeChildAfterParent {
                    node: v,
                    child: c,
                    at: sched.start(v),
                });
            }
        }
    }

    let mut by_proc: Vec<Vec<NodeId>> = vec![Vec::new(); sched.processors];
    for &v in &sched.order {
        if let Some(list) = by_proc.get_mut(sched.proc[v.index()]) {
            list.push(v);
        }
    }
    for (proc, list) in by_proc.iter().enumerate() {
        // dispatch order is already sorted by start
        for w in list.windows(2) {
            if sched.start(w[1]) < sched.finish(tree, w[0]) {
                out.push(Violation::Overlap {
                    proc,
                    first: w[0],
                    second: w[1],
                    at: sched.start(w[1]),
                });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Memory state at one event instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TracePoint {
    pub time: u64,
    /// Resident memory once every event at `time` has been applied.
    pub memory: u64,
    /// Highest resident memory reached at `time`, including transient
    /// zero-duration nodes.
    pub high_water: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Simulation {
    pub makespan: u64,
    pub peak_memory: u64,
    pub trace: Vec<TracePoint>,
}

/// Replays a feasible schedule. At each instant, nodes finishing then are
/// retired first; starts follow in dispatch order. A zero-time node allocates
/// its execution and output files and releases its inputs within the instant.
pub fn simulate(tree: &TaskTree, sched: &Schedule) -> Result<Simulation, Vec<Violation>> {
    check_feasible(tree, sched)?;
    let mut finishing: Vec<(u64, NodeId)> = tree
        .ids()
        .filter(|&v| tree.time(v) > 0)
        .map(|v| (sched.finish(tree, v), v))
        .collect();
    finishing.sort_unstable();

    let mut trace = Vec::new();
    let mut mem = 0u64;
    let mut peak = 0u64;
    let (mut fi, mut si) = (0, 0);
    while fi < finishing.len() || si < sched.order.len() {
        let next_finish = finishing.get(fi).map_or(u64::MAX, |e| e.0);
        let next_start = sched.order.get(si).map_or(u64::MAX, |&v| sched.start(v));
        let t = next_finish.min(next_start);
        while fi < finishing.len() && finishing[fi].0 == t {
            let v = finishing[fi].1;
            mem -= tree.exec_size(v) + tree.inputs(v);
            fi += 1;
        }
        let mut high = mem;
        while si < sched.order.len() && sched.start(sched.order[si]) == t {
            let v = sched.order[si];
            mem += tree.exec_size(v) + tree.out_size(v);
            high = high.max(mem);
            if tree.time(v) == 0 {
                mem -= tree.exec_size(v) + tree.inputs(v);
            }
            si += 1;
        }
        peak = peak.max(high);
        trace.push(TracePoint {
            time: t,
            memory: mem,
            high_water: high,
        });
    }
    Ok(Simulation {
        makespan: sched.makespan(tree),
        peak_memory: peak,
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub makespan: u64,
    pub peak_memory: u64,
    pub trace: Vec<TracePoint>,
    pub makespan_lb: Ratio,
    pub reference_peak: u64,
    pub normalized_makespan: f64,
    pub normalized_memory: f64,
}

/// Simulates and normalizes against the makespan lower bound and the
/// optimal-postorder peak of `tree`.
pub fn evaluate(tree: &TaskTree, sched: &Schedule) -> Result<EvalReport, Vec<Violation>> {
    let reference = optimal_postorder(tree).1;
    evaluate_against(tree, sched, reference)
}

/// Like [`evaluate`] with an explicit reference peak for memory
/// normalization.
pub fn evaluate_against(tree: &TaskTree, sched: &Schedule, reference_peak: u64) -> Result<EvalReport, Vec<Violation>> {
    let sim = simulate(tree, sched)?;
    let lb = makespan_lower_bound(tree, sched.processors).map_err(|_| vec![Violation::NoProcessors])?;
    Ok(EvalReport {
        makespan: sim.makespan,
        peak_memory: sim.peak_memory,
        trace: sim.trace,
        makespan_lb: lb,
        reference_peak,
        normalized_makespan: ratio_or_one(sim.makespan as f64, lb.to_f64()),
        normalized_memory: ratio_or_one(sim.peak_memory as f64, reference_peak as f64),
    })
}

fn ratio_or_one(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / reference
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_widefork;
    use crate::sequential::{NodeOrder, OrderKind};
    use crate::tree::{TreeBuilder, Weights};

    fn sequential(tree: &TaskTree, seq: &[NodeId]) -> Schedule {
        let mut start = vec![0; tree.len()];
        let mut t = 0;
        for &v in seq {
            start[v.index()] = t;
            t += tree.time(v);
        }
        Schedule {
            processors: 1,
            start,
            proc: vec![0; tree.len()],
            order: seq.to_vec(),
        }
    }

    #[test]
    fn single_node() {
        let t = TreeBuilder::with_root(Weights::new(2, 1, 3)).0.build();
        let s = sequential(&t, &[t.root()]);
        assert!(check_feasible(&t, &s).is_ok());
        let r = evaluate(&t, &s).unwrap();
        assert_eq!((r.makespan, r.peak_memory), (2, 4));
        assert_eq!(r.trace.last().unwrap().memory, 3);
    }

    #[test]
    fn precedence_violation_is_reported() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 3 0 1").unwrap();
        let s = Schedule {
            processors: 2,
            start: vec![2, 0],
            proc: vec![1, 0],
            order: vec![NodeId::from_index(1), NodeId::from_index(0)],
        };
        let errs = check_feasible(&t, &s).unwrap_err();
        assert!(matches!(errs[0], Violation::Precedence { start: 2, child_finish: 3, .. }));
    }

    #[test]
    fn overlap_and_range_violations() {
        let t = TaskTree::parse("1 0 1 0 1\n2 1 2 0 1\n3 1 2 0 1").unwrap();
        let ids: Vec<NodeId> = t.ids().collect();
        let s = Schedule {
            processors: 1,
            start: vec![3, 0, 1],
            proc: vec![0, 0, 0],
            order: vec![ids[1], ids[2], ids[0]],
        };
        let errs = check_feasible(&t, &s).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, Violation::Overlap { .. })));
        let s = Schedule {
            processors: 1,
            start: vec![4, 0, 2],
            proc: vec![0, 0, 5],
            order: vec![ids[1], ids[2], ids[0]],
        };
        let errs = check_feasible(&t, &s).unwrap_err();
        assert_eq!(errs, vec![Violation::ProcessorOutOfRange { node: ids[2], proc: 5 }]);
    }

    #[test]
    fn zero_time_child_must_come_first() {
        let t = TaskTree::parse("1 0 1 0 2\n2 1 0 0 3").unwrap();
        let ids: Vec<NodeId> = t.ids().collect();
        let bad = Schedule {
            processors: 1,
            start: vec![0, 0],
            proc: vec![0, 0],
            order: vec![ids[0], ids[1]],
        };
        assert!(check_feasible(&t, &bad).is_err());
        let good = Schedule::from_sequence(1, vec![0, 0], vec![0, 0], vec![ids[1], ids[0]]);
        assert_eq!(good.order, vec![ids[1], ids[0]]);
        let sim = simulate(&t, &good).unwrap();
        assert_eq!(sim.peak_memory, 5);
        assert_eq!(sim.trace.last().unwrap().memory, 2);
    }

    #[test]
    fn widefork_left_to_right_peak() {
        let t = gen_widefork(3);
        let mut seq = Vec::new();
        for &a in t.children(t.root()) {
            seq.extend_from_slice(t.children(a));
            seq.push(a);
        }
        seq.push(t.root());
        let s = sequential(&t, &seq);
        let sim = simulate(&t, &s).unwrap();
        assert_eq!(sim.peak_memory, 6);
        let order = NodeOrder::from_sequence(seq, OrderKind::Custom).unwrap();
        assert_eq!(crate::sequential::sequential_peak(&t, &order).unwrap(), 6);
    }

    #[test]
    fn finishes_free_before_starts_at_the_same_instant() {
        // two leaves in a row on one processor: 1 + 1 live, never 3
        let t = TaskTree::parse("1 0 1 0 1\n2 1 1 0 1\n3 1 1 0 1").unwrap();
        let ids: Vec<NodeId> = t.ids().collect();
        let s = sequential(&t, &[ids[1], ids[2], ids[0]]);
        let sim = simulate(&t, &s).unwrap();
        assert_eq!(sim.peak_memory, 3);
        let times: Vec<u64> = sim.trace.iter().map(|p| p.time).collect();
        assert_eq!(times, vec![0, 1, 2, 3]);
    }
}
