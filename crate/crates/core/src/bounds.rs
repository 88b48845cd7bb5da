//! Makespan and memory-makespan lower bounds.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::tree::TaskTree;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("processor count must be at least 1")]
pub struct ZeroProcessors;

/// Exact nonnegative rational `num / den` with `den >= 1`.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Self {
        assert!(den > 0, "zero denominator");
        Ratio { num, den }
    }

    pub fn from_int(v: u64) -> Self {
        Ratio::new(v as u128, 1)
    }

    pub fn numer(&self) -> u128 {
        self.num
    }

    pub fn denom(&self) -> u128 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn max(self, other: Ratio) -> Ratio {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Decimal rendering with six fractional digits, truncated.
    pub fn to_decimal_string(&self) -> String {
        let int = self.num / self.den;
        let frac = (self.num % self.den) * 1_000_000 / self.den;
        format!("{int}.{frac:06}")
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_decimal_string())
    }
}

/// Depth of every node: the time-weighted length of the path from the node
/// to the root, both ends included.
pub fn depths(tree: &TaskTree) -> Vec<u64> {
    let mut depth = vec![0u64; tree.len()];
    for v in tree.top_down() {
        let above = tree.parent(v).map_or(0, |p| depth[p.index()]);
        depth[v.index()] = above + tree.time(v);
    }
    depth
}

pub fn critical_path(tree: &TaskTree) -> u64 {
    depths(tree).into_iter().max().unwrap_or(0)
}

/// `max(total work / p, critical path)`.
pub fn makespan_lower_bound(tree: &TaskTree, p: usize) -> Result<Ratio, ZeroProcessors> {
    if p == 0 {
        return Err(ZeroProcessors);
    }
    let work = Ratio::new(tree.total_time() as u128, p as u128);
    Ok(work.max(Ratio::from_int(critical_path(tree))))
}

/// `sum_i (exec_i + out_i + inputs_i) * time_i`; any schedule's
/// `peak * makespan` is at least this.
pub fn memory_makespan_product_bound(tree: &TaskTree) -> u128 {
    tree.ids()
        .map(|v| tree.node_memory(v) as u128 * tree.time(v) as u128)
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub processors: usize,
    pub work_over_p: Ratio,
    pub critical_path: u64,
    pub makespan_lb: Ratio,
    pub mem_time_product_lb: u128,
}

pub fn bounds_report(tree: &TaskTree, p: usize) -> Result<BoundsReport, ZeroProcessors> {
    if p == 0 {
        return Err(ZeroProcessors);
    }
    let work_over_p = Ratio::new(tree.total_time() as u128, p as u128);
    let critical_path = critical_path(tree);
    Ok(BoundsReport {
        processors: p,
        work_over_p,
        critical_path,
        makespan_lb: work_over_p.max(Ratio::from_int(critical_path)),
        mem_time_product_lb: memory_makespan_product_bound(tree),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_fork, gen_widefork};
    use crate::tree::{NodeId, TaskTree, TreeBuilder, Weights};

    #[test]
    fn widefork_bound_is_work_over_p() {
        let t = gen_widefork(2);
        assert_eq!(t.len(), 7);
        assert_eq!(critical_path(&t), 3);
        assert_eq!(makespan_lower_bound(&t, 2).unwrap(), Ratio::new(7, 2));
    }

    #[test]
    fn fork_bound() {
        let lb = makespan_lower_bound(&gen_fork(2, 3), 2).unwrap();
        assert_eq!(lb, Ratio::new(35, 10));
        assert_eq!(lb.to_decimal_string(), "3.500000");
    }

    #[test]
    fn single_processor_bound_is_total_work() {
        let t = TaskTree::parse("1 0 3 0 1\n2 1 4 0 1\n3 1 5 0 1").unwrap();
        assert_eq!(makespan_lower_bound(&t, 1).unwrap(), Ratio::from_int(12));
        assert_eq!(makespan_lower_bound(&t, 0), Err(ZeroProcessors));
    }

    #[test]
    fn pebble_product_bound_is_2n_minus_1() {
        for t in [gen_widefork(3), gen_fork(3, 4), TreeBuilder::with_root(Weights::PEBBLE).0.build()] {
            assert_eq!(memory_makespan_product_bound(&t), 2 * t.len() as u128 - 1);
        }
    }

    #[test]
    fn product_bound_direct_formula() {
        let t = TaskTree::parse("1 0 2 1 3\n2 1 1 0 4").unwrap();
        assert_eq!(memory_makespan_product_bound(&t), 20);
    }

    #[test]
    fn depths_follow_the_root_path() {
        let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
        b.add_chain(root, 4, Weights::PEBBLE);
        assert_eq!(depths(&b.build()), vec![1, 2, 3, 4, 5]);

        let w = gen_widefork(3);
        let d = depths(&w);
        assert_eq!(d[w.root().index()], 1);
        for &a in w.children(w.root()) {
            assert_eq!(d[a.index()], 2);
            for &leaf in w.children(a) {
                assert_eq!(d[leaf.index()], 3);
            }
        }

        let t = TaskTree::parse("1 0 2 0 1\n2 1 0 0 1").unwrap();
        assert_eq!(depths(&t)[NodeId::from_index(1).index()], 2);
    }

    #[test]
    fn ratio_ordering_is_exact() {
        assert!(Ratio::new(1, 3) < Ratio::new(334, 1000));
        assert!(Ratio::new(2, 6) == Ratio::new(1, 3));
        assert_eq!(Ratio::new(41, 4).to_decimal_string(), "10.250000");
    }
}
