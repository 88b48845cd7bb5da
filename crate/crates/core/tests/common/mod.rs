#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treesched::generators::{gen_random_assembly, AssemblyParams};
use treesched::transforms::normalize_for_memory_limit;
use treesched::{NodeId, TaskTree, Weights};

/// Caps on the weights drawn for random trees.
#[derive(Debug, Clone, Copy)]
pub struct WeightCaps {
    pub time: u64,
    pub exec: u64,
    pub out: u64,
}

pub const SMALL: WeightCaps = WeightCaps { time: 6, exec: 4, out: 8 };

fn assemble(parents: &[usize], weights: Vec<Weights>) -> TaskTree {
    let links: Vec<Option<NodeId>> = std::iter::once(None)
        .chain(parents.iter().map(|&p| Some(NodeId::from_index(p))))
        .collect();
    TaskTree::from_parents(&links, &weights).expect("valid random tree")
}

/// Tree with `n` nodes where node `i > 0` hangs under a uniformly chosen
/// earlier node. Times start at 0 when `zero_time` is set.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, caps: WeightCaps, zero_time: bool) -> TaskTree {
    let parents: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    let lo = u64::from(!zero_time);
    let weights = (0..n)
        .map(|_| {
            Weights::new(
                rng.gen_range(lo..=caps.time),
                rng.gen_range(0..=caps.exec),
                rng.gen_range(0..=caps.out),
            )
        })
        .collect();
    assemble(&parents, weights)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random assembly trees of `lo..=hi` nodes, seeded.
pub fn assembly_corpus(count: usize, lo: usize, hi: usize, seed: u64) -> Vec<TaskTree> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let nodes = r.gen_range(lo..=hi);
            gen_random_assembly(&AssemblyParams::new(nodes, seed.wrapping_mul(1000).wrapping_add(i as u64))).unwrap()
        })
        .collect()
}

/// The corpus as reduction trees without execution files.
pub fn reduction_corpus(count: usize, lo: usize, hi: usize, seed: u64) -> Vec<TaskTree> {
    assembly_corpus(count, lo, hi, seed)
        .iter()
        .map(|t| normalize_for_memory_limit(t).0)
        .collect()
}

pub fn arb_weights(caps: WeightCaps, zero_time: bool) -> impl Strategy<Value = Weights> {
    let lo = u64::from(!zero_time);
    (lo..=caps.time, 0..=caps.exec, 0..=caps.out).prop_map(|(w, n, f)| Weights::new(w, n, f))
}

/// Trees of `1..=max_nodes` nodes with weights within `caps`.
pub fn arb_tree(max_nodes: usize, caps: WeightCaps, zero_time: bool) -> impl Strategy<Value = TaskTree> {
    (1..=max_nodes)
        .prop_flat_map(move |n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            (parents, prop::collection::vec(arb_weights(caps, zero_time), n))
        })
        .prop_map(|(parents, weights)| assemble(&parents, weights))
}
