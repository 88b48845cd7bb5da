//! Deterministic tree constructors: the gadget families used to probe the
//! heuristics, plus a seeded synthetic generator of assembly-like trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodeId, TaskTree, TreeBuilder, Weights};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid parameter for {family}: {message}")]
    InvalidParameter { family: &'static str, message: String },
}

fn invalid(family: &'static str, message: impl Into<String>) -> GenError {
    GenError::InvalidParameter {
        family,
        message: message.into(),
    }
}

/// Root with `p * k` leaves.
pub fn gen_fork(p: usize, k: usize) -> TaskTree {
    assert!(p >= 1 && k >= 1, "fork needs p, k >= 1");
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    for _ in 0..p * k {
        b.add(root, Weights::PEBBLE);
    }
    b.build()
}

/// Root with `m` children, each with `m` leaves.
pub fn gen_widefork(m: usize) -> TaskTree {
    assert!(m >= 1, "widefork needs m >= 1");
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    for _ in 0..m {
        let a = b.add(root, Weights::PEBBLE);
        for _ in 0..m {
            b.add(a, Weights::PEBBLE);
        }
    }
    b.build()
}

/// Root with `3m` children; child `i` has `3m * a[i]` leaves.
pub fn gen_np3p(a: &[u64]) -> Result<TaskTree, GenError> {
    if a.is_empty() || !a.len().is_multiple_of(3) {
        return Err(invalid("np3p", format!("list length {} is not a positive multiple of 3", a.len())));
    }
    let width = a.len() as u64;
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    for &ai in a {
        let node = b.add(root, Weights::PEBBLE);
        for _ in 0..width * ai {
            b.add(node, Weights::PEBBLE);
        }
    }
    Ok(b.build())
}

/// Balanced binary top tree with `ceil(p/2)` leaves, each rooting a comb of
/// height `k`; for odd `p` the last one roots a chain instead. `p*k - 1`
/// nodes in total.
pub fn gen_comb_binary(p: usize, k: usize) -> Result<TaskTree, GenError> {
    if p < 2 || k < 2 {
        return Err(invalid("comb-binary", "requires p >= 2 and k >= 2"));
    }
    let tops = p.div_ceil(2);
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    let mut top_leaves = Vec::with_capacity(tops);
    binary_top(&mut b, root, tops, &mut top_leaves);
    for (idx, &top) in top_leaves.iter().enumerate() {
        if p % 2 == 1 && idx + 1 == tops {
            b.add_chain(top, k - 2, Weights::PEBBLE);
            continue;
        }
        let mut spine = top;
        for _ in 0..k - 1 {
            b.add(spine, Weights::PEBBLE);
            spine = b.add(spine, Weights::PEBBLE);
        }
    }
    Ok(b.build())
}

fn binary_top(b: &mut TreeBuilder, at: NodeId, leaves: usize, out: &mut Vec<NodeId>) {
    if leaves == 1 {
        out.push(at);
        return;
    }
    let left = b.add(at, Weights::PEBBLE);
    let right = b.add(at, Weights::PEBBLE);
    binary_top(b, left, leaves.div_ceil(2), out);
    binary_top(b, right, leaves / 2, out);
}

/// Root with `p - 1` identical subtrees. Each has a spine
/// `cp_1 .. cp_{delta-1}`; `cp_j` carries a node `d_j` with `delta - j + 1`
/// leaves, and the deepest spine node also carries a chain of `k` nodes.
pub fn gen_chains_cp(p: usize, delta: usize, k: usize) -> Result<TaskTree, GenError> {
    if p < 2 || delta < 2 || k < 1 {
        return Err(invalid("chains-cp", "requires p >= 2, delta >= 2 and k >= 1"));
    }
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    for _ in 0..p - 1 {
        let mut cp = b.add(root, Weights::PEBBLE);
        for j in 1..delta {
            let d = b.add(cp, Weights::PEBBLE);
            for _ in 0..delta - j + 1 {
                b.add(d, Weights::PEBBLE);
            }
            if j + 1 < delta {
                cp = b.add(cp, Weights::PEBBLE);
            }
        }
        b.add_chain(cp, k, Weights::PEBBLE);
    }
    Ok(b.build())
}

/// Backbone of joins `J_1 (root) .. J_{k-1}`, each `J_i` holding `J_{i+1}`;
/// joins below the root carry `p - 1` leaves, the root `p - 2`, and the last
/// join roots a chain of `k - 1` nodes. A memory-optimal postorder needs
/// `p + 1`, while inner-first list scheduling on `p` processors reaches
/// `(k - 1)(p - 1) + 1` once `k >= 3`.
pub fn gen_inner_adversary(p: usize, k: usize) -> Result<TaskTree, GenError> {
    if p < 2 || k < 2 {
        return Err(invalid("inner-adversary", "requires p >= 2 and k >= 2"));
    }
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    let mut join = root;
    for i in 1..k {
        let leaves = if i == 1 { p - 2 } else { p - 1 };
        for _ in 0..leaves {
            b.add(join, Weights::PEBBLE);
        }
        if i + 1 < k {
            join = b.add(join, Weights::PEBBLE);
        }
    }
    b.add_chain(join, k - 1, Weights::PEBBLE);
    Ok(b.build())
}

/// Spine `s_1 .. s_{c-1}` with `c` hanging chains whose bottoms all sit at
/// depth `len`. The postorder peak is 3; deepest-first with `c` processors
/// starts every chain at once.
pub fn gen_deepest_adversary(c: usize, len: usize) -> Result<TaskTree, GenError> {
    if c < 2 || len < c + 2 {
        return Err(invalid("deepest-adversary", "requires c >= 2 and L >= c + 2"));
    }
    let (mut b, root) = TreeBuilder::with_root(Weights::PEBBLE);
    let mut spine = root;
    for i in 1..c - 1 {
        let next = b.add(spine, Weights::PEBBLE);
        b.add_chain(spine, len - i, Weights::PEBBLE);
        spine = next;
    }
    b.add_chain(spine, len - c + 1, Weights::PEBBLE);
    b.add_chain(spine, len - c + 1, Weights::PEBBLE);
    Ok(b.build())
}

/// Weighted gadget for memory-bounded heuristics: a zero-time root with `p`
/// branches `a_i`; `a_i` holds `b_i` (time 1) above `c_i` (time 1, output
/// `mem`) and `d_i` (time `k`, output `mem / p`).
pub fn gen_membound_adversary(p: usize, k: u64, mem: u64) -> Result<TaskTree, GenError> {
    if p < 2 || k < 1 {
        return Err(invalid("membound-adversary", "requires p >= 2 and k >= 1"));
    }
    if !mem.is_multiple_of(p as u64) {
        return Err(invalid("membound-adversary", format!("p = {p} does not divide M = {mem}")));
    }
    let (mut b, root) = TreeBuilder::with_root(Weights::new(0, 0, 0));
    for _ in 0..p {
        let a = b.add(root, Weights::new(0, 0, 0));
        let bi = b.add(a, Weights::new(1, 0, 0));
        b.add(bi, Weights::new(1, 0, mem));
        b.add(a, Weights::new(k, 0, mem / p as u64));
    }
    Ok(b.build())
}

/// Zero-weight root over `p` unit-time leaves that each need one unit of
/// execution memory.
pub fn gen_flat(p: usize) -> TaskTree {
    assert!(p >= 1, "flat needs p >= 1");
    let (mut b, root) = TreeBuilder::with_root(Weights::new(0, 0, 0));
    for _ in 0..p {
        b.add(root, Weights::new(1, 1, 0));
    }
    b.build()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyParams {
    pub nodes: usize,
    #[serde(default = "default_eta")]
    pub eta: (u64, u64),
    #[serde(default = "default_mu")]
    pub mu: (u64, u64),
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Probability of hanging each new node under the previous one.
    #[serde(default = "default_depth_bias")]
    pub depth_bias: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_eta() -> (u64, u64) {
    (1, 8)
}

fn default_mu() -> (u64, u64) {
    (1, 12)
}

fn default_max_degree() -> usize {
    8
}

fn default_depth_bias() -> f64 {
    0.5
}

impl AssemblyParams {
    pub fn new(nodes: usize, seed: u64) -> Self {
        AssemblyParams {
            nodes,
            eta: default_eta(),
            mu: default_mu(),
            max_degree: default_max_degree(),
            depth_bias: default_depth_bias(),
            seed,
        }
    }
}

/// Weights of a front that amalgamates `eta` variables and has `mu` rows.
pub fn assembly_weights(eta: u64, mu: u64) -> Weights {
    let m = mu - 1;
    Weights::new(2 * eta.pow(3) / 3 + eta * eta * m + eta * m * m, eta * eta + 2 * eta * m, m * m)
}

/// Random tree by sequential attachment under a degree cap, with
/// assembly-style weights drawn per node.
pub fn gen_random_assembly(params: &AssemblyParams) -> Result<TaskTree, GenError> {
    let AssemblyParams {
        nodes,
        eta,
        mu,
        max_degree,
        depth_bias,
        seed,
    } = *params;
    if nodes == 0 {
        return Err(invalid("random-assembly", "nodes must be at least 1"));
    }
    if eta.0 == 0 || eta.0 > eta.1 {
        return Err(invalid("random-assembly", "eta range must be nonempty and positive"));
    }
    if mu.0 == 0 || mu.0 > mu.1 {
        return Err(invalid("random-assembly", "mu range must be nonempty and positive"));
    }
    if max_degree == 0 {
        return Err(invalid("random-assembly", "max_degree must be at least 1"));
    }
    if !(0.0..=1.0).contains(&depth_bias) {
        return Err(invalid("random-assembly", "depth_bias must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| assembly_weights(rng.gen_range(eta.0..=eta.1), rng.gen_range(mu.0..=mu.1));
    let (mut b, root) = TreeBuilder::with_root(draw(&mut rng));
    let mut degree = vec![0usize];
    // nodes that can still take a child
    let mut open = vec![root];
    let mut slot = vec![0usize];
    for _ in 1..nodes {
        let last = NodeId::from_index(b.len() - 1);
        let parent = if degree[last.index()] < max_degree && rng.gen_bool(depth_bias) {
            last
        } else {
            open[rng.gen_range(0..open.len())]
        };
        let child = b.add(parent, draw(&mut rng));
        degree.push(0);
        degree[parent.index()] += 1;
        slot.push(open.len());
        open.push(child);
        if degree[parent.index()] == max_degree {
            let at = slot[parent.index()];
            open.swap_remove(at);
            if let Some(&moved) = open.get(at) {
                slot[moved.index()] = at;
            }
        }
    }
    Ok(b.build())
}

/// Serializable description of a generated tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GenSpec {
    Fork { p: usize, k: usize },
    Widefork { m: usize },
    Np3p { a: Vec<u64> },
    CombBinary { p: usize, k: usize },
    ChainsCp { p: usize, delta: usize, k: usize },
    InnerAdversary { p: usize, k: usize },
    DeepestAdversary { c: usize, len: usize },
    MemboundAdversary { p: usize, k: u64, mem: u64 },
    Flat { p: usize },
    RandomAssembly(AssemblyParams),
}

impl GenSpec {
    pub fn build(&self) -> Result<TaskTree, GenError> {
        match self {
            GenSpec::Fork { p, k } => {
                if *p == 0 || *k == 0 {
                    return Err(invalid("fork", "requires p >= 1 and k >= 1"));
                }
                Ok(gen_fork(*p, *k))
            }
            GenSpec::Widefork { m } => {
                if *m == 0 {
                    return Err(invalid("widefork", "requires m >= 1"));
                }
                Ok(gen_widefork(*m))
            }
            GenSpec::Np3p { a } => gen_np3p(a),
            GenSpec::CombBinary { p, k } => gen_comb_binary(*p, *k),
            GenSpec::ChainsCp { p, delta, k } => gen_chains_cp(*p, *delta, *k),
            GenSpec::InnerAdversary { p, k } => gen_inner_adversary(*p, *k),
            GenSpec::DeepestAdversary { c, len } => gen_deepest_adversary(*c, *len),
            GenSpec::MemboundAdversary { p, k, mem } => gen_membound_adversary(*p, *k, *mem),
            GenSpec::Flat { p } => {
                if *p == 0 {
                    return Err(invalid("flat", "requires p >= 1"));
                }
                Ok(gen_flat(*p))
            }
            GenSpec::RandomAssembly(params) => gen_random_assembly(params),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            GenSpec::Fork { .. } => "fork",
            GenSpec::Widefork { .. } => "widefork",
            GenSpec::Np3p { .. } => "np3p",
            GenSpec::CombBinary { .. } => "comb-binary",
            GenSpec::ChainsCp { .. } => "chains-cp",
            GenSpec::InnerAdversary { .. } => "inner-adversary",
            GenSpec::DeepestAdversary { .. } => "deepest-adversary",
            GenSpec::MemboundAdversary { .. } => "membound-adversary",
            GenSpec::Flat { .. } => "flat",
            GenSpec::RandomAssembly(_) => "random-assembly",
        }
    }

    /// Copy with the seed advanced by `offset`; only random families change.
    pub fn reseeded(&self, offset: u64) -> GenSpec {
        match self {
            GenSpec::RandomAssembly(params) => GenSpec::RandomAssembly(AssemblyParams {
                seed: params.seed.wrapping_add(offset),
                ..params.clone()
            }),
            other => other.clone(),
        }
    }

    /// Short stable name, e.g. `fork-2-3` or `random-assembly-500-s7`.
    pub fn label(&self) -> String {
        match self {
            GenSpec::Fork { p, k } => format!("fork-{p}-{k}"),
            GenSpec::Widefork { m } => format!("widefork-{m}"),
            GenSpec::Np3p { a } => {
                let parts: Vec<String> = a.iter().map(u64::to_string).collect();
                format!("np3p-{}", parts.join("_"))
            }
            GenSpec::CombBinary { p, k } => format!("comb-binary-{p}-{k}"),
            GenSpec::ChainsCp { p, delta, k } => format!("chains-cp-{p}-{delta}-{k}"),
            GenSpec::InnerAdversary { p, k } => format!("inner-adversary-{p}-{k}"),
            GenSpec::DeepestAdversary { c, len } => format!("deepest-adversary-{c}-{len}"),
            GenSpec::MemboundAdversary { p, k, mem } => format!("membound-adversary-{p}-{k}-{mem}"),
            GenSpec::Flat { p } => format!("flat-{p}"),
            GenSpec::RandomAssembly(params) => {
                format!("random-assembly-{}-s{}", params.nodes, params.seed)
            }
        }
    }

    /// Comment lines recorded at the top of generated tree files.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "genspec: {}",
            serde_json::to_string(self).expect("GenSpec serializes")
        )];
        match self {
            GenSpec::InnerAdversary { .. } => lines.push(
                "shape: joins with p-1 leaves (root p-2), chain of k-1 under the last join".into(),
            ),
            GenSpec::DeepestAdversary { .. } => {
                lines.push("shape: spine with chains equalized to a common bottom depth".into())
            }
            _ => {}
        }
        lines
    }
}
