//! Quantization tree: recursive Lloyd partitions with Leibniz elimination.
//!
//! Each internal node quantizes its points with Lloyd's algorithm, snaps
//! the codebook onto dataset points, and partitions the points among the
//! resulting Voronoi cells. A query descends into the owner cell first,
//! then visits siblings in increasing center distance, skipping a sibling
//! when the signed distance from the query to the shared bisector (the
//! Leibniz margin, one subtraction and one multiplication thanks to the
//! precomputed `1/(2|AB|)` coefficients) already exceeds the current best.
//!
//! In FRIENDS mode the sibling candidates are further restricted to the
//! friend list of the owner cell. The geometric friend lists are unioned
//! with the exhaustive data-dependent ones whenever the former miss an
//! entry, so the search stays exact; the number of such fallbacks is
//! recorded on the tree.

use crate::dataset::Dataset;
use crate::delaunay::Triangulation;
use crate::error::Error;
use crate::friends::{friends_fast, friends_first, FriendLists};
use crate::geometry::squared_distance;
use crate::quantization::{lloyd, snap_to_dataset, Codebook, LloydOpts};
use crate::rng;
use crate::Result;

use super::{scan_points, NnResult, NnSearch, QueryStats};

/// Default branching for benchmark builds.
pub const DEFAULT_CHILDREN: usize = 35;

/// Lloyd restarts per node during the build; the codebook with the lowest
/// final distortion wins. More restarts improve the partition consistency
/// (and thus way-down accuracy) at preprocessing cost only.
const LLOYD_RESTARTS: u64 = 8;

/// Highest dimension supported by FRIENDS mode.
pub const FRIENDS_MAX_DIM: usize = 7;

/// Sibling elimination policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtreeMode {
    /// All siblings are candidates.
    Crude,
    /// Candidates restricted to the owner's friend list.
    Friends,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<u32>),
    Internal {
        /// Dataset indices of the snapped cell centers.
        centers: Vec<u32>,
        /// Row-major `1/(2|AB|)` for every ordered center pair.
        inv_2ab: Vec<f64>,
        /// Present in FRIENDS mode when the node could be triangulated.
        friends: Option<FriendLists>,
        children: Vec<Node>,
    },
}

/// The quantization tree.
#[derive(Debug, Clone)]
pub struct Qtree {
    data: Dataset,
    n_c: usize,
    leaf_cap: usize,
    mode: QtreeMode,
    root: Node,
    friend_fallbacks: usize,
    crude_nodes: usize,
}

impl Qtree {
    /// Builds the tree. `seed` drives the per-node Lloyd initializations.
    pub fn build(
        data: Dataset,
        n_c: usize,
        leaf_cap: usize,
        mode: QtreeMode,
        seed: u64,
    ) -> Result<Qtree> {
        if data.is_empty() || n_c < 2 || leaf_cap < 1 {
            return Err(Error::InvalidConfig("qtree needs data, n_c >= 2, leaf_cap >= 1".into()));
        }
        if mode == QtreeMode::Friends && data.dim() > FRIENDS_MAX_DIM {
            return Err(Error::DimensionTooHigh(data.dim()));
        }
        let indices: Vec<u32> = (0..data.len() as u32).collect();
        let mut stats = BuildStats::default();
        let root = build_node(&data, indices, n_c, leaf_cap, mode, seed, 0, &mut stats)?;
        Ok(Qtree {
            data,
            n_c,
            leaf_cap,
            mode,
            root,
            friend_fallbacks: stats.friend_fallbacks,
            crude_nodes: stats.crude_nodes,
        })
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn leaf_cap(&self) -> usize {
        self.leaf_cap
    }

    pub fn mode(&self) -> QtreeMode {
        self.mode
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Nodes where the geometric friend lists needed the exhaustive union.
    pub fn friend_fallbacks(&self) -> usize {
        self.friend_fallbacks
    }

    /// FRIENDS-mode nodes that silently degraded to crude elimination
    /// (too few centers to triangulate, or a degenerate configuration).
    pub fn crude_nodes(&self) -> usize {
        self.crude_nodes
    }

    /// Line-oriented structure dump: depth, kind, size, branching and mean
    /// friend-list length.
    pub fn dump_structure(&self) -> String {
        let mut out = String::new();
        dump_node(&self.root, 0, &mut out);
        out
    }

    /// Descends only into owner cells and scans the final leaf: the "way
    /// down" approximation of the nearest neighbor.
    pub fn waydown_query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut node = &self.root;
        loop {
            stats.nodes_visited += 1;
            match node {
                Node::Leaf(idx) => {
                    scan_points(&self.data, idx, q, &mut best, stats);
                    return NnResult { index: best.0, dist2: best.1 };
                }
                Node::Internal { centers, children, .. } => {
                    let mut owner = (0usize, f64::INFINITY);
                    for (c, &ci) in centers.iter().enumerate() {
                        stats.distance_evals += 1;
                        let d2 = squared_distance(q, self.data.point(ci as usize));
                        if d2 < owner.1 {
                            owner = (c, d2);
                        }
                    }
                    node = &children[owner.0];
                }
            }
        }
    }
}

#[derive(Default)]
struct BuildStats {
    friend_fallbacks: usize,
    crude_nodes: usize,
}

fn count_distinct(data: &Dataset, indices: &[u32]) -> usize {
    let mut sorted: Vec<u32> = indices.to_vec();
    sorted.sort_unstable_by(|&a, &b| {
        data.point(a as usize).partial_cmp(data.point(b as usize)).unwrap()
    });
    let mut distinct = 0;
    for (pos, &i) in sorted.iter().enumerate() {
        if pos == 0 || data.point(sorted[pos - 1] as usize) != data.point(i as usize) {
            distinct += 1;
        }
    }
    distinct
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    data: &Dataset,
    indices: Vec<u32>,
    n_c: usize,
    leaf_cap: usize,
    mode: QtreeMode,
    seed: u64,
    depth: usize,
    stats: &mut BuildStats,
) -> Result<Node> {
    let n = indices.len();
    if n <= leaf_cap {
        return Ok(Node::Leaf(indices));
    }
    let distinct = count_distinct(data, &indices);
    if distinct < 2 {
        return Ok(Node::Leaf(indices));
    }
    let n_sites = n_c.min(distinct);
    let local = data.subset(&indices.iter().map(|&i| i as usize).collect::<Vec<_>>());
    let node_seed = rng::derive2(seed, depth as u64, indices[0] as u64);
    let mut best: Option<crate::quantization::LloydResult> = None;
    for restart in 0..LLOYD_RESTARTS {
        let opts =
            LloydOpts { rng_seed: rng::derive(node_seed, restart), ..Default::default() };
        let run = lloyd(&local, n_sites, opts)?;
        let better = best
            .as_ref()
            .map(|b| run.distortion_history.last() < b.distortion_history.last())
            .unwrap_or(true);
        if better {
            best = Some(run);
        }
    }
    let r = best.expect("at least one restart");
    let snapped = snap_to_dataset(&r.codebook, &local);
    let local_centers = snapped.snapped_indices().expect("snap always yields indices");
    let centers: Vec<u32> = local_centers.iter().map(|&li| indices[li]).collect();

    // partition by nearest center (lowest index on ties)
    let mut parts: Vec<Vec<u32>> = vec![Vec::new(); n_sites];
    for &i in &indices {
        let p = data.point(i as usize);
        let mut owner = (0usize, f64::INFINITY);
        for (c, &ci) in centers.iter().enumerate() {
            let d2 = squared_distance(p, data.point(ci as usize));
            if d2 < owner.1 {
                owner = (c, d2);
            }
        }
        parts[owner.0].push(i);
    }
    // each snapped center is a node point assigned to itself, so every
    // child is nonempty and strictly smaller than the node
    debug_assert!(parts.iter().all(|p| !p.is_empty() && p.len() < n));

    let mut inv_2ab = vec![0.0; n_sites * n_sites];
    for a in 0..n_sites {
        for b in 0..n_sites {
            if a != b {
                let ab2 = squared_distance(
                    data.point(centers[a] as usize),
                    data.point(centers[b] as usize),
                );
                inv_2ab[a * n_sites + b] = 0.5 / ab2.sqrt();
            }
        }
    }

    let friends = if mode == QtreeMode::Friends {
        match node_friends(&snapped, &local, node_seed) {
            Some((fl, fell_back)) => {
                if fell_back {
                    stats.friend_fallbacks += 1;
                }
                Some(fl)
            }
            None => {
                stats.crude_nodes += 1;
                None
            }
        }
    } else {
        None
    };

    let mut children = Vec::with_capacity(n_sites);
    for part in parts {
        children.push(build_node(data, part, n_c, leaf_cap, mode, seed, depth + 1, stats)?);
    }
    Ok(Node::Internal { centers, inv_2ab, friends, children })
}

/// Friend lists for one node: geometric lists unioned with the exhaustive
/// ones when the former miss an entry. `None` means the node degrades to
/// crude elimination.
fn node_friends(snapped: &Codebook, local: &Dataset, seed: u64) -> Option<(FriendLists, bool)> {
    if snapped.len() < local.dim() + 1 {
        return None;
    }
    let tri = Triangulation::build(snapped.sites(), seed).ok()?;
    let first = friends_first(&tri, snapped, local).ok()?;
    match friends_fast(&tri) {
        Ok(fast) if fast.is_superset_of(&first) => Some((fast, false)),
        Ok(fast) => Some((fast.union(&first), true)),
        Err(_) => Some((first, true)),
    }
}

fn node_size(node: &Node) -> usize {
    match node {
        Node::Leaf(idx) => idx.len(),
        Node::Internal { children, .. } => children.iter().map(node_size).sum(),
    }
}

fn dump_node(node: &Node, depth: usize, out: &mut String) {
    match node {
        Node::Leaf(idx) => {
            out.push_str(&format!("{}leaf size={}\n", "  ".repeat(depth), idx.len()));
        }
        Node::Internal { children, friends, .. } => {
            let fr = match friends {
                Some(fl) => format!(" mean_friends={:.2}", fl.mean_len()),
                None => String::new(),
            };
            out.push_str(&format!(
                "{}node size={} children={}{}\n",
                "  ".repeat(depth),
                node_size(node),
                children.len(),
                fr
            ));
            for c in children {
                dump_node(c, depth + 1, out);
            }
        }
    }
}

impl NnSearch for Qtree {
    fn query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult {
        let mut best = (usize::MAX, f64::INFINITY);
        // scratch stacks shared by all node visits of this query
        let mut scratch = Scratch {
            d2: Vec::with_capacity(4 * self.n_c),
            candidates: Vec::with_capacity(4 * self.n_c),
        };
        search(&self.data, &self.root, q, &mut best, stats, &mut scratch);
        NnResult { index: best.0, dist2: best.1 }
    }

    fn name(&self) -> &'static str {
        match self.mode {
            QtreeMode::Crude => "qtree-crude",
            QtreeMode::Friends => "qtree-friends",
        }
    }
}

/// Per-query scratch stacks; each internal node uses the segment it
/// pushed and truncates it away before returning.
struct Scratch {
    d2: Vec<f64>,
    candidates: Vec<(f64, u32)>,
}

fn search(
    data: &Dataset,
    node: &Node,
    q: &[f64],
    best: &mut (usize, f64),
    stats: &mut QueryStats,
    scratch: &mut Scratch,
) {
    stats.nodes_visited += 1;
    match node {
        Node::Leaf(idx) => scan_points(data, idx, q, best, stats),
        Node::Internal { centers, inv_2ab, friends, children } => {
            let k = centers.len();
            let d2_base = scratch.d2.len();
            let mut owner = (0usize, f64::INFINITY);
            for (c, &ci) in centers.iter().enumerate() {
                stats.distance_evals += 1;
                let d = squared_distance(q, data.point(ci as usize));
                scratch.d2.push(d);
                if d < owner.1 {
                    owner = (c, d);
                }
            }
            search(data, &children[owner.0], q, best, stats, scratch);
            // sibling candidates (the owner's friends when known) in
            // increasing center distance; margins are not monotone in
            // center distance, so elimination never breaks the loop
            let cand_base = scratch.candidates.len();
            match friends {
                Some(fl) => {
                    for &b in fl.of(owner.0) {
                        if b != owner.0 {
                            scratch.candidates.push((scratch.d2[d2_base + b], b as u32));
                        }
                    }
                }
                None => {
                    for c in 0..k {
                        if c != owner.0 {
                            scratch.candidates.push((scratch.d2[d2_base + c], c as u32));
                        }
                    }
                }
            }
            scratch.candidates[cand_base..]
                .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let cand_end = scratch.candidates.len();
            for i in cand_base..cand_end {
                let (d2_b, b) = scratch.candidates[i];
                stats.hyperplane_tests += 1;
                let margin = (d2_b - owner.1) * inv_2ab[owner.0 * k + b as usize];
                if margin * margin >= best.1 {
                    continue;
                }
                search(data, &children[b as usize], q, best, stats, scratch);
            }
            scratch.candidates.truncate(cand_base);
            scratch.d2.truncate(d2_base);
        }
    }
}
