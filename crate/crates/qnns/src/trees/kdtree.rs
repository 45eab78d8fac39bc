//! Kd-tree with cyclic split axes and balanced cardinal splits.

use crate::dataset::Dataset;

use super::{scan_points, NnResult, NnSearch, QueryStats};

pub const DEFAULT_LEAF_CAP: usize = 2;

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<u32>),
    Split { axis: u8, value: f64, left: Box<Node>, right: Box<Node> },
}

/// A Kd-tree splitting on coordinate axes in cyclic order. Each split sends
/// the lower ceil(n/2) points (by coordinate, ties by index) left, so
/// sibling cardinalities differ by at most one.
#[derive(Debug, Clone)]
pub struct KdTree {
    data: Dataset,
    leaf_cap: usize,
    root: Node,
}

impl KdTree {
    pub fn build(data: Dataset, leaf_cap: usize) -> KdTree {
        assert!(!data.is_empty() && leaf_cap >= 1);
        let indices: Vec<u32> = (0..data.len() as u32).collect();
        let root = build_node(&data, indices, 0, leaf_cap);
        KdTree { data, leaf_cap, root }
    }

    pub fn leaf_cap(&self) -> usize {
        self.leaf_cap
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Line-oriented structure dump: depth, kind and size per node.
    pub fn dump_structure(&self) -> String {
        let mut out = String::new();
        dump_node(&self.root, 0, &mut out);
        out
    }

    /// Sizes of the two children of every split, for structural checks.
    pub fn split_cardinalities(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        collect_splits(&self.root, &mut out);
        out
    }
}

fn node_size(node: &Node) -> usize {
    match node {
        Node::Leaf(idx) => idx.len(),
        Node::Split { left, right, .. } => node_size(left) + node_size(right),
    }
}

fn collect_splits(node: &Node, out: &mut Vec<(usize, usize)>) {
    if let Node::Split { left, right, .. } = node {
        out.push((node_size(left), node_size(right)));
        collect_splits(left, out);
        collect_splits(right, out);
    }
}

fn dump_node(node: &Node, depth: usize, out: &mut String) {
    match node {
        Node::Leaf(idx) => {
            out.push_str(&format!("{}leaf size={}\n", "  ".repeat(depth), idx.len()));
        }
        Node::Split { axis, value, left, right } => {
            out.push_str(&format!(
                "{}split axis={} value={} size={}\n",
                "  ".repeat(depth),
                axis,
                value,
                node_size(node)
            ));
            dump_node(left, depth + 1, out);
            dump_node(right, depth + 1, out);
        }
    }
}

fn build_node(data: &Dataset, mut indices: Vec<u32>, depth: usize, leaf_cap: usize) -> Node {
    let n = indices.len();
    if n <= leaf_cap {
        return Node::Leaf(indices);
    }
    let axis = depth % data.dim();
    indices.sort_unstable_by(|&a, &b| {
        data.point(a as usize)[axis]
            .partial_cmp(&data.point(b as usize)[axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let left_n = n.div_ceil(2);
    let lo = data.point(indices[left_n - 1] as usize)[axis];
    let hi = data.point(indices[left_n] as usize)[axis];
    // all coordinates equal on this axis: splitting is pointless, but the
    // cyclic axis advance will find a separating axis unless all points
    // coincide, in which case the node stays a leaf
    if lo == hi && indices.iter().all(|&i| data.point(i as usize) == data.point(indices[0] as usize))
    {
        return Node::Leaf(indices);
    }
    let value = 0.5 * (lo + hi);
    let right_idx = indices.split_off(left_n);
    Node::Split {
        axis: axis as u8,
        value,
        left: Box::new(build_node(data, indices, depth + 1, leaf_cap)),
        right: Box::new(build_node(data, right_idx, depth + 1, leaf_cap)),
    }
}

impl NnSearch for KdTree {
    fn query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult {
        let mut best = (usize::MAX, f64::INFINITY);
        search(&self.data, &self.root, q, &mut best, stats);
        NnResult { index: best.0, dist2: best.1 }
    }

    fn name(&self) -> &'static str {
        "kd"
    }
}

fn search(
    data: &Dataset,
    node: &Node,
    q: &[f64],
    best: &mut (usize, f64),
    stats: &mut QueryStats,
) {
    stats.nodes_visited += 1;
    match node {
        Node::Leaf(idx) => scan_points(data, idx, q, best, stats),
        Node::Split { axis, value, left, right } => {
            let delta = q[*axis as usize] - value;
            let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
            search(data, near, q, best, stats);
            stats.hyperplane_tests += 1;
            if delta * delta < best.1 {
                search(data, far, q, best, stats);
            }
        }
    }
}
