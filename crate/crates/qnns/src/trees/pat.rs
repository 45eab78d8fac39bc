//! Principal axis tree: multiway splits along the local principal axis.

use crate::dataset::Dataset;

use super::{scan_points, NnResult, NnSearch, QueryStats};

pub const DEFAULT_CHILDREN: usize = 7;

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<u32>),
    Internal { axis: Vec<f64>, children: Vec<Child> },
}

#[derive(Debug, Clone)]
struct Child {
    /// Projection interval covered by this child's points.
    min: f64,
    max: f64,
    node: Node,
}

/// A tree partitioning each node into `n_c` consecutive blocks along the
/// principal axis of the node's points. Elimination uses the projection gap
/// between the query and a child's interval: points of the child are at
/// least that far away.
#[derive(Debug, Clone)]
pub struct PatTree {
    data: Dataset,
    n_c: usize,
    leaf_cap: usize,
    root: Node,
}

impl PatTree {
    pub fn build(data: Dataset, n_c: usize, leaf_cap: usize) -> PatTree {
        assert!(!data.is_empty() && n_c >= 2 && leaf_cap >= 1);
        let indices: Vec<u32> = (0..data.len() as u32).collect();
        let root = build_node(&data, indices, n_c, leaf_cap);
        PatTree { data, n_c, leaf_cap, root }
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn leaf_cap(&self) -> usize {
        self.leaf_cap
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Line-oriented structure dump: depth, kind, size, branching.
    pub fn dump_structure(&self) -> String {
        let mut out = String::new();
        dump_node(&self.root, 0, &mut out);
        out
    }

    /// Child cardinalities of every internal node, for structural checks.
    pub fn branch_cardinalities(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        collect_branches(&self.root, &mut out);
        out
    }

    /// Descends to the single best-matching leaf and scans it: the "way
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
                Node::Internal { axis, children } => {
                    let t = dot(q, axis);
                    let pick = children
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| {
                            gap(t, a).partial_cmp(&gap(t, b)).unwrap()
                        })
                        .unwrap()
                        .0;
                    node = &children[pick].node;
                }
            }
        }
    }
}

fn node_size(node: &Node) -> usize {
    match node {
        Node::Leaf(idx) => idx.len(),
        Node::Internal { children, .. } => children.iter().map(|c| node_size(&c.node)).sum(),
    }
}

fn collect_branches(node: &Node, out: &mut Vec<Vec<usize>>) {
    if let Node::Internal { children, .. } = node {
        out.push(children.iter().map(|c| node_size(&c.node)).collect());
        for c in children {
            collect_branches(&c.node, out);
        }
    }
}

fn dump_node(node: &Node, depth: usize, out: &mut String) {
    match node {
        Node::Leaf(idx) => {
            out.push_str(&format!("{}leaf size={}\n", "  ".repeat(depth), idx.len()));
        }
        Node::Internal { children, .. } => {
            out.push_str(&format!(
                "{}node size={} children={}\n",
                "  ".repeat(depth),
                node_size(node),
                children.len()
            ));
            for c in children {
                dump_node(&c.node, depth + 1, out);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection gap from `t` to a child's interval (0 when inside).
#[inline]
fn gap(t: f64, c: &Child) -> f64 {
    (c.min - t).max(t - c.max).max(0.0)
}

/// Dominant eigenvector of the covariance matrix by power iteration.
/// Returns `None` for (numerically) zero variance.
pub fn principal_axis(data: &Dataset, indices: &[u32]) -> Option<Vec<f64>> {
    let d = data.dim();
    let n = indices.len();
    let mut mean = vec![0.0; d];
    for &i in indices {
        for (m, v) in mean.iter_mut().zip(data.point(i as usize)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for &i in indices {
        let p = data.point(i as usize);
        for a in 0..d {
            let da = p[a] - mean[a];
            for b in a..d {
                cov[a * d + b] += da * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[a * d + b] = cov[b * d + a];
        }
    }
    let trace: f64 = (0..d).map(|a| cov[a * d + a]).sum();
    if trace <= 0.0 {
        return None;
    }
    // start from the largest-norm column, a safe deterministic choice
    let start = (0..d)
        .max_by(|&a, &b| {
            let na: f64 = (0..d).map(|k| cov[k * d + a].powi(2)).sum();
            let nb: f64 = (0..d).map(|k| cov[k * d + b].powi(2)).sum();
            na.partial_cmp(&nb).unwrap()
        })
        .unwrap();
    let mut v: Vec<f64> = (0..d).map(|k| cov[k * d + start]).collect();
    let norm = dot(&v, &v).sqrt();
    if norm == 0.0 {
        return None;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    for _ in 0..200 {
        let mut w = vec![0.0; d];
        for a in 0..d {
            w[a] = dot(&cov[a * d..(a + 1) * d], &v);
        }
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            break;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let drift: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        let flipped: f64 = v.iter().zip(&w).map(|(a, b)| (a + b).abs()).sum();
        let converged = drift.min(flipped) < 1e-12;
        v = w;
        if converged {
            break;
        }
    }
    // canonical sign: largest-magnitude component positive
    let lead = (0..d).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap()).unwrap();
    if v[lead] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    Some(v)
}

fn build_node(data: &Dataset, mut indices: Vec<u32>, n_c: usize, leaf_cap: usize) -> Node {
    let n = indices.len();
    if n <= leaf_cap {
        return Node::Leaf(indices);
    }
    let Some(axis) = principal_axis(data, &indices) else {
        // all points coincide: no axis can separate them
        return Node::Leaf(indices);
    };
    indices.sort_unstable_by(|&a, &b| {
        dot(data.point(a as usize), &axis)
            .partial_cmp(&dot(data.point(b as usize), &axis))
            .unwrap()
            .then(a.cmp(&b))
    });
    // block sizes: n mod n_c blocks of floor(n/n_c)+1, the rest floor(n/n_c)
    let base = n / n_c;
    let extra = n % n_c;
    let mut children = Vec::new();
    let mut pos = 0;
    for b in 0..n_c {
        let size = base + usize::from(b < extra);
        if size == 0 {
            continue;
        }
        let block: Vec<u32> = indices[pos..pos + size].to_vec();
        pos += size;
        let projections: Vec<f64> =
            block.iter().map(|&i| dot(data.point(i as usize), &axis)).collect();
        let min = projections.iter().copied().fold(f64::INFINITY, f64::min);
        let max = projections.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        children.push(Child { min, max, node: build_node(data, block, n_c, leaf_cap) });
    }
    Node::Internal { axis, children }
}

impl NnSearch for PatTree {
    fn query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult {
        let mut best = (usize::MAX, f64::INFINITY);
        search(&self.data, &self.root, q, &mut best, stats);
        NnResult { index: best.0, dist2: best.1 }
    }

    fn name(&self) -> &'static str {
        "pat"
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
        Node::Internal { axis, children } => {
            let t = dot(q, axis);
            let mut order: Vec<usize> = (0..children.len()).collect();
            order.sort_unstable_by(|&a, &b| {
                gap(t, &children[a]).partial_cmp(&gap(t, &children[b])).unwrap()
            });
            for &c in &order {
                let g = gap(t, &children[c]);
                if g > 0.0 {
                    stats.hyperplane_tests += 1;
                    // gaps are visited in increasing order and the bound
                    // only shrinks, so the first eliminated child ends the
                    // node
                    if g * g >= best.1 {
                        break;
                    }
                }
                search(data, &children[c].node, q, best, stats);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Distribution;
    use crate::trees::BruteForce;

    #[test]
    fn principal_axis_of_elongated_cloud() {
        // points spread along (1, 1)/sqrt(2) with tiny orthogonal noise
        let mut rows = Vec::new();
        for i in 0..50 {
            let t = i as f64 / 10.0;
            let eps = 0.001 * ((i * 7919) % 11) as f64;
            rows.push(vec![t + eps, t - eps]);
        }
        let data = Dataset::from_rows(&rows).unwrap();
        let idx: Vec<u32> = (0..50).collect();
        let v = principal_axis(&data, &idx).unwrap();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - c).abs() < 1e-3 && (v[1] - c).abs() < 1e-3, "{v:?}");
    }

    #[test]
    fn principal_axis_degenerate_cases() {
        let data = Dataset::from_flat(2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!(principal_axis(&data, &[0, 1, 2]).is_none());
        // exact 1-d data embedded in 2-d: axis is e_0
        let data = Dataset::from_flat(2, vec![0.0, 5.0, 1.0, 5.0, 2.0, 5.0]).unwrap();
        let v = principal_axis(&data, &[0, 1, 2]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9);
    }

    #[test]
    fn power_iteration_matches_2x2_eigen_oracle() {
        let data = Dataset::generate(Distribution::Gaussian, 200, 2, 31);
        let idx: Vec<u32> = (0..200).collect();
        let v = principal_axis(&data, &idx).unwrap();
        // closed-form dominant eigenvector of the 2x2 covariance
        let n = 200.0;
        let (mut mx, mut my) = (0.0, 0.0);
        for p in data.iter() {
            mx += p[0];
            my += p[1];
        }
        mx /= n;
        my /= n;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for p in data.iter() {
            a += (p[0] - mx) * (p[0] - mx);
            b += (p[0] - mx) * (p[1] - my);
            c += (p[1] - my) * (p[1] - my);
        }
        let lam = 0.5 * (a + c + ((a - c) * (a - c) + 4.0 * b * b).sqrt());
        let (ex, ey) = if b.abs() > 1e-12 { (lam - c, b) } else { (1.0, 0.0) };
        let norm = (ex * ex + ey * ey).sqrt();
        let dot = (v[0] * ex + v[1] * ey) / norm;
        assert!(dot.abs() > 1.0 - 1e-8, "axis {v:?} vs oracle ({ex}, {ey})");
    }

    #[test]
    fn child_cardinality_formula() {
        let data = Dataset::generate(Distribution::Uniform, 100, 2, 3);
        let t = PatTree::build(data, 7, 7);
        for sizes in t.branch_cardinalities() {
            let n: usize = sizes.iter().sum();
            let base = n / 7;
            let extra = n % 7;
            let expect: Vec<usize> =
                (0..7).map(|b| base + usize::from(b < extra)).filter(|&s| s > 0).collect();
            assert_eq!(sizes, expect, "node of size {n}");
        }
    }

    #[test]
    fn exact_on_random_data() {
        for dim in [2usize, 3, 5, 8] {
            let data = Dataset::generate(Distribution::Gaussian, 600, dim, dim as u64 + 40);
            let t = PatTree::build(data.clone(), DEFAULT_CHILDREN, DEFAULT_CHILDREN);
            let brute = BruteForce::new(data);
            let queries = Dataset::generate(Distribution::Gaussian, 300, dim, 77);
            let mut s1 = QueryStats::default();
            let mut s2 = QueryStats::default();
            for q in queries.iter() {
                assert_eq!(t.query(q, &mut s1).index, brute.query(q, &mut s2).index);
            }
        }
    }

    #[test]
    fn waydown_often_right_but_cheaper() {
        let data = Dataset::generate(Distribution::Gaussian, 2000, 2, 55);
        let t = PatTree::build(data.clone(), DEFAULT_CHILDREN, DEFAULT_CHILDREN);
        let queries = Dataset::generate(Distribution::Gaussian, 2000, 2, 56);
        let mut hits = 0;
        let mut wd_stats = QueryStats::default();
        let mut full_stats = QueryStats::default();
        for q in queries.iter() {
            let wd = t.waydown_query(q, &mut wd_stats);
            let full = t.query(q, &mut full_stats);
            if wd.index == full.index {
                hits += 1;
            }
        }
        let rate = hits as f64 / queries.len() as f64;
        assert!(rate > 0.25 && rate < 0.95, "waydown hit rate {rate}");
        assert!(wd_stats.distance_evals < full_stats.distance_evals);
    }

    #[test]
    fn duplicate_heavy_data() {
        let mut flat = vec![0.5, 0.5].repeat(40);
        flat.extend_from_slice(&[3.0, 3.0]);
        let data = Dataset::from_flat(2, flat).unwrap();
        let t = PatTree::build(data, 3, 2);
        let mut stats = QueryStats::default();
        assert_eq!(t.query(&[0.4, 0.5], &mut stats).index, 0);
        assert_eq!(t.query(&[2.9, 3.1], &mut stats).index, 40);
    }
}
