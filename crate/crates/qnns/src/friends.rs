//! Friend Voronoi cells: which codebook cells can own the nearest neighbor
//! of a query landing in a given cell.
//!
//! For a site set S quantizing a dataset, the friends of a cell are the
//! cells whose sites can appear in the pseudo-insertion `PI_S(x)` of some
//! dataset point x owned by that cell. During search it is then enough to
//! descend into the owner cell and its friends.
//!
//! Two constructions are provided. [`friends_first`] pseudo-inserts every
//! dataset point into the Delaunay triangulation of S: exhaustive, exact by
//! construction, and data-dependent. [`friends_fast`] works from the
//! triangulation alone and over-approximates the union of pseudo-insertions
//! over all of space, so its lists are guaranteed supersets of the
//! exhaustive ones (up to the explicit numerical tolerances).
//!
//! A note on the circumsphere rule: projecting a site onto a circumsphere
//! and checking whether the projection is owned by the site looks like an
//! exact intersection test between the ball and the Voronoi cell, but it is
//! only sufficient, not necessary: the ball can clip a corner of the cell
//! while the projection point falls into a neighboring cell. [`friends_fast`]
//! therefore certifies *disjointness* instead, through a lower bound on the
//! distance from the circumcenter to the cell, and includes the pair
//! whenever no certificate exists.

use crate::dataset::Dataset;
use crate::delaunay::Triangulation;
use crate::error::Error;
use crate::geometry::squared_distance;
use crate::quantization::{nn_project, Codebook};
use crate::Result;

/// Relative slack on the ball-versus-cell disjointness certificate, erring
/// toward inclusion.
const BALL_CELL_SLACK: f64 = 1e-9;

/// Dot-product threshold below which two hull facet normals count as
/// strictly opposed.
const HULL_OPPOSED_TOL: f64 = -1e-12;

/// Relative slack on the beyond-hull-hyperplane test, erring toward
/// inclusion.
const HULL_BEYOND_SLACK: f64 = 1e-9;

/// Per-site friend lists over a codebook of N sites.
///
/// `lists[s]` is sorted, contains `s` itself, and lists every site whose
/// cell must be searched when the query owner is `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FriendLists {
    lists: Vec<Vec<usize>>,
}

impl FriendLists {
    fn from_membership(mut lists: Vec<Vec<usize>>) -> FriendLists {
        for (s, l) in lists.iter_mut().enumerate() {
            l.push(s);
            l.sort_unstable();
            l.dedup();
        }
        FriendLists { lists }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Sorted friends of site `s`, including `s`.
    pub fn of(&self, s: usize) -> &[usize] {
        &self.lists[s]
    }

    pub fn contains(&self, s: usize, friend: usize) -> bool {
        self.lists[s].binary_search(&friend).is_ok()
    }

    /// True when every list of `other` is contained in the matching list.
    pub fn is_superset_of(&self, other: &FriendLists) -> bool {
        self.lists.len() == other.lists.len()
            && self
                .lists
                .iter()
                .zip(&other.lists)
                .all(|(a, b)| b.iter().all(|f| a.binary_search(f).is_ok()))
    }

    /// Elementwise union, used as an exactness fallback.
    pub fn union(&self, other: &FriendLists) -> FriendLists {
        let lists = self
            .lists
            .iter()
            .zip(&other.lists)
            .map(|(a, b)| {
                let mut l = a.clone();
                l.extend_from_slice(b);
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        FriendLists { lists }
    }

    pub fn mean_len(&self) -> f64 {
        self.lists.iter().map(|l| l.len()).sum::<usize>() as f64 / self.lists.len() as f64
    }

    /// Line-oriented text form: `site_index: f1 f2 ...` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, l) in self.lists.iter().enumerate() {
            let f: Vec<String> = l.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{}: {}\n", s, f.join(" ")));
        }
        out
    }
}

/// Exhaustive friend lists: pseudo-inserts every dataset point.
///
/// For each point p with owner s, every site of `PI_S(p)` records s as a
/// friend. A point coinciding with a site contributes that site's Delaunay
/// neighbors. Exact for the given dataset by the fundamental property of
/// pseudo-insertion.
pub fn friends_first(
    tri: &Triangulation,
    cb: &Codebook,
    data: &Dataset,
) -> Result<FriendLists> {
    let n_sites = cb.len();
    let mut member = vec![vec![false; n_sites]; n_sites];
    for p in data.iter() {
        let (owner, d2) = nn_project(cb, p);
        if d2 == 0.0 {
            // p is the site itself: its insertion neighbors are the
            // Delaunay neighbors of the site
            for nb in tri.neighbors_of_site(owner) {
                member[nb][owner] = true;
            }
            member[owner][owner] = true;
        } else {
            for s in tri.pseudo_insert(p)? {
                member[s][owner] = true;
            }
        }
    }
    let lists = member
        .into_iter()
        .map(|row| row.iter().enumerate().filter(|(_, &m)| m).map(|(s, _)| s).collect())
        .collect();
    Ok(FriendLists::from_membership(lists))
}

/// Geometric friend lists from the triangulation of the sites alone.
///
/// The union of pseudo-insertions `UPI(s)` over the Voronoi cell of each
/// site s is over-approximated by three rules, each of which only excludes
/// a candidate when a geometric certificate proves the exclusion sound:
///
/// (a) For every Delaunay cell D with circumsphere (c, r) and every site s
/// not in D, the sites of D join `UPI(s)` unless the ball provably misses
/// the Voronoi cell of s. The certificate is a lower bound on the distance
/// from c to the cell: the largest violation, over all other sites t, of
/// the bisector halfspace of (s, t) containing the cell. When that bound
/// exceeds r, no point of the cell is inside the sphere.
///
/// (b) Sites sharing a cell are mutual friends (a point near their common
/// face pseudo-inserts all of them).
///
/// (c) Hull visibility: a point of the Voronoi cell of s beyond the
/// supporting hyperplane of a hull facet F pseudo-inserts the sites of F.
/// The bounded part of the cell is the convex hull of its vertices, which
/// are exactly the circumcenters of the Delaunay cells containing s, so
/// "some vertex beyond the hyperplane" decides the bounded part. For hull
/// sites the cell recedes along the outward normals of its own hull
/// facets, so a non-opposed pair of facet normals decides the unbounded
/// part.
///
/// Dimension is capped at 7: beyond that the triangulation cost defeats
/// the purpose.
pub fn friends_fast(tri: &Triangulation) -> Result<FriendLists> {
    let d = tri.dim();
    if d > 7 {
        return Err(Error::DimensionTooHigh(d));
    }
    let sites = tri.sites();
    let n_sites = sites.len();
    // upi[s][t]: site t can appear in a pseudo-insertion owned by s
    let mut upi = vec![vec![false; n_sites]; n_sites];

    // (a) circumsphere versus Voronoi cell, certified by the bisector bound
    for (_, cell) in tri.alive_cells() {
        let c = &cell.circ.center;
        let r = cell.circ.radius2.sqrt();
        for s in 0..n_sites {
            if cell.sites.contains(&s) {
                continue;
            }
            let lb = cell_distance_lower_bound(sites, s, c);
            if lb <= r * (1.0 + BALL_CELL_SLACK) {
                for &t in &cell.sites {
                    upi[s][t] = true;
                }
            }
        }
    }

    // (b) co-sites of a cell are mutual
    for (_, cell) in tri.alive_cells() {
        for &a in &cell.sites {
            for &b in &cell.sites {
                upi[a][b] = true;
            }
        }
    }

    // (c) hull visibility per (site, facet) pair
    let normals = tri.hull_face_normals();
    // vertices of the Voronoi cell of s: circumcenters of cells holding s
    let mut vertices: Vec<Vec<&[f64]>> = vec![Vec::new(); n_sites];
    for (_, cell) in tri.alive_cells() {
        for &s in &cell.sites {
            vertices[s].push(cell.circ.center.as_slice());
        }
    }
    // hull facets incident to each site, as indices into `normals`
    let mut facets_of_site: Vec<Vec<usize>> = vec![Vec::new(); n_sites];
    for (fi, ((c, k), _)) in normals.iter().enumerate() {
        for s in facet_sites(tri, *c, *k) {
            facets_of_site[s].push(fi);
        }
    }
    for (fi, ((c, k), u)) in normals.iter().enumerate() {
        let fsites = facet_sites(tri, *c, *k);
        // supporting hyperplane offset and a scale for the slack
        let f0 = sites.point(fsites[0]);
        let offset: f64 = u.iter().zip(f0).map(|(a, b)| a * b).sum();
        let scale = f0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for s in 0..n_sites {
            let beyond = vertices[s]
                .iter()
                .any(|v| dot(u, v) >= offset - HULL_BEYOND_SLACK * scale);
            let recedes = facets_of_site[s].iter().any(|&fj| {
                fj != fi && dot(u, &normals[fj].1) >= HULL_OPPOSED_TOL
            }) || facets_of_site[s].contains(&fi);
            if beyond || recedes {
                for &t in &fsites {
                    upi[s][t] = true;
                }
            }
        }
    }

    // friends(s') = { s : s' in UPI(s) }
    let mut lists = vec![Vec::new(); n_sites];
    for (s, row) in upi.iter().enumerate() {
        for (t, &m) in row.iter().enumerate() {
            if m {
                lists[t].push(s);
            }
        }
    }
    Ok(FriendLists::from_membership(lists))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A lower bound on the distance from `c` to the Voronoi cell of site `s`:
/// the deepest violation, over all other sites t, of the halfspace
/// `|x - s| <= |x - t|` that contains the cell. Zero when `c` is owned by
/// `s`.
fn cell_distance_lower_bound(sites: &Dataset, s: usize, c: &[f64]) -> f64 {
    let sp = sites.point(s);
    let cs2 = squared_distance(c, sp);
    let mut lb = 0.0f64;
    for (t, tp) in sites.iter().enumerate() {
        if t == s {
            continue;
        }
        let ct2 = squared_distance(c, tp);
        if cs2 <= ct2 {
            continue;
        }
        let st = squared_distance(sp, tp).sqrt();
        lb = lb.max((cs2 - ct2) / (2.0 * st));
    }
    lb
}

fn facet_sites(tri: &Triangulation, c: usize, k: usize) -> Vec<usize> {
    tri.cells()[c]
        .sites
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, &s)| s)
        .collect()
}

/// Outcome of validating friend lists against brute-force search.
#[derive(Debug, Clone)]
pub struct FriendValidation {
    pub queries: usize,
    pub failures: usize,
    /// Index of the first failing query, for reproduction.
    pub first_failure: Option<usize>,
}

impl FriendValidation {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks, for every query, that the cell owning the true nearest dataset
/// point is a friend of the cell owning the query.
pub fn validate_friends(
    fl: &FriendLists,
    cb: &Codebook,
    data: &Dataset,
    queries: &Dataset,
) -> FriendValidation {
    let mut failures = 0;
    let mut first_failure = None;
    for (qi, q) in queries.iter().enumerate() {
        let (owner_q, _) = nn_project(cb, q);
        let mut nn = (0usize, f64::INFINITY);
        for (i, p) in data.iter().enumerate() {
            let d2 = squared_distance(q, p);
            if d2 < nn.1 {
                nn = (i, d2);
            }
        }
        let (owner_nn, _) = nn_project(cb, data.point(nn.0));
        if !fl.contains(owner_q, owner_nn) {
            failures += 1;
            if first_failure.is_none() {
                first_failure = Some(qi);
            }
        }
    }
    FriendValidation { queries: queries.len(), failures, first_failure }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Distribution;
    use crate::quantization::{lloyd, snap_to_dataset, LloydOpts};

    /// A quantized setup: data, snapped codebook, triangulation of sites.
    fn setup(n: usize, dim: usize, n_sites: usize, seed: u64) -> (Dataset, Codebook, Triangulation) {
        let data = Dataset::generate(Distribution::Gaussian, n, dim, seed);
        let r = lloyd(&data, n_sites, LloydOpts { rng_seed: seed, ..Default::default() }).unwrap();
        let cb = snap_to_dataset(&r.codebook, &data);
        let tri = Triangulation::build(cb.sites(), seed).unwrap();
        (data, cb, tri)
    }

    #[test]
    fn lists_include_self_and_are_sorted() {
        let (data, cb, tri) = setup(300, 2, 10, 3);
        for fl in [friends_first(&tri, &cb, &data).unwrap(), friends_fast(&tri).unwrap()] {
            assert_eq!(fl.len(), cb.len());
            for s in 0..fl.len() {
                assert!(fl.contains(s, s), "site {s} missing from its own list");
                assert!(fl.of(s).windows(2).all(|w| w[0] < w[1]));
                assert!(fl.of(s).iter().all(|&f| f < cb.len()));
            }
        }
    }

    #[test]
    fn friends_first_validates_on_its_own_data() {
        let (data, cb, tri) = setup(500, 2, 12, 7);
        let fl = friends_first(&tri, &cb, &data).unwrap();
        // exact for queries drawn anywhere: the NN owner must be a friend
        let queries = Dataset::generate(Distribution::Gaussian, 5_000, 2, 8);
        let v = validate_friends(&fl, &cb, &data, &queries);
        assert!(v.passed(), "{} failures, first at {:?}", v.failures, v.first_failure);
    }

    #[test]
    fn friends_fast_superset_of_first_on_dense_data() {
        for seed in [1u64, 2, 3] {
            let (data, cb, tri) = setup(2_000, 2, 15, seed);
            let fast = friends_fast(&tri).unwrap();
            let first = friends_first(&tri, &cb, &data).unwrap();
            assert!(
                fast.is_superset_of(&first),
                "seed {seed}: fast lists miss exhaustive entries"
            );
        }
    }

    #[test]
    fn friends_fast_validates_in_3d() {
        let (data, cb, tri) = setup(800, 3, 10, 5);
        let fl = friends_fast(&tri).unwrap();
        let queries = Dataset::generate(Distribution::Gaussian, 5_000, 3, 6);
        let v = validate_friends(&fl, &cb, &data, &queries);
        assert!(v.passed(), "{} failures", v.failures);
    }

    #[test]
    fn cell_distance_bound_is_a_true_lower_bound() {
        // invariant behind rule (a): no point owned by s is closer to c
        // than the bisector-violation bound
        let sites = Dataset::generate(Distribution::Gaussian, 12, 2, 19);
        let centers = Dataset::generate(Distribution::Gaussian, 50, 2, 20);
        let samples = Dataset::generate(Distribution::Gaussian, 20_000, 2, 21);
        let cb = Codebook::free(sites.clone());
        let mut by_owner: Vec<Vec<&[f64]>> = vec![Vec::new(); sites.len()];
        for x in samples.iter() {
            by_owner[nn_project(&cb, x).0].push(x);
        }
        for c in centers.iter() {
            for s in 0..sites.len() {
                let lb = cell_distance_lower_bound(&sites, s, c);
                for x in &by_owner[s] {
                    let d = squared_distance(c, x).sqrt();
                    assert!(d >= lb - 1e-9, "point in V({s}) at {d} < bound {lb}");
                }
            }
        }
    }

    #[test]
    fn two_sites_are_mutual_friends() {
        // minimal configuration: with two sites every query cell can own the
        // other's points, so both lists are {0, 1}
        let data = Dataset::from_points(&[&[0.0, 0.0], &[1.0, 0.0], &[0.1, 0.1], &[0.9, 0.1]])
            .unwrap();
        let cb = Codebook::free(Dataset::from_points(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap());
        let cb = snap_to_dataset(&cb, &data);
        // a 2-site set has no 2-d triangulation; validate the exhaustive
        // construction on a 1-d projection instead
        let data1 = Dataset::from_flat(1, data.iter().map(|p| p[0]).collect()).unwrap();
        let cb1 = Codebook::free(Dataset::from_flat(1, vec![0.0, 1.0]).unwrap());
        let tri = Triangulation::build(cb1.sites(), 1).unwrap();
        let fl = friends_first(&tri, &cb1, &data1).unwrap();
        assert_eq!(fl.of(0), &[0, 1]);
        assert_eq!(fl.of(1), &[0, 1]);
        drop(cb);
    }

    #[test]
    fn dimension_cap_enforced() {
        let data = Dataset::generate(Distribution::Gaussian, 40, 8, 13);
        let tri = Triangulation::build(&data, 13);
        // building an 8-d triangulation is allowed; the fast friends are not
        if let Ok(tri) = tri {
            assert!(matches!(friends_fast(&tri), Err(Error::DimensionTooHigh(8))));
        }
    }

    #[test]
    fn text_dump_format() {
        let fl = FriendLists::from_membership(vec![vec![1], vec![0, 2], vec![]]);
        assert_eq!(fl.to_text(), "0: 0 1\n1: 0 1 2\n2: 2\n");
    }

    #[test]
    fn union_and_superset() {
        let a = FriendLists::from_membership(vec![vec![1], vec![]]);
        let b = FriendLists::from_membership(vec![vec![], vec![0]]);
        let u = a.union(&b);
        assert!(u.is_superset_of(&a) && u.is_superset_of(&b));
        assert_eq!(u.of(0), &[0, 1]);
        assert_eq!(u.of(1), &[0, 1]);
    }
}
