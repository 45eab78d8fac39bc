//! Incremental Delaunay triangulation in general dimension.
//!
//! The triangulation is stored as a simplex graph: each d-cell is a node
//! holding its d+1 site indices, the d+1 adjacent cells and its cached
//! circumsphere. The k-th neighbor pointer corresponds to the facet obtained
//! by deleting the k-th site; a missing pointer marks a boundary facet.
//! Site order inside a node keeps the simplex positively oriented.
//!
//! Sites are added one by one in a seeded random order. Each insertion
//! locates the new site, collects the cells whose circumsphere contains it
//! (the incircle list), deletes them and cones the new site over the cavity
//! boundary and over the visible part of the convex hull. Deletion is
//! logical (an alive flag) so cell ids stay stable during retriangulation;
//! the cell table is compacted once at the end of a build.
//!
//! Practical range is d <= 6: cost grows quickly with dimension.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::geometry::{circumsphere, in_sphere, orientation, squared_distance, Orientation, Sphere, SphereSide};
use crate::rng;
use crate::Result;

/// One d-simplex of the triangulation.
#[derive(Debug, Clone)]
pub struct SimplexNode {
    /// d+1 site indices, ordered for positive orientation.
    pub sites: Vec<usize>,
    /// Adjacent cell ids; `neighbors[k]` shares the facet without `sites[k]`.
    pub neighbors: Vec<Option<usize>>,
    /// Cached circumsphere.
    pub circ: Sphere,
    pub alive: bool,
}

/// Result of point location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// A cell whose closure contains the query.
    Cell(usize),
    OutsideHull,
}

/// A simplex-graph Delaunay triangulation of a point set.
#[derive(Debug, Clone)]
pub struct Triangulation {
    sites: Dataset,
    inserted: Vec<bool>,
    cells: Vec<SimplexNode>,
    alive_count: usize,
}

/// Cells whose circumsphere contains a query point.
#[derive(Debug, Clone, Default)]
pub struct IncircleList {
    pub cell_ids: Vec<usize>,
}

struct Cavity {
    cells: Vec<usize>,
    in_cavity: Vec<bool>,
    outside_hull: bool,
    /// Visible hull facets `(cell, facet)` over all alive cells; empty when
    /// the query is inside the hull.
    visible_hull: Vec<(usize, usize)>,
}

impl Triangulation {
    /// Builds the Delaunay triangulation of `sites`, inserting them in a
    /// random order drawn from `rng_seed`. Deterministic for a fixed seed.
    pub fn build(sites: &Dataset, rng_seed: u64) -> Result<Triangulation> {
        let d = sites.dim();
        let n = sites.len();
        if n < d + 1 {
            return Err(Error::DegenerateInput);
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut order_rng = rng::stream(rng_seed, rng::labels::INSERTION_ORDER);
        for i in (1..n).rev() {
            let j = order_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let first = pick_initial_simplex(sites, &order).ok_or(Error::DegenerateInput)?;
        let mut t = Triangulation {
            sites: sites.clone(),
            inserted: vec![false; n],
            cells: Vec::new(),
            alive_count: 0,
        };
        t.create_initial_cell(&first)?;
        for &s in &first {
            t.inserted[s] = true;
        }
        for (step, &s) in order.iter().enumerate() {
            if t.inserted[s] {
                continue;
            }
            let walk_seed = rng::derive2(rng_seed, rng::labels::WALK, step as u64);
            t.insert_site(s, walk_seed)?;
        }
        t.compact();
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.sites.dim()
    }

    pub fn sites(&self) -> &Dataset {
        &self.sites
    }

    pub fn site_count(&self) -> usize {
        self.inserted.iter().filter(|&&b| b).count()
    }

    pub fn cells(&self) -> &[SimplexNode] {
        &self.cells
    }

    pub fn alive_cells(&self) -> impl Iterator<Item = (usize, &SimplexNode)> {
        self.cells.iter().enumerate().filter(|(_, c)| c.alive)
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    /// Boundary facets `(cell id, facet index)` of the triangulation.
    pub fn hull_facets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (id, c) in self.alive_cells() {
            for (k, nb) in c.neighbors.iter().enumerate() {
                if nb.is_none() {
                    out.push((id, k));
                }
            }
        }
        out
    }

    /// Walks from a random alive cell toward `x`, stepping through a facet
    /// whose side test fails (chosen randomly among violators). Falls back
    /// to an exhaustive scan after 10x the cell count steps.
    pub fn locate(&self, x: &[f64], rng_seed: u64) -> Location {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let alive_ids: Vec<usize> = self.alive_cells().map(|(id, _)| id).collect();
        debug_assert!(!alive_ids.is_empty());
        let mut cur = alive_ids[rng.gen_range(0..alive_ids.len())];
        let cap = 10 * alive_ids.len();
        let mut violators = Vec::new();
        for _ in 0..cap {
            violators.clear();
            for k in 0..self.dim() + 1 {
                if self.side_test(cur, k, x) == Orientation::Negative {
                    violators.push(k);
                }
            }
            if violators.is_empty() {
                return Location::Cell(cur);
            }
            let k = violators[rng.gen_range(0..violators.len())];
            match self.cells[cur].neighbors[k] {
                Some(nb) => cur = nb,
                None => return Location::OutsideHull,
            }
        }
        // walk budget exhausted; scan everything
        for &id in &alive_ids {
            if (0..self.dim() + 1).all(|k| self.side_test(id, k, x) != Orientation::Negative) {
                return Location::Cell(id);
            }
        }
        Location::OutsideHull
    }

    /// The alive cells whose circumsphere contains `x` (on-sphere queries
    /// count as inside), found by seeded graph expansion.
    pub fn incircle_list(&self, x: &[f64]) -> IncircleList {
        let cavity = self.compute_cavity(x, rng::derive(0, rng::labels::WALK));
        IncircleList { cell_ids: cavity.cells }
    }

    /// Inserts a new point, returning its site id.
    pub fn insert(&mut self, x: &[f64]) -> Result<usize> {
        self.check_not_duplicate(x)?;
        self.sites.push(x)?;
        self.inserted.push(false);
        let id = self.sites.len() - 1;
        let walk_seed = rng::derive2(id as u64, rng::labels::WALK, 0);
        self.insert_site(id, walk_seed)?;
        Ok(id)
    }

    /// The sites that would become Delaunay neighbors of `x` if it were
    /// inserted; the triangulation is not modified.
    ///
    /// These are the sites of the incircle cells plus, when `x` is outside
    /// the hull, the sites of the hull facets visible from `x`.
    pub fn pseudo_insert(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_not_duplicate(x)?;
        let cavity = self.compute_cavity(x, rng::derive(1, rng::labels::WALK));
        let mut mark = vec![false; self.sites.len()];
        for &c in &cavity.cells {
            for &s in &self.cells[c].sites {
                mark[s] = true;
            }
        }
        for &(c, k) in &cavity.visible_hull {
            for (i, &s) in self.cells[c].sites.iter().enumerate() {
                if i != k {
                    mark[s] = true;
                }
            }
        }
        Ok(mark.iter().enumerate().filter(|(_, &m)| m).map(|(s, _)| s).collect())
    }

    /// Delaunay neighbors of an existing site: all sites sharing a cell.
    pub fn neighbors_of_site(&self, s: usize) -> Vec<usize> {
        let mut mark = vec![false; self.sites.len()];
        for (_, c) in self.alive_cells() {
            if c.sites.contains(&s) {
                for &t in &c.sites {
                    mark[t] = true;
                }
            }
        }
        mark[s] = false;
        mark.iter().enumerate().filter(|(_, &m)| m).map(|(t, _)| t).collect()
    }

    /// One outward unit normal per hull facet.
    pub fn hull_face_normals(&self) -> Vec<((usize, usize), Vec<f64>)> {
        self.hull_facets()
            .into_iter()
            .map(|(c, k)| ((c, k), self.facet_outward_normal(c, k)))
            .collect()
    }

    /// Outward unit normal of facet `k` of cell `c` (pointing away from the
    /// opposite vertex).
    pub fn facet_outward_normal(&self, c: usize, k: usize) -> Vec<f64> {
        let d = self.dim();
        let cell = &self.cells[c];
        let apex = self.sites.point(cell.sites[k]);
        let facet: Vec<&[f64]> = cell
            .sites
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, &s)| self.sites.point(s))
            .collect();
        // orthonormal basis of the facet span, then the residual of the
        // apex-to-facet vector against it
        let f0 = facet[0];
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d.saturating_sub(1));
        for f in facet.iter().skip(1) {
            let mut e: Vec<f64> = f.iter().zip(f0).map(|(a, b)| a - b).collect();
            for b in &basis {
                let dot: f64 = e.iter().zip(b).map(|(a, c)| a * c).sum();
                for (ei, bi) in e.iter_mut().zip(b) {
                    *ei -= dot * bi;
                }
            }
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in e.iter_mut() {
                    *v /= norm;
                }
                basis.push(e);
            }
        }
        let mut u: Vec<f64> = f0.iter().zip(apex).map(|(a, b)| a - b).collect();
        for b in &basis {
            let dot: f64 = u.iter().zip(b).map(|(a, c)| a * c).sum();
            for (ui, bi) in u.iter_mut().zip(b) {
                *ui -= dot * bi;
            }
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in u.iter_mut() {
            *v /= norm;
        }
        u
    }

    /// Line-oriented debug dump: `cell_id: site_ids | neighbor_ids`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, c) in self.alive_cells() {
            let sites: Vec<String> = c.sites.iter().map(|s| s.to_string()).collect();
            let nbs: Vec<String> = c
                .neighbors
                .iter()
                .map(|n| n.map(|v| v.to_string()).unwrap_or_else(|| "-".into()))
                .collect();
            out.push_str(&format!("{}: {} | {}\n", id, sites.join(" "), nbs.join(" ")));
        }
        out
    }

    // ---- validation helpers (used by tests and the acceptance suite) ----

    /// Checks neighbor symmetry and the facet-sharing convention.
    pub fn check_adjacency(&self) -> std::result::Result<(), String> {
        let mut facet_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for (id, c) in self.alive_cells() {
            for (k, nb) in c.neighbors.iter().enumerate() {
                let mut facet: Vec<usize> =
                    c.sites.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &s)| s).collect();
                facet.sort_unstable();
                *facet_count.entry(facet.clone()).or_insert(0) += 1;
                if let Some(nb) = *nb {
                    let other = &self.cells[nb];
                    if !other.alive {
                        return Err(format!("cell {id} points to dead cell {nb}"));
                    }
                    // the matching facet of the neighbor
                    let back = other.neighbors.iter().enumerate().find(|&(j, m)| {
                        let mut f: Vec<usize> = other
                            .sites
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != j)
                            .map(|(_, &s)| s)
                            .collect();
                        f.sort_unstable();
                        f == facet && *m == Some(id)
                    });
                    if back.is_none() {
                        return Err(format!("asymmetric adjacency between {id} and {nb}"));
                    }
                }
            }
        }
        for (facet, count) in facet_count {
            if count > 2 {
                return Err(format!("facet {facet:?} shared by {count} cells"));
            }
        }
        Ok(())
    }

    /// Brute-force empty-circumsphere check over all inserted sites.
    pub fn check_empty_circumsphere(&self) -> std::result::Result<(), String> {
        for (id, c) in self.alive_cells() {
            for (s, &ins) in self.inserted.iter().enumerate() {
                if !ins || c.sites.contains(&s) {
                    continue;
                }
                if in_sphere(&c.circ, self.sites.point(s)) == SphereSide::Inside {
                    return Err(format!("site {s} strictly inside circumsphere of cell {id}"));
                }
            }
        }
        Ok(())
    }

    /// Local Delaunay check: only opposite-cell pairs are examined.
    pub fn check_locally_delaunay(&self) -> std::result::Result<(), String> {
        for (id, c) in self.alive_cells() {
            for (k, nb) in c.neighbors.iter().enumerate() {
                let Some(nb) = *nb else { continue };
                let other = &self.cells[nb];
                // the site of the opposite cell not shared with this one
                for &s in &other.sites {
                    if !c.sites.contains(&s)
                        && in_sphere(&c.circ, self.sites.point(s)) == SphereSide::Inside
                    {
                        return Err(format!(
                            "cells {id}/{nb} not locally Delaunay at facet {k}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of distinct sites on the hull boundary.
    pub fn hull_site_count(&self) -> usize {
        let mut mark = vec![false; self.sites.len()];
        for (c, k) in self.hull_facets() {
            for (i, &s) in self.cells[c].sites.iter().enumerate() {
                if i != k {
                    mark[s] = true;
                }
            }
        }
        mark.iter().filter(|&&m| m).count()
    }

    /// Sorted cell signature (site-id tuples), for permutation-invariance
    /// comparisons across build seeds.
    pub fn cell_signature(&self) -> Vec<Vec<usize>> {
        let mut sig: Vec<Vec<usize>> = self
            .alive_cells()
            .map(|(_, c)| {
                let mut s = c.sites.clone();
                s.sort_unstable();
                s
            })
            .collect();
        sig.sort();
        sig
    }

    // ---- internals ----

    fn check_not_duplicate(&self, x: &[f64]) -> Result<()> {
        for (s, &ins) in self.inserted.iter().enumerate() {
            if ins && squared_distance(x, self.sites.point(s)) == 0.0 {
                return Err(Error::DuplicateSite(s));
            }
        }
        Ok(())
    }

    fn create_initial_cell(&mut self, site_ids: &[usize]) -> Result<()> {
        let mut sites = site_ids.to_vec();
        let pts: Vec<&[f64]> = sites.iter().map(|&s| self.sites.point(s)).collect();
        match orientation(&pts) {
            Orientation::Negative => sites.swap(0, 1),
            Orientation::Degenerate => return Err(Error::DegenerateInput),
            Orientation::Positive => {}
        }
        let pts: Vec<&[f64]> = sites.iter().map(|&s| self.sites.point(s)).collect();
        let circ = circumsphere(&pts)?;
        self.cells.push(SimplexNode {
            neighbors: vec![None; sites.len()],
            sites,
            circ,
            alive: true,
        });
        self.alive_count = 1;
        Ok(())
    }

    /// Orientation of cell `c` with its `k`-th vertex replaced by `x`:
    /// `Negative` means `x` is strictly beyond facet `k`.
    fn side_test(&self, c: usize, k: usize, x: &[f64]) -> Orientation {
        let cell = &self.cells[c];
        let pts: Vec<&[f64]> = cell
            .sites
            .iter()
            .enumerate()
            .map(|(i, &s)| if i == k { x } else { self.sites.point(s) })
            .collect();
        orientation(&pts)
    }

    fn hull_facet_visible(&self, c: usize, k: usize, x: &[f64]) -> bool {
        self.side_test(c, k, x) == Orientation::Negative
    }

    fn compute_cavity(&self, x: &[f64], walk_seed: u64) -> Cavity {
        let mut in_cavity = vec![false; self.cells.len()];
        let mut cells = Vec::new();
        let mut queue: Vec<usize> = Vec::new();
        let loc = self.locate(x, walk_seed);
        let outside_hull = loc == Location::OutsideHull;
        let mut visible_hull = Vec::new();
        match loc {
            Location::Cell(c0) => {
                // the containing cell is always part of the cavity
                in_cavity[c0] = true;
                queue.push(c0);
            }
            Location::OutsideHull => {
                for (c, k) in self.hull_facets() {
                    if self.hull_facet_visible(c, k, x) {
                        visible_hull.push((c, k));
                    }
                }
                // seed from hull-incident cells whose circumsphere holds x
                let mut seen = vec![false; self.cells.len()];
                for &(c, _) in &visible_hull {
                    if !seen[c] {
                        seen[c] = true;
                        if !in_cavity[c] && in_sphere(&self.cells[c].circ, x) != SphereSide::Outside
                        {
                            in_cavity[c] = true;
                            queue.push(c);
                        }
                    }
                }
                for (c, _) in self.hull_facets() {
                    if !seen[c] {
                        seen[c] = true;
                        if !in_cavity[c] && in_sphere(&self.cells[c].circ, x) != SphereSide::Outside
                        {
                            in_cavity[c] = true;
                            queue.push(c);
                        }
                    }
                }
            }
        }
        while let Some(c) = queue.pop() {
            cells.push(c);
            for nb in self.cells[c].neighbors.iter().flatten() {
                if !in_cavity[*nb]
                    && self.cells[*nb].alive
                    && in_sphere(&self.cells[*nb].circ, x) != SphereSide::Outside
                {
                    in_cavity[*nb] = true;
                    queue.push(*nb);
                }
            }
        }
        cells.sort_unstable();
        Cavity { cells, in_cavity, outside_hull, visible_hull }
    }

    fn insert_site(&mut self, site_id: usize, walk_seed: u64) -> Result<()> {
        let x = self.sites.point(site_id).to_vec();
        if self.inserted[site_id] {
            return Err(Error::DuplicateSite(site_id));
        }
        self.check_not_duplicate(&x)?;
        let cavity = self.compute_cavity(&x, walk_seed);

        // facets to cone to the new site: (facet site ids, link back into
        // the surviving triangulation)
        struct ConeFacet {
            facet_sites: Vec<usize>,
            base: Option<(usize, usize)>, // surviving cell and its slot
        }
        let mut cone: Vec<ConeFacet> = Vec::new();

        for &c in &cavity.cells {
            let nbs = self.cells[c].neighbors.clone();
            for (k, nb) in nbs.iter().enumerate() {
                let facet_sites: Vec<usize> = self.cells[c]
                    .sites
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, &s)| s)
                    .collect();
                match *nb {
                    Some(nb) if cavity.in_cavity[nb] => {} // interior facet, vanishes
                    Some(nb) => {
                        // boundary facet: relink the outside cell to the cone
                        let slot = self.cells[nb]
                            .neighbors
                            .iter()
                            .position(|&m| m == Some(c))
                            .expect("adjacency symmetry");
                        cone.push(ConeFacet { facet_sites, base: Some((nb, slot)) });
                    }
                    None => {
                        // hull facet of a cavity cell: survives as a cone base
                        // unless the new site sees it from outside
                        if !(cavity.outside_hull && self.hull_facet_visible(c, k, &x)) {
                            cone.push(ConeFacet { facet_sites, base: None });
                        }
                    }
                }
            }
        }
        if cavity.outside_hull {
            // visible hull facets of surviving cells extend the hull
            for &(c, k) in &cavity.visible_hull {
                if cavity.in_cavity[c] {
                    continue;
                }
                let facet_sites: Vec<usize> = self.cells[c]
                    .sites
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, &s)| s)
                    .collect();
                cone.push(ConeFacet { facet_sites, base: Some((c, k)) });
            }
        }
        if cone.is_empty() {
            return Err(Error::GeneralPositionViolation(format!(
                "no cavity boundary facet found for site {site_id}"
            )));
        }

        // delete the cavity
        for &c in &cavity.cells {
            self.cells[c].alive = false;
            self.alive_count -= 1;
        }

        // create the new cells
        let mut new_ids = Vec::with_capacity(cone.len());
        for f in &cone {
            let mut sites = f.facet_sites.clone();
            sites.push(site_id);
            let pts: Vec<&[f64]> = sites.iter().map(|&s| self.sites.point(s)).collect();
            match orientation(&pts) {
                Orientation::Negative => sites.swap(0, 1),
                Orientation::Degenerate => {
                    return Err(Error::GeneralPositionViolation(format!(
                        "degenerate cone cell while inserting site {site_id}"
                    )))
                }
                Orientation::Positive => {}
            }
            let pts: Vec<&[f64]> = sites.iter().map(|&s| self.sites.point(s)).collect();
            let circ = circumsphere(&pts).map_err(|_| {
                Error::GeneralPositionViolation(format!(
                    "singular circumsphere while inserting site {site_id}"
                ))
            })?;
            let id = self.cells.len();
            self.cells.push(SimplexNode {
                neighbors: vec![None; sites.len()],
                sites,
                circ,
                alive: true,
            });
            self.alive_count += 1;
            new_ids.push(id);
        }

        // wire the base facets
        for (f, &id) in cone.iter().zip(&new_ids) {
            let x_slot = self.cells[id].sites.iter().position(|&s| s == site_id).unwrap();
            if let Some((base_cell, base_slot)) = f.base {
                self.cells[id].neighbors[x_slot] = Some(base_cell);
                self.cells[base_cell].neighbors[base_slot] = Some(id);
            }
        }

        // wire the facets shared between new cells
        let mut facet_map: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for &id in &new_ids {
            let nsites = self.cells[id].sites.clone();
            for k in 0..nsites.len() {
                if nsites[k] == site_id {
                    continue; // base facet, already wired
                }
                let mut key: Vec<usize> =
                    nsites.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &s)| s).collect();
                key.sort_unstable();
                match facet_map.remove(&key) {
                    Some((other, j)) => {
                        self.cells[id].neighbors[k] = Some(other);
                        self.cells[other].neighbors[j] = Some(id);
                    }
                    None => {
                        facet_map.insert(key, (id, k));
                    }
                }
            }
        }

        self.inserted[site_id] = true;
        Ok(())
    }

    /// Drops dead cells and renumbers the survivors.
    fn compact(&mut self) {
        let mut remap = vec![usize::MAX; self.cells.len()];
        let mut next = 0;
        for (id, c) in self.cells.iter().enumerate() {
            if c.alive {
                remap[id] = next;
                next += 1;
            }
        }
        self.cells.retain(|c| c.alive);
        for c in self.cells.iter_mut() {
            for nb in c.neighbors.iter_mut() {
                *nb = nb.map(|v| remap[v]);
            }
        }
    }
}

/// First d+1 affinely independent sites in the given order.
fn pick_initial_simplex(sites: &Dataset, order: &[usize]) -> Option<Vec<usize>> {
    let d = sites.dim();
    let mut chosen: Vec<usize> = Vec::with_capacity(d + 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut scale = 0.0f64;
    for &cand in order {
        if chosen.is_empty() {
            chosen.push(cand);
            continue;
        }
        let p0 = sites.point(chosen[0]);
        let mut e: Vec<f64> = sites.point(cand).iter().zip(p0).map(|(a, b)| a - b).collect();
        scale = scale.max(e.iter().fold(0.0f64, |s, v| s.max(v.abs())));
        for b in &basis {
            let dot: f64 = e.iter().zip(b).map(|(a, c)| a * c).sum();
            for (ei, bi) in e.iter_mut().zip(b) {
                *ei -= dot * bi;
            }
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-10 * scale.max(1e-300) {
            for v in e.iter_mut() {
                *v /= norm;
            }
            basis.push(e);
            chosen.push(cand);
            if chosen.len() == d + 1 {
                return Some(chosen);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Distribution;

    fn tri(points: &[&[f64]], seed: u64) -> Triangulation {
        Triangulation::build(&Dataset::from_points(points).unwrap(), seed).unwrap()
    }

    #[test]
    fn single_triangle() {
        let t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        assert_eq!(t.alive_count(), 1);
        assert_eq!(t.hull_facets().len(), 3);
        t.check_adjacency().unwrap();
    }

    #[test]
    fn square_plus_center_makes_four_triangles() {
        let t = tri(
            &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[0.5, 0.5]],
            3,
        );
        assert_eq!(t.alive_count(), 4);
        // every triangle is incident to the center site (index 4)
        for (_, c) in t.alive_cells() {
            assert!(c.sites.contains(&4));
        }
        t.check_adjacency().unwrap();
        t.check_empty_circumsphere().unwrap();
    }

    #[test]
    fn random_2d_is_delaunay() {
        let data = Dataset::generate(Distribution::Gaussian, 50, 2, 11);
        let t = Triangulation::build(&data, 11).unwrap();
        t.check_adjacency().unwrap();
        t.check_empty_circumsphere().unwrap();
        t.check_locally_delaunay().unwrap();
    }

    #[test]
    fn random_3d_is_delaunay() {
        let data = Dataset::generate(Distribution::Uniform, 40, 3, 5);
        let t = Triangulation::build(&data, 5).unwrap();
        t.check_adjacency().unwrap();
        t.check_empty_circumsphere().unwrap();
    }

    #[test]
    fn euler_count_2d() {
        let data = Dataset::generate(Distribution::Gaussian, 60, 2, 9);
        let t = Triangulation::build(&data, 9).unwrap();
        let h = t.hull_site_count();
        assert_eq!(t.alive_count(), 2 * data.len() - h - 2);
    }

    #[test]
    fn locate_barycenter_and_outside() {
        let t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        let bary = [1.0 / 3.0, 1.0 / 3.0];
        assert_eq!(t.locate(&bary, 7), Location::Cell(0));
        assert_eq!(t.locate(&[50.0, 50.0], 7), Location::OutsideHull);
    }

    #[test]
    fn locate_agrees_with_barycentric_oracle() {
        let data = Dataset::generate(Distribution::Gaussian, 50, 2, 21);
        let t = Triangulation::build(&data, 21).unwrap();
        let queries = Dataset::generate(Distribution::Gaussian, 200, 2, 22);
        for (qi, q) in queries.iter().enumerate() {
            match t.locate(q, qi as u64) {
                Location::Cell(c) => {
                    let bc = barycentric(&t, c, q);
                    assert!(
                        bc.iter().all(|&b| b >= -1e-9),
                        "query {qi} not in located cell: {bc:?}"
                    );
                }
                Location::OutsideHull => {
                    // no cell may contain it
                    for (id, _) in t.alive_cells() {
                        let bc = barycentric(&t, id, q);
                        assert!(bc.iter().any(|&b| b < -1e-9), "query {qi} inside cell {id}");
                    }
                }
            }
        }
    }

    fn barycentric(t: &Triangulation, cell: usize, q: &[f64]) -> Vec<f64> {
        let d = t.dim();
        let sites = &t.cells()[cell].sites;
        let p0 = t.sites().point(sites[0]);
        let mut m = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for i in 0..d {
            let pi = t.sites().point(sites[i + 1]);
            for k in 0..d {
                m[k * d + i] = pi[k] - p0[k];
            }
        }
        for k in 0..d {
            b[k] = q[k] - p0[k];
        }
        let lam = crate::geometry::solve_linear(&mut m, &mut b, d).unwrap();
        let mut out = vec![1.0 - lam.iter().sum::<f64>()];
        out.extend(lam);
        out
    }

    #[test]
    fn incircle_list_cases() {
        let t = tri(
            &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[0.5, 0.5]],
            3,
        );
        // a query near the center belongs to several circumspheres; compare
        // against the brute-force scan of all cells
        let q = [0.51, 0.48];
        let mut brute: Vec<usize> = t
            .alive_cells()
            .filter(|(_, c)| in_sphere(&c.circ, &q) != SphereSide::Outside)
            .map(|(id, _)| id)
            .collect();
        brute.sort_unstable();
        assert_eq!(t.incircle_list(&q).cell_ids, brute);
        // far outside: empty list
        assert!(t.incircle_list(&[40.0, -30.0]).cell_ids.is_empty());
    }

    #[test]
    fn incircle_list_matches_brute_force_on_random_queries() {
        let data = Dataset::generate(Distribution::Gaussian, 40, 2, 31);
        let t = Triangulation::build(&data, 31).unwrap();
        let queries = Dataset::generate(Distribution::Gaussian, 100, 2, 32);
        for q in queries.iter() {
            let mut brute: Vec<usize> = t
                .alive_cells()
                .filter(|(_, c)| in_sphere(&c.circ, q) != SphereSide::Outside)
                .map(|(id, _)| id)
                .collect();
            brute.sort_unstable();
            assert_eq!(t.incircle_list(q).cell_ids, brute);
        }
    }

    #[test]
    fn insert_barycenter_splits_triangle() {
        let mut t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        t.insert(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert_eq!(t.alive_count(), 3);
        assert_eq!(t.site_count(), 4);
        t.check_adjacency().unwrap();
        t.check_empty_circumsphere().unwrap();
    }

    #[test]
    fn insert_outside_seeing_one_edge() {
        let mut t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        // far below the hypotenuse-opposite edge y=0, sees only that edge
        t.insert(&[0.5, -100.0]).unwrap();
        assert_eq!(t.alive_count(), 2);
        t.check_adjacency().unwrap();
        t.check_empty_circumsphere().unwrap();
    }

    #[test]
    fn duplicate_site_rejected() {
        let mut t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        assert!(matches!(t.insert(&[1.0, 0.0]), Err(Error::DuplicateSite(_))));
    }

    #[test]
    fn incremental_random_build_is_delaunay() {
        let data = Dataset::generate(Distribution::Gaussian, 30, 2, 41);
        let t = Triangulation::build(&data, 41).unwrap();
        t.check_empty_circumsphere().unwrap();
        t.check_adjacency().unwrap();
    }

    #[test]
    fn pseudo_insert_triangle_cases() {
        let t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        // inside: all three sites
        assert_eq!(t.pseudo_insert(&[0.3, 0.3]).unwrap(), vec![0, 1, 2]);
        // just outside edge y=0, outside the circumsphere: the two edge sites
        assert_eq!(t.pseudo_insert(&[0.5, -2.0]).unwrap(), vec![0, 1]);
    }

    #[test]
    fn pseudo_insert_matches_insert_on_copy() {
        for dim in [2usize, 3] {
            let data = Dataset::generate(Distribution::Gaussian, 40, dim, 51);
            let t = Triangulation::build(&data, 51).unwrap();
            let queries = Dataset::generate(Distribution::Gaussian, 50, dim, 52);
            for q in queries.iter() {
                let pi = t.pseudo_insert(q).unwrap();
                let mut copy = t.clone();
                let id = copy.insert(q).unwrap();
                let mut oracle = copy.neighbors_of_site(id);
                oracle.sort_unstable();
                assert_eq!(pi, oracle);
            }
        }
    }

    #[test]
    fn build_permutation_invariant_cell_set() {
        let data = Dataset::generate(Distribution::Gaussian, 45, 2, 61);
        let a = Triangulation::build(&data, 1).unwrap();
        let b = Triangulation::build(&data, 2).unwrap();
        assert_eq!(a.cell_signature(), b.cell_signature());
    }

    #[test]
    fn hull_normals_triangle() {
        let t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        for ((c, k), u) in t.hull_face_normals() {
            // outward: negative dot with direction to the opposite vertex
            let apex = t.sites().point(t.cells()[c].sites[k]);
            let f0_site = t.cells()[c].sites.iter().enumerate().find(|&(i, _)| i != k).unwrap();
            let f0 = t.sites().point(*f0_site.1);
            let dot: f64 = u.iter().zip(apex.iter().zip(f0)).map(|(ui, (a, b))| ui * (a - b)).sum();
            assert!(dot < 0.0);
            // the facet on y=0 has normal (0,-1)
            let facet_sites: Vec<usize> = t.cells()[c]
                .sites
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &s)| s)
                .collect();
            let mut fs = facet_sites.clone();
            fs.sort_unstable();
            if fs == vec![0, 1] {
                assert!((u[0] - 0.0).abs() < 1e-12 && (u[1] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hull_normals_agree_with_angular_sort_oracle() {
        let data = Dataset::generate(Distribution::Gaussian, 30, 2, 71);
        let t = Triangulation::build(&data, 71).unwrap();
        // oracle hull edges by angular sort around the centroid of hull sites
        let normals = t.hull_face_normals();
        for ((c, k), u) in &normals {
            // every normal is outward w.r.t. all sites
            let cell = &t.cells()[*c];
            let f0 = t.sites().point(cell.sites[if *k == 0 { 1 } else { 0 }]);
            for p in t.sites().iter() {
                let dot: f64 = u.iter().zip(p.iter().zip(f0)).map(|(ui, (a, b))| ui * (a - b)).sum();
                assert!(dot < 1e-9, "site on outer side of hull facet");
            }
        }
        // edge count matches a classical 2-d convex hull
        let hull = convex_hull_2d(t.sites());
        assert_eq!(normals.len(), hull.len());
    }

    fn convex_hull_2d(data: &Dataset) -> Vec<usize> {
        // monotone chain
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.sort_by(|&a, &b| {
            data.point(a)
                .partial_cmp(data.point(b))
                .unwrap()
        });
        let cross = |o: &[f64], a: &[f64], b: &[f64]| {
            (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        };
        let mut hull: Vec<usize> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &usize>> =
                if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
            for &i in iter {
                while hull.len() >= start + 2 {
                    let o = data.point(hull[hull.len() - 2]);
                    let a = data.point(hull[hull.len() - 1]);
                    if cross(o, a, data.point(i)) <= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(i);
            }
            hull.pop();
        }
        hull
    }

    #[test]
    fn dump_format() {
        let t = tri(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 1);
        let dump = t.dump();
        assert_eq!(dump.trim(), "0: 0 1 2 | - - -");
    }

    #[test]
    fn degenerate_input_rejected() {
        let r = Triangulation::build(
            &Dataset::from_points(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]).unwrap(),
            1,
        );
        assert!(matches!(r, Err(Error::DegenerateInput)));
    }
}
