//! Exact nearest-neighbor search structures sharing one query interface.
//!
//! Every structure answers with the index of the true nearest dataset point
//! (lowest index on exact ties) plus instrumentation counters; they differ
//! only in how much of the dataset they manage to skip.

mod brute;
mod kdtree;
mod pat;
mod qtree;

pub use brute::BruteForce;
pub use kdtree::{KdTree, DEFAULT_LEAF_CAP as KD_DEFAULT_LEAF_CAP};
pub use pat::{PatTree, DEFAULT_CHILDREN as PAT_DEFAULT_CHILDREN};
pub use qtree::{
    Qtree, QtreeMode, DEFAULT_CHILDREN as QTREE_DEFAULT_CHILDREN, FRIENDS_MAX_DIM,
};

use crate::dataset::Dataset;
use crate::geometry::partial_distance;

/// Work counters accumulated during one or more queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Point-distance evaluations, partial or full.
    pub distance_evals: u64,
    /// Distance evaluations aborted early by the running bound.
    pub partial_aborts: u64,
    /// Tree nodes entered.
    pub nodes_visited: u64,
    /// Hyperplane / interval elimination tests.
    pub hyperplane_tests: u64,
}

impl QueryStats {
    pub fn merge(&mut self, other: &QueryStats) {
        self.distance_evals += other.distance_evals;
        self.partial_aborts += other.partial_aborts;
        self.nodes_visited += other.nodes_visited;
        self.hyperplane_tests += other.hyperplane_tests;
    }
}

/// A nearest-neighbor answer: dataset index and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnResult {
    pub index: usize,
    pub dist2: f64,
}

/// The common query interface of all search structures.
pub trait NnSearch {
    /// Exact nearest neighbor of `q`, with work counters.
    fn query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult;

    /// A short label for reports.
    fn name(&self) -> &'static str;
}

/// Scans the listed points with partial distance search, updating `best`
/// in place. Exact ties keep the earlier (lower) index because the partial
/// scan aborts at `>=` the bound.
pub(crate) fn scan_points(
    data: &Dataset,
    indices: &[u32],
    q: &[f64],
    best: &mut (usize, f64),
    stats: &mut QueryStats,
) {
    for &i in indices {
        stats.distance_evals += 1;
        match partial_distance(q, data.point(i as usize), best.1) {
            // Some implies d2 < best.1, so lower indices win exact ties
            Some(d2) => *best = (i as usize, d2),
            None => stats.partial_aborts += 1,
        }
    }
}
