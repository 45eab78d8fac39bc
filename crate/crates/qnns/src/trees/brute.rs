//! Brute-force scan with partial distance search.

use crate::dataset::Dataset;

use super::{scan_points, NnResult, NnSearch, QueryStats};

/// Linear scan over the whole dataset; the baseline every tree must beat.
#[derive(Debug, Clone)]
pub struct BruteForce {
    data: Dataset,
    indices: Vec<u32>,
}

impl BruteForce {
    pub fn new(data: Dataset) -> BruteForce {
        assert!(!data.is_empty());
        let indices = (0..data.len() as u32).collect();
        BruteForce { data, indices }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

impl NnSearch for BruteForce {
    fn query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult {
        let mut best = (usize::MAX, f64::INFINITY);
        scan_points(&self.data, &self.indices, q, &mut best, stats);
        NnResult { index: best.0, dist2: best.1 }
    }

    fn name(&self) -> &'static str {
        "brute"
    }
}
