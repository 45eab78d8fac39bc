//! Quadratic vector quantization of empirical distributions.
//!
//! Lloyd iterations alternate nearest-neighbor assignment and centroid
//! updates, which specializes to k-means on an empirical distribution. The
//! distortion convention is the mean (not sum) of squared distances. Ties
//! always break toward the lowest index so every run is deterministic.

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::geometry::{partial_distance, squared_distance};
use crate::rng;
use crate::Result;

/// Where a codebook's sites come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodebookSource {
    Free,
    /// Every site is a dataset point; the vector holds the dataset indices.
    Snapped(Vec<usize>),
}

/// An ordered set of pairwise distinct sites (a level-N quantizer).
#[derive(Debug, Clone)]
pub struct Codebook {
    sites: Dataset,
    source: CodebookSource,
}

impl Codebook {
    pub fn free(sites: Dataset) -> Codebook {
        Codebook { sites, source: CodebookSource::Free }
    }

    pub fn sites(&self) -> &Dataset {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn source(&self) -> &CodebookSource {
        &self.source
    }

    /// Dataset indices when snapped.
    pub fn snapped_indices(&self) -> Option<&[usize]> {
        match &self.source {
            CodebookSource::Snapped(idx) => Some(idx),
            CodebookSource::Free => None,
        }
    }
}

/// Per-point codebook labels plus per-cell cardinalities.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
}

/// Huyghens decomposition of the empirical variance.
#[derive(Debug, Clone, Copy)]
pub struct InertiaReport {
    pub variance: f64,
    pub intraclass: f64,
    pub interclass: f64,
}

/// Lloyd stopping parameters.
#[derive(Debug, Clone, Copy)]
pub struct LloydOpts {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub rng_seed: u64,
}

impl Default for LloydOpts {
    fn default() -> Self {
        LloydOpts { max_iters: 100, rel_tol: 1e-6, rng_seed: 0 }
    }
}

/// Outcome of a Lloyd run.
#[derive(Debug, Clone)]
pub struct LloydResult {
    pub codebook: Codebook,
    pub assignment: Assignment,
    pub inertia: InertiaReport,
    /// Mean distortion recorded at every assignment step.
    pub distortion_history: Vec<f64>,
}

/// Nearest site of the codebook, with its squared distance. Ties break to
/// the lowest index; the scan uses the running best as a partial-distance
/// bound.
pub fn nn_project(cb: &Codebook, x: &[f64]) -> (usize, f64) {
    nn_project_dataset(cb.sites(), x)
}

/// [`nn_project`] over a raw dataset of sites.
pub fn nn_project_dataset(sites: &Dataset, x: &[f64]) -> (usize, f64) {
    debug_assert!(!sites.is_empty());
    let mut best = (0usize, f64::INFINITY);
    for (i, s) in sites.iter().enumerate() {
        if let Some(d2) = partial_distance(x, s, best.1) {
            best = (i, d2);
        }
    }
    best
}

fn count_distinct(data: &Dataset) -> usize {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| data.point(a).partial_cmp(data.point(b)).unwrap());
    let mut distinct = 0;
    for (pos, &i) in idx.iter().enumerate() {
        if pos == 0 || data.point(idx[pos - 1]) != data.point(i) {
            distinct += 1;
        }
    }
    distinct
}

/// Assigns every data point to its nearest codebook site.
pub fn assign(data: &Dataset, cb: &Codebook) -> Assignment {
    let mut labels = Vec::with_capacity(data.len());
    let mut counts = vec![0usize; cb.len()];
    for p in data.iter() {
        let (i, _) = nn_project(cb, p);
        labels.push(i);
        counts[i] += 1;
    }
    Assignment { labels, counts }
}

fn mean_distortion(data: &Dataset, cb: &Codebook, asn: &Assignment) -> f64 {
    let mut acc = 0.0;
    for (p, &l) in data.iter().zip(&asn.labels) {
        acc += squared_distance(p, cb.sites().point(l));
    }
    acc / data.len() as f64
}

/// k-means++-style seeding: first site uniform, the rest sampled with
/// probability proportional to the squared distance to the chosen set.
fn seed_plus_plus(data: &Dataset, n_sites: usize, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, rng::labels::LLOYD);
    let n = data.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(n_sites);
    chosen.push(rng.gen_range(0..n));
    let mut weights: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.point(i), data.point(chosen[0])))
        .collect();
    while chosen.len() < n_sites {
        let total: f64 = weights.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a chosen site; caller
            // guarantees enough distinct points, so this picks the first
            // unchosen distinct point
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        chosen.push(next);
        for i in 0..n {
            let d2 = squared_distance(data.point(i), data.point(next));
            if d2 < weights[i] {
                weights[i] = d2;
            }
        }
    }
    data.subset(&chosen)
}

/// Reseeds each empty cell at the dataset point farthest from its assigned
/// centroid, so repeated repair terminates within N rounds.
pub fn empty_cell_repair(cb: &Codebook, asn: &Assignment, data: &Dataset) -> Codebook {
    let mut sites = cb.sites().clone();
    let empty: Vec<usize> =
        asn.counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect();
    if empty.is_empty() {
        return cb.clone();
    }
    // misfit of each point: squared distance to its current site
    let mut misfit: Vec<(f64, usize)> = data
        .iter()
        .zip(&asn.labels)
        .enumerate()
        .map(|(i, (p, &l))| (squared_distance(p, cb.sites().point(l)), i))
        .collect();
    misfit.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut flat: Vec<f64> = sites.as_flat().to_vec();
    let d = sites.dim();
    let mut used = 0;
    for cell in empty {
        let (_, point) = misfit[used];
        used += 1;
        flat[cell * d..(cell + 1) * d].copy_from_slice(data.point(point));
    }
    sites = Dataset::from_flat(d, flat).unwrap();
    Codebook::free(sites)
}

/// Lloyd / k-means optimization of a level-N quantizer of the empirical
/// distribution of `data`.
///
/// Distortion is non-increasing across iterations; the history is recorded
/// in the result so callers can check it.
pub fn lloyd(data: &Dataset, n_sites: usize, opts: LloydOpts) -> Result<LloydResult> {
    if n_sites == 0 || data.is_empty() {
        return Err(Error::InvalidConfig("lloyd needs data and N >= 1".into()));
    }
    let distinct = count_distinct(data);
    if n_sites > distinct {
        return Err(Error::InfeasibleLevel { requested: n_sites, distinct });
    }
    let dim = data.dim();
    let mut cb = Codebook::free(seed_plus_plus(data, n_sites, opts.rng_seed));
    let mut history: Vec<f64> = Vec::new();
    let mut asn;
    loop {
        asn = assign(data, &cb);
        if asn.counts.iter().any(|&c| c == 0) {
            cb = empty_cell_repair(&cb, &asn, data);
            asn = assign(data, &cb);
        }
        let distortion = mean_distortion(data, &cb, &asn);
        let done = match history.last() {
            Some(&prev) => {
                debug_assert!(distortion <= prev * (1.0 + 1e-12));
                history.len() >= opts.max_iters
                    || (prev - distortion) < opts.rel_tol * prev.max(f64::MIN_POSITIVE)
            }
            None => false,
        };
        history.push(distortion);
        if done {
            break;
        }
        // centroid step
        let mut sums = vec![0.0; n_sites * dim];
        for (p, &l) in data.iter().zip(&asn.labels) {
            for k in 0..dim {
                sums[l * dim + k] += p[k];
            }
        }
        let mut flat = Vec::with_capacity(n_sites * dim);
        for i in 0..n_sites {
            if asn.counts[i] > 0 {
                for k in 0..dim {
                    flat.push(sums[i * dim + k] / asn.counts[i] as f64);
                }
            } else {
                flat.extend_from_slice(cb.sites().point(i));
            }
        }
        cb = Codebook::free(Dataset::from_flat(dim, flat)?);
    }
    let inertia = inertia(data, &asn, cb.len());
    Ok(LloydResult { codebook: cb, assignment: asn, inertia, distortion_history: history })
}

/// Huyghens decomposition for a (data, assignment) pair.
///
/// Intraclass and interclass inertia use the empirical cell centroids; the
/// variance is computed independently from the raw data. Empty cells
/// contribute only through their absence.
pub fn inertia(data: &Dataset, asn: &Assignment, n_cells: usize) -> InertiaReport {
    let n = data.len();
    let dim = data.dim();
    let mut mean = vec![0.0; dim];
    for p in data.iter() {
        for k in 0..dim {
            mean[k] += p[k];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let variance = data.iter().map(|p| squared_distance(p, &mean)).sum::<f64>() / n as f64;

    let mut centroids = vec![0.0; n_cells * dim];
    for (p, &l) in data.iter().zip(&asn.labels) {
        for k in 0..dim {
            centroids[l * dim + k] += p[k];
        }
    }
    for i in 0..n_cells {
        if asn.counts[i] > 0 {
            for k in 0..dim {
                centroids[i * dim + k] /= asn.counts[i] as f64;
            }
        }
    }
    let mut intraclass = 0.0;
    let mut interclass = 0.0;
    for (p, &l) in data.iter().zip(&asn.labels) {
        let g = &centroids[l * dim..(l + 1) * dim];
        intraclass += squared_distance(p, g);
        interclass += squared_distance(g, &mean);
    }
    InertiaReport {
        variance,
        intraclass: intraclass / n as f64,
        interclass: interclass / n as f64,
    }
}

/// Replaces every site by a distinct nearest dataset point.
///
/// Collisions are resolved greedily in increasing distance order: the
/// globally closest (site, unclaimed point) pair is claimed first.
pub fn snap_to_dataset(cb: &Codebook, data: &Dataset) -> Codebook {
    let n_sites = cb.len();
    assert!(n_sites <= data.len());
    let mut claimed = vec![false; data.len()];
    let mut snapped: Vec<Option<usize>> = vec![None; n_sites];
    for _ in 0..n_sites {
        let mut best: Option<(f64, usize, usize)> = None; // (dist2, site, point)
        for site in 0..n_sites {
            if snapped[site].is_some() {
                continue;
            }
            for (i, p) in data.iter().enumerate() {
                if claimed[i] {
                    continue;
                }
                let d2 = squared_distance(cb.sites().point(site), p);
                if best.is_none() || d2 < best.unwrap().0 {
                    best = Some((d2, site, i));
                }
            }
        }
        let (_, site, point) = best.expect("n_sites <= data.len() guarantees a free point");
        snapped[site] = Some(point);
        claimed[point] = true;
    }
    let indices: Vec<usize> = snapped.into_iter().map(|s| s.unwrap()).collect();
    Codebook { sites: data.subset(&indices), source: CodebookSource::Snapped(indices) }
}
