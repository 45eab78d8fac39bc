//! Benchmark and validation harness shared by the CLI and the tests.
//!
//! Everything here is deterministic for a fixed seed except wall-clock
//! timings: datasets, queries, tree builds and the work counters all come
//! from seeded streams.

use std::time::Instant;

use crate::dataset::{Dataset, Distribution};
use crate::error::Error;
use crate::trees::{BruteForce, KdTree, NnResult, NnSearch, PatTree, Qtree, QtreeMode, QueryStats};
use crate::{rng, Result};

/// Search structures known to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Brute,
    Kd,
    Pat,
    QtreeCrude,
    QtreeFriends,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Brute, Method::Kd, Method::Pat, Method::QtreeCrude, Method::QtreeFriends];

    pub fn label(self) -> &'static str {
        match self {
            Method::Brute => "brute",
            Method::Kd => "kd",
            Method::Pat => "pat",
            Method::QtreeCrude => "qtree-crude",
            Method::QtreeFriends => "qtree-friends",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Method::Brute),
            "kd" => Ok(Method::Kd),
            "pat" => Ok(Method::Pat),
            "qtree-crude" => Ok(Method::QtreeCrude),
            "qtree-friends" => Ok(Method::QtreeFriends),
            other => Err(Error::InvalidConfig(format!(
                "unknown method '{other}' (expected brute, kd, pat, qtree-crude, qtree-friends)"
            ))),
        }
    }
}

/// One harness run: which methods over which problem sizes.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub dist: Distribution,
    pub n: usize,
    pub dims: Vec<usize>,
    pub queries: usize,
    /// Branching override for pat and qtree (defaults: pat 7, qtree 35).
    pub n_c: Option<usize>,
    /// Leaf capacity override (defaults: kd 2, pat/qtree their branching).
    pub leaf_cap: Option<usize>,
    pub seed: u64,
    /// Uniform jitter applied to the dataset, as a fraction of the
    /// bounding-box extent (general-position insurance).
    pub jitter: Option<f64>,
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: Method::ALL.to_vec(),
            dist: Distribution::Gaussian,
            n: 1000,
            dims: vec![2],
            queries: 10_000,
            n_c: None,
            leaf_cap: None,
            seed: 0,
            jitter: None,
            threads: 1,
        }
    }
}

/// One benchmarked (method, dimension) pair.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub method: &'static str,
    pub n: usize,
    pub dim: usize,
    pub n_c: Option<usize>,
    pub build_seconds: f64,
    pub seconds: f64,
    pub qps: f64,
    pub mean_distance_evals: f64,
    pub mean_nodes_visited: f64,
}

/// Rows over all (method, dimension) pairs of a run.
#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// CSV with a fixed header; one row per (method, dimension).
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,n,d,n_c,seconds,qps,mean_distance_evals,mean_nodes_visited\n");
        for r in &self.rows {
            let n_c = r.n_c.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.1},{:.2},{:.2}\n",
                r.method, r.n, r.dim, n_c, r.seconds, r.qps, r.mean_distance_evals,
                r.mean_nodes_visited
            ));
        }
        out
    }

    /// Aligned table, methods as rows and dimensions as columns (qps).
    pub fn to_table(&self) -> String {
        let mut dims: Vec<usize> = self.rows.iter().map(|r| r.dim).collect();
        dims.sort_unstable();
        dims.dedup();
        let mut methods: Vec<&'static str> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let mut out = format!("{:<14}", "qps");
        for d in &dims {
            out.push_str(&format!("{:>12}", format!("d={d}")));
        }
        out.push('\n');
        for m in methods {
            out.push_str(&format!("{m:<14}"));
            for d in &dims {
                match self.rows.iter().find(|r| r.method == m && r.dim == *d) {
                    Some(r) => out.push_str(&format!("{:>12.0}", r.qps)),
                    None => out.push_str(&format!("{:>12}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One validated (method, dimension) pair.
#[derive(Debug, Clone)]
pub struct ValidateRow {
    pub method: &'static str,
    pub dim: usize,
    pub queries: usize,
    pub failures: usize,
    /// Query index of the first mismatch, for reproduction with the seed.
    pub first_failure: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateReport {
    pub rows: Vec<ValidateRow>,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.failures == 0)
    }

    pub fn to_text(&self, seed: u64) -> String {
        let mut out = String::new();
        for r in &self.rows {
            if r.failures == 0 {
                out.push_str(&format!(
                    "ok   {:<14} d={} {} queries\n",
                    r.method, r.dim, r.queries
                ));
            } else {
                out.push_str(&format!(
                    "FAIL {:<14} d={} {}/{} mismatches, first at query {} (seed {})\n",
                    r.method,
                    r.dim,
                    r.failures,
                    r.queries,
                    r.first_failure.unwrap(),
                    seed
                ));
            }
        }
        out
    }
}

/// One waydown error-rate measurement.
#[derive(Debug, Clone)]
pub struct WaydownRow {
    pub method: &'static str,
    pub dim: usize,
    pub queries: usize,
    pub hits: usize,
}

impl WaydownRow {
    pub fn hit_rate(&self) -> f64 {
        self.hits as f64 / self.queries as f64
    }
}

#[derive(Debug, Clone, Default)]
pub struct WaydownReport {
    pub rows: Vec<WaydownRow>,
}

impl WaydownReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} d={} hit_rate={:.4} ({}/{})\n",
                r.method,
                r.dim,
                r.hit_rate(),
                r.hits,
                r.queries
            ));
        }
        out
    }
}

/// Any of the search structures behind the shared interface.
enum AnyTree {
    Brute(BruteForce),
    Kd(KdTree),
    Pat(PatTree),
    Qtree(Qtree),
}

impl AnyTree {
    fn query(&self, q: &[f64], stats: &mut QueryStats) -> NnResult {
        match self {
            AnyTree::Brute(t) => t.query(q, stats),
            AnyTree::Kd(t) => t.query(q, stats),
            AnyTree::Pat(t) => t.query(q, stats),
            AnyTree::Qtree(t) => t.query(q, stats),
        }
    }

    fn waydown(&self, q: &[f64], stats: &mut QueryStats) -> Option<NnResult> {
        match self {
            AnyTree::Pat(t) => Some(t.waydown_query(q, stats)),
            AnyTree::Qtree(t) => Some(t.waydown_query(q, stats)),
            _ => None,
        }
    }
}

/// Builds the structure for `method` over `data` using the config overrides.
fn build_method(cfg: &BenchConfig, method: Method, data: &Dataset) -> Result<(AnyTree, usize)> {
    use crate::trees::{KD_DEFAULT_LEAF_CAP, PAT_DEFAULT_CHILDREN, QTREE_DEFAULT_CHILDREN};
    Ok(match method {
        Method::Brute => (AnyTree::Brute(BruteForce::new(data.clone())), 0),
        Method::Kd => {
            let cap = cfg.leaf_cap.unwrap_or(KD_DEFAULT_LEAF_CAP);
            (AnyTree::Kd(KdTree::build(data.clone(), cap)), 0)
        }
        Method::Pat => {
            let n_c = cfg.n_c.unwrap_or(PAT_DEFAULT_CHILDREN);
            let cap = cfg.leaf_cap.unwrap_or(n_c);
            (AnyTree::Pat(PatTree::build(data.clone(), n_c, cap)), n_c)
        }
        Method::QtreeCrude | Method::QtreeFriends => {
            let n_c = cfg.n_c.unwrap_or(QTREE_DEFAULT_CHILDREN);
            let cap = cfg.leaf_cap.unwrap_or(n_c);
            let mode = if method == Method::QtreeCrude {
                QtreeMode::Crude
            } else {
                QtreeMode::Friends
            };
            (AnyTree::Qtree(Qtree::build(data.clone(), n_c, cap, mode, cfg.seed)?), n_c)
        }
    })
}

fn make_data(cfg: &BenchConfig, dim: usize) -> (Dataset, Dataset) {
    let mut data = Dataset::generate(cfg.dist, cfg.n, dim, cfg.seed);
    if let Some(rel) = cfg.jitter {
        let mag = rel * data.bbox_extent();
        data.jitter(mag, cfg.seed);
    }
    let queries = {
        let qseed = rng::derive(cfg.seed, rng::labels::QUERIES);
        Dataset::generate(cfg.dist, cfg.queries, dim, qseed)
    };
    (data, queries)
}

/// Runs all queries sharded over `threads`, merging work counters.
fn run_queries(
    tree: &AnyTree,
    queries: &Dataset,
    threads: usize,
    out: Option<&mut Vec<usize>>,
) -> QueryStats {
    let threads = threads.max(1);
    let n = queries.len();
    let chunk = n.div_ceil(threads);
    let mut results: Vec<(QueryStats, Vec<usize>)> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let lo = t * chunk;
            let hi = ((t + 1) * chunk).min(n);
            if lo >= hi {
                continue;
            }
            handles.push(scope.spawn(move || {
                let mut stats = QueryStats::default();
                let mut idx = Vec::with_capacity(hi - lo);
                for qi in lo..hi {
                    idx.push(tree.query(queries.point(qi), &mut stats).index);
                }
                (stats, idx)
            }));
        }
        for h in handles {
            results.push(h.join().expect("query worker panicked"));
        }
    });
    let mut stats = QueryStats::default();
    let mut all = Vec::with_capacity(n);
    for (s, idx) in results {
        stats.merge(&s);
        all.extend(idx);
    }
    if let Some(out) = out {
        *out = all;
    }
    stats
}

/// Times every requested method over every requested dimension.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for &dim in &cfg.dims {
        let (data, queries) = make_data(cfg, dim);
        for &method in &cfg.methods {
            let t0 = Instant::now();
            let (tree, n_c) = build_method(cfg, method, &data)?;
            let build_seconds = t0.elapsed().as_secs_f64();
            // warm-up pass, excluded from timing
            let warm = queries.subset(&(0..queries.len().min(1000)).collect::<Vec<_>>());
            run_queries(&tree, &warm, cfg.threads, None);
            let t1 = Instant::now();
            let stats = run_queries(&tree, &queries, cfg.threads, None);
            let seconds = t1.elapsed().as_secs_f64();
            report.rows.push(BenchRow {
                method: method.label(),
                n: cfg.n,
                dim,
                n_c: (n_c > 0).then_some(n_c),
                build_seconds,
                seconds,
                qps: cfg.queries as f64 / seconds,
                mean_distance_evals: stats.distance_evals as f64 / cfg.queries as f64,
                mean_nodes_visited: stats.nodes_visited as f64 / cfg.queries as f64,
            });
        }
    }
    Ok(report)
}

/// Compares every method against brute force, query by query.
pub fn run_validate(cfg: &BenchConfig) -> Result<ValidateReport> {
    let mut report = ValidateReport::default();
    for &dim in &cfg.dims {
        let (data, queries) = make_data(cfg, dim);
        let brute = BruteForce::new(data.clone());
        let mut truth = Vec::new();
        run_queries(&AnyTree::Brute(brute), &queries, cfg.threads, Some(&mut truth));
        for &method in &cfg.methods {
            if method == Method::Brute {
                continue;
            }
            let (tree, _) = build_method(cfg, method, &data)?;
            let mut got = Vec::new();
            run_queries(&tree, &queries, cfg.threads, Some(&mut got));
            let mut failures = 0;
            let mut first_failure = None;
            for (qi, (g, t)) in got.iter().zip(&truth).enumerate() {
                if g != t {
                    failures += 1;
                    if first_failure.is_none() {
                        first_failure = Some(qi);
                    }
                }
            }
            report.rows.push(ValidateRow {
                method: method.label(),
                dim,
                queries: cfg.queries,
                failures,
                first_failure,
            });
        }
    }
    Ok(report)
}

/// Measures the waydown (single-descent) hit rate of pat and qtree.
pub fn run_waydown(cfg: &BenchConfig) -> Result<WaydownReport> {
    let mut report = WaydownReport::default();
    for &dim in &cfg.dims {
        let (data, queries) = make_data(cfg, dim);
        let brute = BruteForce::new(data.clone());
        let mut truth = Vec::new();
        run_queries(&AnyTree::Brute(brute), &queries, cfg.threads, Some(&mut truth));
        for &method in &cfg.methods {
            let (tree, _) = build_method(cfg, method, &data)?;
            if matches!(tree, AnyTree::Brute(_) | AnyTree::Kd(_)) {
                return Err(Error::InvalidConfig(format!(
                    "waydown needs a multiway tree, got '{}'",
                    method.label()
                )));
            }
            let mut stats = QueryStats::default();
            let mut hits = 0;
            for (qi, q) in queries.iter().enumerate() {
                let r = tree.waydown(q, &mut stats).expect("multiway tree");
                if r.index == truth[qi] {
                    hits += 1;
                }
            }
            report.rows.push(WaydownRow {
                method: method.label(),
                dim,
                queries: cfg.queries,
                hits,
            });
        }
    }
    Ok(report)
}
