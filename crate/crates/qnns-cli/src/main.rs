//! Command-line harness for the qnns library: dataset generation,
//! exactness validation, timing benchmarks and the way-down error-rate
//! experiment.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qnns::bench::{self, BenchConfig, Method};
use qnns::dataset::{Dataset, Distribution};

#[derive(Parser)]
#[command(name = "qnns", version, about = "Exact nearest-neighbor search benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file (binary by default, CSV for .csv paths).
    Gen(GenArgs),
    /// Validate every method against brute force, query by query.
    Validate(RunArgs),
    /// Time queries per method and report a table or CSV.
    Bench(BenchArgs),
    /// Measure the single-descent ("way down") hit rate of pat and qtree.
    Waydown(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Gaussian,
    Uniform,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Distribution {
        match d {
            DistArg::Gaussian => Distribution::Gaussian,
            DistArg::Uniform => Distribution::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    /// Data distribution.
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: DistArg,
    /// Number of points.
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform jitter as a fraction of the bounding-box extent.
    #[arg(long)]
    jitter: Option<f64>,
    /// Output path; a .csv extension selects the CSV format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Method to run (repeatable); defaults depend on the subcommand.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Data (and query) distribution.
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: DistArg,
    /// Dataset size.
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Dimension (repeatable for multi-column tables).
    #[arg(long = "dim", default_values_t = [2usize])]
    dims: Vec<usize>,
    /// Number of queries.
    #[arg(long)]
    queries: Option<usize>,
    /// Branching override for pat and qtree.
    #[arg(long)]
    nc: Option<usize>,
    /// Leaf capacity override.
    #[arg(long)]
    leaf_cap: Option<usize>,
    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform jitter as a fraction of the bounding-box extent.
    #[arg(long)]
    jitter: Option<f64>,
    /// Query worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Report format.
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Write the report to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_methods(names: &[String], default: &[Method]) -> Result<Vec<Method>> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names.iter().map(|s| s.parse::<Method>().map_err(anyhow::Error::from)).collect()
}

fn to_config(args: &RunArgs, default_methods: &[Method], default_queries: usize) -> Result<BenchConfig> {
    let cfg = BenchConfig {
        methods: parse_methods(&args.methods, default_methods)?,
        dist: args.dist.into(),
        n: args.n,
        dims: args.dims.clone(),
        queries: args.queries.unwrap_or(default_queries),
        n_c: args.nc,
        leaf_cap: args.leaf_cap,
        seed: args.seed,
        jitter: args.jitter,
        threads: args.threads,
    };
    if cfg.n == 0 || cfg.queries == 0 || cfg.dims.iter().any(|&d| d == 0) {
        bail!("n, --queries and --dim must all be at least 1");
    }
    if cfg.methods.contains(&Method::QtreeFriends) {
        if let Some(&d) = cfg.dims.iter().find(|&&d| d > qnns::trees::FRIENDS_MAX_DIM) {
            bail!(
                "qtree-friends supports dimensions up to {}, got {d}; \
                 drop the method or the dimension",
                qnns::trees::FRIENDS_MAX_DIM
            );
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => {
            let mut data = Dataset::generate(args.dist.into(), args.n, args.dim, args.seed);
            if let Some(rel) = args.jitter {
                let mag = rel * data.bbox_extent();
                data.jitter(mag, args.seed);
            }
            data.save(&args.out)
                .with_context(|| format!("writing {}", args.out.display()))?;
            println!("wrote {} points (d={}) to {}", args.n, args.dim, args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let cfg = to_config(&args, &Method::ALL, 10_000)?;
            let report = bench::run_validate(&cfg)?;
            print!("{}", report.to_text(cfg.seed));
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bench(args) => {
            let cfg = to_config(&args.run, &Method::ALL, 100_000)?;
            let report = bench::run_bench(&cfg)?;
            let text = match args.format {
                FormatArg::Table => report.to_table(),
                FormatArg::Csv => report.to_csv(),
            };
            match args.out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Waydown(args) => {
            let mut cfg =
                to_config(&args, &[Method::Pat, Method::QtreeCrude], 100_000)?;
            // the way-down experiment compares both trees at the same small
            // branching
            if cfg.n_c.is_none() {
                cfg.n_c = Some(7);
            }
            let report = bench::run_waydown(&cfg)?;
            print!("{}", report.to_text());
            Ok(ExitCode::SUCCESS)
        }
    }
}
