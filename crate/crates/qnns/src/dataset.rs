//! Point sets with flat, row-major, point-contiguous storage.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::Error;
use crate::rng;
use crate::Result;

const MAGIC: &[u8; 4] = b"QNNS";
const VERSION: u32 = 1;

/// The query/data distribution used by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// i.i.d. standard normal coordinates.
    Gaussian,
    /// Uniform on the unit hypercube.
    Uniform,
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "uniform" => Ok(Distribution::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown distribution '{other}'"))),
        }
    }
}

/// An ordered collection of n points in d-dimensional Euclidean space.
///
/// Coordinates are stored flat and row-major so a single point's
/// coordinates are scanned sequentially during partial distance search.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from flat row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be >= 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Format(format!(
                "coordinate count {} not a multiple of dimension {}",
                coords.len(),
                dim
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Format("non-finite coordinate".into()));
        }
        Ok(Dataset { dim, coords })
    }

    /// Builds a dataset by copying a list of equal-dimension points.
    pub fn from_points(points: &[&[f64]]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
            coords.extend_from_slice(p);
        }
        Dataset::from_flat(dim, coords)
    }

    /// Builds a dataset from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        Dataset::from_points(&refs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinates of point `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Appends a point.
    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, p.len()));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Format("non-finite coordinate".into()));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    /// Copies the listed points into a new dataset (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Dataset { dim: self.dim, coords }
    }

    /// Extent of the bounding box (largest per-coordinate range).
    pub fn bbox_extent(&self) -> f64 {
        let mut extent: f64 = 0.0;
        for k in 0..self.dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in self.iter() {
                lo = lo.min(p[k]);
                hi = hi.max(p[k]);
            }
            if hi > lo {
                extent = extent.max(hi - lo);
            }
        }
        extent
    }

    /// Generates `n` i.i.d. points, deterministically per seed.
    ///
    /// Gaussian coordinates come from a Box-Muller transform over the seeded
    /// stream; uniform coordinates are drawn on `[0,1)`.
    pub fn generate(dist: Distribution, n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = rng::stream(seed, rng::labels::DATASET);
        let mut coords = Vec::with_capacity(n * dim);
        match dist {
            Distribution::Uniform => {
                for _ in 0..n * dim {
                    coords.push(rng.gen::<f64>());
                }
            }
            Distribution::Gaussian => {
                let mut spare: Option<f64> = None;
                for _ in 0..n * dim {
                    coords.push(box_muller(&mut rng, &mut spare));
                }
            }
        }
        Dataset { dim, coords }
    }

    /// Adds uniform noise in `[-magnitude, magnitude]` to every coordinate,
    /// as general-position insurance for degenerate inputs.
    pub fn jitter(&mut self, magnitude: f64, seed: u64) {
        let mut rng = rng::stream(seed, rng::labels::JITTER);
        for c in self.coords.iter_mut() {
            *c += rng.gen_range(-magnitude..=magnitude);
        }
    }

    /// Writes the binary format: magic "QNNS", u32 version, u64 n, u32 d,
    /// then n*d little-endian f64, row-major.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for c in &self.coords {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary format written by [`Dataset::write_binary`].
    pub fn read_binary<R: Read>(r: &mut R) -> Result<Dataset> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected QNNS".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut coords = Vec::with_capacity(n * dim);
        for _ in 0..n * dim {
            r.read_exact(&mut b8)?;
            coords.push(f64::from_le_bytes(b8));
        }
        Dataset::from_flat(dim, coords)
    }

    /// Writes one point per line, comma-separated.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for p in self.iter() {
            let line: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV form written by [`Dataset::write_csv`].
    pub fn read_csv<R: Read>(r: &mut R) -> Result<Dataset> {
        let mut text = String::new();
        let mut r = std::io::BufReader::new(r);
        r.read_to_string(&mut text)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            match row {
                Ok(row) => rows.push(row),
                Err(e) => {
                    return Err(Error::Format(format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::Format("empty CSV".into()));
        }
        Dataset::from_rows(&rows)
    }

    /// Loads a dataset from a path, dispatching on the `.csv` extension.
    pub fn load(path: &Path) -> Result<Dataset> {
        let mut f = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            Dataset::read_csv(&mut f)
        } else {
            Dataset::read_binary(&mut f)
        }
    }

    /// Saves a dataset to a path, dispatching on the `.csv` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(&mut f)
        } else {
            self.write_binary(&mut f)
        }
    }
}

fn box_muller<R: Rng>(rng: &mut R, spare: &mut Option<f64>) -> f64 {
    if let Some(z) = spare.take() {
        return z;
    }
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        *spare = Some(r * theta.sin());
        return r * theta.cos();
    }
}
