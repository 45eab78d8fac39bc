//! Dimension-generic Euclidean primitives and geometric predicates.
//!
//! Everything here is plain double precision with explicit tolerances.
//! Classification predicates take a tolerance relative to the coordinate
//! scale of their inputs, which keeps them well above rounding noise for
//! desk-scale data while staying far below random-data feature sizes.

use crate::error::Error;
use crate::Result;

/// Relative tolerance for the in-sphere classification band.
pub const TAU_SPHERE: f64 = 1e-9;

/// Relative tolerance for orientation degeneracy, against bounding-box scale.
pub const TAU_ORIENT: f64 = 1e-12;

/// A sphere stored as center plus squared radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius2: f64,
}

/// Precomputed coefficients of the bisector between two sites.
///
/// `inv_2ab = 1/(2*|a-b|)` turns the elimination test into one subtraction
/// and one multiplication: the signed distance from a query `q` to the
/// bisector of `(a, b)` is `(|q-b|^2 - |q-a|^2) * inv_2ab`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspaceCoeff {
    pub a_index: usize,
    pub b_index: usize,
    pub inv_2ab: f64,
}

impl HalfspaceCoeff {
    pub fn new(a_index: usize, b_index: usize, a: &[f64], b: &[f64]) -> Result<Self> {
        if a_index == b_index {
            return Err(Error::InvalidConfig("halfspace needs two distinct sites".into()));
        }
        let ab2 = squared_distance(a, b);
        if ab2 == 0.0 {
            return Err(Error::DuplicateSite(b_index));
        }
        Ok(HalfspaceCoeff { a_index, b_index, inv_2ab: 0.5 / ab2.sqrt() })
    }
}

/// Side classification against a sphere, with a tolerance band for ON.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereSide {
    Inside,
    On,
    Outside,
}

/// Sign of the simplex orientation determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
    Degenerate,
}

/// Squared Euclidean distance.
#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

/// Partial distance search: accumulates the squared distance but aborts
/// (returns `None`) as soon as the running sum reaches `bound`.
///
/// A `Some` result always equals [`squared_distance`] and is `< bound`.
#[inline]
pub fn partial_distance(x: &[f64], y: &[f64], bound: f64) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
        if acc >= bound {
            return None;
        }
    }
    Some(acc)
}

/// Signed distance from a query to the bisector hyperplane of the sites
/// referenced by `h`, positive when the query is strictly on the `a` side.
///
/// `qa2` and `qb2` are the squared distances from the query to sites `a`
/// and `b`.
#[inline]
pub fn leibniz_margin(qa2: f64, qb2: f64, h: &HalfspaceCoeff) -> f64 {
    (qb2 - qa2) * h.inv_2ab
}

/// Solves the square system `m x = b` by Gaussian elimination with partial
/// pivoting. `m` is row-major. Returns `None` when a pivot is singular
/// relative to the matrix scale.
pub(crate) fn solve_linear(m: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = m[col * n + col].abs();
        for row in col + 1..n {
            let v = m[row * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < 1e-13 * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let inv = 1.0 / m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}

/// Circumsphere of a non-degenerate simplex given as d+1 points.
///
/// Solves `<c - p0, pi - p0> = |pi - p0|^2 / 2` for the center.
pub fn circumsphere(simplex_points: &[&[f64]]) -> Result<Sphere> {
    let d = simplex_points.len().checked_sub(1).ok_or(Error::DegenerateSimplex)?;
    if d == 0 {
        return Err(Error::DegenerateSimplex);
    }
    let p0 = simplex_points[0];
    if simplex_points.iter().any(|p| p.len() != d) {
        return Err(Error::DimensionMismatch(d, p0.len()));
    }
    let mut m = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for i in 0..d {
        let pi = simplex_points[i + 1];
        for k in 0..d {
            m[i * d + k] = pi[k] - p0[k];
        }
        b[i] = squared_distance(pi, p0) * 0.5;
    }
    let offset = solve_linear(&mut m, &mut b, d).ok_or(Error::DegenerateSimplex)?;
    let center: Vec<f64> = p0.iter().zip(&offset).map(|(c, o)| c + o).collect();
    let radius2 = squared_distance(&center, p0);
    Ok(Sphere { center, radius2 })
}

/// Classifies a point against a sphere within the relative tolerance
/// [`TAU_SPHERE`].
pub fn in_sphere(s: &Sphere, x: &[f64]) -> SphereSide {
    let d2 = squared_distance(x, &s.center);
    let band = TAU_SPHERE * s.radius2.max(d2);
    if d2 < s.radius2 - band {
        SphereSide::Inside
    } else if d2 > s.radius2 + band {
        SphereSide::Outside
    } else {
        SphereSide::On
    }
}

/// Orientation of d+1 points in dimension d: the sign of the determinant of
/// the edge vectors from the first point.
pub fn orientation(points: &[&[f64]]) -> Orientation {
    let d = points.len() - 1;
    let p0 = points[0];
    let mut m = vec![0.0; d * d];
    let mut scale = 0.0f64;
    for i in 0..d {
        for k in 0..d {
            let v = points[i + 1][k] - p0[k];
            m[i * d + k] = v;
            scale = scale.max(v.abs());
        }
    }
    if scale == 0.0 {
        return Orientation::Degenerate;
    }
    // LU-style elimination, tracking the determinant sign.
    let mut sign = 1.0f64;
    let mut det = 1.0f64;
    for col in 0..d {
        let mut pivot_row = col;
        let mut pivot_val = m[col * d + col].abs();
        for row in col + 1..d {
            let v = m[row * d + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_row != col {
            for k in 0..d {
                m.swap(col * d + k, pivot_row * d + k);
            }
            sign = -sign;
        }
        let pivot = m[col * d + col];
        if pivot == 0.0 {
            return Orientation::Degenerate;
        }
        det *= pivot;
        let inv = 1.0 / pivot;
        for row in col + 1..d {
            let f = m[row * d + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..d {
                m[row * d + k] -= f * m[col * d + k];
            }
        }
    }
    det *= sign;
    let threshold = TAU_ORIENT * scale.powi(d as i32);
    if det.abs() <= threshold {
        Orientation::Degenerate
    } else if det > 0.0 {
        Orientation::Positive
    } else {
        Orientation::Negative
    }
}
