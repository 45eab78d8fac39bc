//! Exact nearest-neighbor search in low-dimensional Euclidean spaces.
//!
//! The crate provides four exact search structures sharing one query
//! interface: brute force with partial distance search, a Kd-tree, a
//! principal axis tree, and a quantization tree whose recursive partition
//! comes from k-means codebooks. The quantization tree can additionally be
//! preprocessed with "friend" lists derived from the Delaunay triangulation
//! of each node's centers, which restrict the sibling nodes that have to be
//! checked on the way back up.
//!
//! Supporting modules: [`geometry`] (distance and predicate primitives),
//! [`delaunay`] (incremental simplex-graph triangulation in general
//! dimension), [`quantization`] (Lloyd/k-means), [`friends`] (friend-cell
//! preprocessing) and [`bench`] (dataset generation, validation and timing
//! harness used by the CLI).

pub mod bench;
pub mod dataset;
pub mod delaunay;
pub mod error;
pub mod friends;
pub mod geometry;
pub mod quantization;
pub mod rng;
pub mod trees;

pub use dataset::Dataset;
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
