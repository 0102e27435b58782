//! Hint-position selection for knowledge distillation.
//!
//! Layers of a teacher network are reduced to `N x C` representation
//! matrices, compared pairwise with CKA or mean-squared CCA, and grouped with
//! k-means under the distance `1 - similarity`. One layer per cluster becomes
//! a hint position. The crate also carries reference implementations of the
//! distillation losses those hints feed.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature for
//! `std::error::Error` impls and `parallel` to spread the similarity and
//! distance grids over a rayon pool.
//!
//! ```
//! use hintscout_core::hints::{baseline_positions, select_positions, PositionRule};
//!
//! assert_eq!(baseline_positions(&[6, 6, 6]).unwrap(), vec![6, 12, 18]);
//! ```
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod blob;
pub mod cluster;
mod error;
pub mod hints;
pub mod losses;
pub mod matrix;
mod par;
pub mod repr;
pub mod similarity;

pub use blob::TensorBlob;
pub use cluster::{kmeans, ClusterAssignment, ClusterConfig};
pub use error::{Error, Result};
pub use hints::{HintConfig, PositionRule};
pub use matrix::Matrix;
pub use repr::LayerRepresentation;
pub use similarity::{MetricKind, MetricSpec, SimilarityMatrix};
