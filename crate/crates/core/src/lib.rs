//! Variable-structures as points of the unit sphere of the n×n operator space.
//!
//! Numeric variables, categorical variables and metric-weighted blocks are
//! encoded as normed W-spsd operators ("resultants"). On that sphere the crate
//! provides chord and geodesic distances, rank-H averages (euclidean and
//! geodesic), and a K-means-type clustering with low-rank centroids.

pub mod averaging;
pub mod clustering;
pub mod encoding;
pub mod error;
pub mod geometry;
pub mod operator_space;
pub mod simulation;

pub use averaging::{RankCriterion, RankHOperator, WeightSystem};
pub use clustering::{ClusterModel, ClusteringConfig};

pub use encoding::{Resultant, VariableKind, VariableSpec, VariableStructure};
pub use error::{Error, Result};
pub use geometry::{Operator, Weights};
pub use operator_space::DistanceKind;
