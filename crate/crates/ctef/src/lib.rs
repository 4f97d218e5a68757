//! Cayley transform ellipsoid fitting.
//!
//! Fits arbitrary ellipsoids to noisy point clouds in any dimension by
//! minimizing a least-squares surface loss over box-constrained parameters,
//! with rotations parametrized through the Cayley transform so that the
//! search space is plain Euclidean and every parameter vector is a valid
//! ellipsoid. The crate also provides the Ellipsoid-Gaussian simulator,
//! offset/shape error metrics, dimension-reduced fitting over principal
//! component subsets, and an ellipsoid-based clustering algorithm.

pub mod cluster;
pub mod error;
pub mod geometry;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{Ellipsoid, EllipsoidParams, QuadraticForm, Rotation, SkewCoords};
pub use pipeline::{FeasibleBox, FitResult, PcaModel};
pub use simulate::{GroundTruth, SimSpec};
pub use solver::{Bounds, SolveOptions, SolveReport, SolveStatus};
