//! Cross-source point cloud registration with loose-to-strict correspondence
//! matching.
//!
//! The pipeline extracts density-robust features on a point pyramid, matches
//! the sparsest level one-to-many, screens by spectral matching and
//! second-order consistency, expands every surviving match into a dense
//! group, and solves one weighted SVD per group. The group transform that
//! aligns the most sparse points wins.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod descriptor;
pub mod error;
pub mod features;
pub mod geom;
pub mod matching;
pub mod pipeline;
pub mod pose;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use geom::{PointCloud, RigidTransform};
pub use pipeline::{register, RegistrationConfig, RegistrationResult};
