//! Partition-based nonrigid surface registration.
//!
//! The pipeline fits a triangulated template to a target surface in three
//! movements: landmark-driven partitioning of the template into parts,
//! per-part affine pre-warping with a blended seam band, and an
//! optimal-step nonrigid ICP solve with a per-vertex affine stack.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod landmarks;
pub mod mesh;
pub mod partition;
pub mod prewarp;
pub mod solver;
pub mod spatial;
pub mod transform;

pub use config::RegistrationConfig;
pub use error::{MorphError, Result};
pub use landmarks::{Landmark, LandmarkSet};
pub use mesh::{Mesh, PointCloud, TargetSurface};
pub use partition::{build_partition, PartitionMap, PartitionSpec};
pub use prewarp::{blend_weights, prewarp_pipeline, PrewarpResult, SmoothingConfig};
pub use solver::{
    energy, find_correspondences, register, solve_step, Correspondence, CorrespondenceSet,
    EnergyBreakdown, EnergyRecord, EnergyWeights, PruningConfig, RegisterResult,
    VertexAffineStack,
};
pub use spatial::{build_index, ClosestPoint, SpatialIndex};
pub use transform::Affine4x3;
