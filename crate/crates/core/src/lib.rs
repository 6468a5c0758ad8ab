//! Follow-the-leader motion planning for continuum robots mounted on a
//! fully actuated SE(3) base.
//!
//! The pipeline decouples global shape search from base-pose determination:
//! shapes come from an offline sampled library, the 6-DOF base pose follows
//! from a closed-form geometric construction with exact tip placement, and
//! dense trajectories interpolate between waypoints after radial-symmetry
//! pre-alignment. A sequential local-optimization planner is included as
//! the comparison baseline, together with a benchmark and study harness.
//!
//! Modules:
//! - [`geometry`]: SE(3) primitives and the rotational constructions.
//! - [`forward_model`]: the pluggable model interface and the shipped
//!   piece-wise constant curvature model.
//! - [`shape_library`]: library generation, similarity, threshold
//!   clustering, and the two-pass search.
//! - [`planner`]: per-waypoint search and sparse-plan assembly.
//! - [`interpolation`]: pre-alignment and tip-exact densification.
//! - [`baseline`]: the optimization comparison method.
//! - [`experiments`]: path generators, metrics, benchmarks, ablations, and
//!   validation studies.

pub mod baseline;
pub mod experiments;
pub mod forward_model;
pub mod geometry;
pub mod interpolation;
pub mod planner;
pub mod shape_library;

pub use baseline::{optimize_waypoint, plan_baseline, BaselineConfig, BaselineState};
pub use forward_model::{
    Configuration, ForwardModel, ModelError, ModelSpec, PccModel, Shape, SymmetryDescriptor,
};
pub use geometry::{signed_angle_about_axis, GeometryError, Mat3, Pose, Rotation, Vec3};
pub use interpolation::{
    inter_step_tip_error, interpolate, prealign_radial, tip_blend_error, DensePlan, DenseStep,
};
pub use planner::{
    active_subset, align_base_pose, evaluate_shape, plan_sparse, search_waypoint, shape_deviation,
    AlignedCandidate, ChamferNorm, PlanError, PlanOptions, SparseEntry, SparsePlan, WaypointPath,
};
pub use shape_library::{
    generate_library, shape_similarity, suggest_threshold, threshold_cluster, two_pass_search,
    Bounds, Cluster, ClusteredLibrary, Clustering, LibraryError, ShapeLibrary,
};
