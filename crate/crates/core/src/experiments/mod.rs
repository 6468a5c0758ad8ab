//! Benchmark and study harness: seeded path generators, metrics, the
//! three-class benchmark, ablations, and the empirical validation studies.

pub mod ablation;
pub mod benchmark;
pub mod metrics;
pub mod paths;
pub mod validation;

pub use ablation::{
    ablate_cluster, ablate_libsize, ablate_symmetry, AblationConfig, ClusterSweepReport,
    LibSizeReport, SymmetryReport, SymmetryVariant,
};
pub use benchmark::{
    build_clustering, mean, median, plan_path_sampling, run_benchmark, run_benchmark_with,
    Aggregate, BenchmarkConfig, BenchmarkOutcome, Method, PathOutcome, PathRow, StudyError,
    StudyReport,
};
pub use metrics::{eval_plan, EvalDetail, EvalError, Metrics};
pub use paths::{
    gen_c_curve, gen_robot_curve, gen_robot_curve_with_config, gen_s_curve, generate_path,
    path_seed, resample_polyline, PathClass, ARC_CAP_FRACTION,
};
pub use validation::{
    convergence_study, coverage_study, deviation_regularity_probe, isotonic_nonincreasing,
    loglog_slope, ConvergenceResult, CoverageNorm, CoveragePoint, RegularityPoint,
};
