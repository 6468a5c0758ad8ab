//! The three-class benchmark: seeded path suites planned with the linear,
//! clustered, and optimization methods, with per-path rows and per-class
//! aggregates written as CSV and JSON.

use crate::baseline::{plan_baseline, BaselineConfig};
use crate::experiments::metrics::{eval_plan, EvalDetail, EvalError, Metrics};
use crate::experiments::paths::{generate_path, path_seed, PathClass};
use crate::forward_model::{ModelSpec, PccModel, SymmetryDescriptor};
use crate::interpolation::{interpolate, prealign_radial, DensePlan};
use crate::planner::{plan_sparse, PlanError, PlanOptions, SparsePlan, WaypointPath};
use crate::shape_library::{
    generate_library, suggest_threshold, threshold_cluster, Bounds, Clustering, ShapeLibrary,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] crate::forward_model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Linear,
    Clustered,
    Optimization,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Linear, Method::Clustered, Method::Optimization];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Linear => write!(f, "linear"),
            Method::Clustered => write!(f, "clustered"),
            Method::Optimization => write!(f, "optimization"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Method::Linear),
            "clustered" => Ok(Method::Clustered),
            "optimization" | "baseline" => Ok(Method::Optimization),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_lib: usize,
    pub lib_seed: u64,
    pub path_seed: u64,
    /// Cluster-count target used to calibrate gamma when `gamma` is unset.
    pub target_clusters: Option<usize>,
    /// Explicit similarity threshold; overrides `target_clusters`.
    pub gamma: Option<f64>,
    pub n_waypoints: usize,
    pub h: usize,
    pub paths_per_class: usize,
    pub classes: Vec<PathClass>,
    pub methods: Vec<Method>,
    /// Pre-alignment applied before interpolation in the sampling methods;
    /// `None` skips pre-alignment entirely.
    pub symmetry: Option<SymmetryDescriptor>,
    pub model: ModelSpec,
    pub chamfer_norm: crate::planner::ChamferNorm,
    pub baseline: BaselineConfigEcho,
}

/// Serializable mirror of the baseline solver settings so reports echo the
/// full configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineConfigEcho {
    pub lambda_tip: f64,
    pub max_iters: usize,
    pub fd_step: f64,
}

impl From<&BaselineConfig> for BaselineConfigEcho {
    fn from(cfg: &BaselineConfig) -> Self {
        BaselineConfigEcho {
            lambda_tip: cfg.lambda_tip,
            max_iters: cfg.max_iters,
            fd_step: cfg.fd_step,
        }
    }
}

impl BaselineConfigEcho {
    pub fn to_config(&self) -> BaselineConfig {
        BaselineConfig {
            lambda_tip: self.lambda_tip,
            max_iters: self.max_iters,
            fd_step: self.fd_step,
            ..BaselineConfig::default()
        }
    }
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            n_lib: 20_000,
            lib_seed: 7,
            path_seed: 11,
            target_clusters: None,
            gamma: None,
            n_waypoints: 10,
            h: 10,
            paths_per_class: 40,
            classes: PathClass::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            symmetry: Some(SymmetryDescriptor::Continuous),
            model: ModelSpec::default(),
            chamfer_norm: crate::planner::ChamferNorm::Cardinality,
            baseline: BaselineConfigEcho::from(&BaselineConfig::default()),
        }
    }
}

impl BenchmarkConfig {
    /// The paper-style default: 40 paths per class, three methods,
    /// N_lib = 20000, n = 10 waypoints, h = 10 steps.
    pub fn table1() -> Self {
        Self::default()
    }

    pub fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            chamfer_norm: self.chamfer_norm,
            waypoint_weights: None,
        }
    }

    /// Default cluster-count target: floor(sqrt(n_lib) * 1.5).
    pub fn default_target_clusters(&self) -> usize {
        (((self.n_lib as f64).sqrt() * 1.5).floor() as usize).clamp(1, self.n_lib)
    }
}

/// One planned path under one method, with everything later studies need.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub sparse: Option<SparsePlan>,
    pub dense: DensePlan,
    pub detail: EvalDetail,
    pub metrics: Metrics,
    pub plan_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub class: PathClass,
    pub index: usize,
    pub seed: u64,
    pub path: WaypointPath,
    pub runs: Vec<MethodRun>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathRow {
    pub class: String,
    pub seed: u64,
    pub method: String,
    pub tip_dev_pct: f64,
    pub shape_dev_pct: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub class: String,
    pub method: String,
    pub paths: usize,
    /// Mean over paths of the per-path (step-mean) shape deviation.
    pub mean_shape_dev_pct: f64,
    /// Pooled mean over all steps of all paths.
    pub pooled_shape_dev_pct: f64,
    pub mean_tip_dev_pct: f64,
    pub mean_time_s: f64,
    pub total_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub rows: Vec<PathRow>,
    pub aggregates: Vec<Aggregate>,
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,seed,method,tip_dev_pct,shape_dev_pct,time_s\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.class, row.seed, row.method, row.tip_dev_pct, row.shape_dev_pct, row.time_s
            ));
        }
        out
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Zeroes wall-clock fields so reruns compare byte-for-byte.
    pub fn strip_timing(&mut self) {
        for row in &mut self.rows {
            row.time_s = 0.0;
        }
        for agg in &mut self.aggregates {
            agg.mean_time_s = 0.0;
            agg.total_time_s = 0.0;
        }
    }

    pub fn aggregate(&self, class: &str, method: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.class == class && a.method == method)
    }
}

/// Plans one path with a sampling method. Returns the sparse plan (before
/// pre-alignment, whose deviations it preserves), the dense plan, and the
/// wall-clock planning time.
pub fn plan_path_sampling(
    lib: &ShapeLibrary,
    clustering: Option<&Clustering>,
    path: &WaypointPath,
    h: usize,
    symmetry: Option<&SymmetryDescriptor>,
    opts: &PlanOptions,
    model: &PccModel,
) -> Result<(SparsePlan, DensePlan, f64), StudyError> {
    let t0 = Instant::now();
    let sparse = plan_sparse(lib, clustering, path, opts)?;
    let prepared = match symmetry {
        Some(sym) => prealign_radial(&sparse, sym, lib),
        None => sparse.clone(),
    };
    let dense = interpolate(&prepared, path, h, model)?;
    Ok((sparse, dense, t0.elapsed().as_secs_f64()))
}

/// Builds the clustering for a config, calibrating gamma from the target
/// cluster count unless one was given explicitly.
pub fn build_clustering(lib: &ShapeLibrary, cfg: &BenchmarkConfig) -> Clustering {
    match cfg.gamma {
        Some(gamma) => threshold_cluster(lib, gamma),
        None => {
            let target = cfg
                .target_clusters
                .unwrap_or_else(|| cfg.default_target_clusters());
            let gamma = suggest_threshold(lib, target);
            threshold_cluster(lib, gamma)
        }
    }
}

#[derive(Debug)]
pub struct BenchmarkOutcome {
    pub outcomes: Vec<PathOutcome>,
    pub report: StudyReport,
    pub gamma: Option<f64>,
}

/// Runs the benchmark against a prebuilt library (and clustering, when the
/// clustered method is requested). Library construction is excluded from
/// all timing, matching the offline/online split.
pub fn run_benchmark_with(
    lib: &ShapeLibrary,
    clustering: Option<&Clustering>,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkOutcome, StudyError> {
    let model = PccModel::new(cfg.model)?;
    let opts = cfg.plan_options();
    let baseline_cfg = cfg.baseline.to_config();
    let mut outcomes = Vec::new();

    for &class in &cfg.classes {
        for index in 0..cfg.paths_per_class {
            let seed = path_seed(cfg.path_seed, class, index);
            let path = generate_path(class, seed, cfg.n_waypoints, &model);
            let mut runs = Vec::with_capacity(cfg.methods.len());
            for &method in &cfg.methods {
                let run = match method {
                    Method::Linear => {
                        let (sparse, dense, time) = plan_path_sampling(
                            lib,
                            None,
                            &path,
                            cfg.h,
                            cfg.symmetry.as_ref(),
                            &opts,
                            &model,
                        )?;
                        let detail = eval_plan(&dense, &path, &model, &opts)?;
                        finish_run(Method::Linear, Some(sparse), dense, detail, time)
                    }
                    Method::Clustered => {
                        let clustering =
                            clustering.expect("clustered method requires a clustering");
                        let (sparse, dense, time) = plan_path_sampling(
                            lib,
                            Some(clustering),
                            &path,
                            cfg.h,
                            cfg.symmetry.as_ref(),
                            &opts,
                            &model,
                        )?;
                        let detail = eval_plan(&dense, &path, &model, &opts)?;
                        finish_run(Method::Clustered, Some(sparse), dense, detail, time)
                    }
                    Method::Optimization => {
                        let t0 = Instant::now();
                        let dense = plan_baseline(
                            &model,
                            &path,
                            cfg.h,
                            cfg.model.kappa_max,
                            &baseline_cfg,
                        )?;
                        let time = t0.elapsed().as_secs_f64();
                        let detail = eval_plan(&dense, &path, &model, &opts)?;
                        finish_run(Method::Optimization, None, dense, detail, time)
                    }
                };
                runs.push(run);
            }
            outcomes.push(PathOutcome {
                class,
                index,
                seed,
                path,
                runs,
            });
        }
    }

    let report = build_report(cfg, &outcomes);
    Ok(BenchmarkOutcome {
        outcomes,
        report,
        gamma: clustering.map(|c| c.gamma),
    })
}

/// Full benchmark entry point: builds the library (offline, untimed), the
/// clustering if needed, and runs every configured method.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome, StudyError> {
    let model = PccModel::new(cfg.model)?;
    let bounds = Bounds::symmetric(cfg.model.kappa_max);
    let lib = generate_library(&model, &bounds, cfg.n_lib, cfg.lib_seed);
    let clustering = if cfg.methods.contains(&Method::Clustered) {
        Some(build_clustering(&lib, cfg))
    } else {
        None
    };
    run_benchmark_with(&lib, clustering.as_ref(), cfg)
}

fn finish_run(
    method: Method,
    sparse: Option<SparsePlan>,
    dense: DensePlan,
    detail: EvalDetail,
    plan_time_s: f64,
) -> MethodRun {
    let metrics = Metrics {
        compute_time_s: plan_time_s,
        ..detail.metrics
    };
    MethodRun {
        method,
        sparse,
        dense,
        detail,
        metrics,
        plan_time_s,
    }
}

fn build_report(cfg: &BenchmarkConfig, outcomes: &[PathOutcome]) -> StudyReport {
    let mut rows = Vec::new();
    for outcome in outcomes {
        for run in &outcome.runs {
            rows.push(PathRow {
                class: outcome.class.to_string(),
                seed: outcome.seed,
                method: run.method.to_string(),
                tip_dev_pct: run.metrics.tip_dev_pct,
                shape_dev_pct: run.metrics.shape_dev_pct,
                time_s: run.plan_time_s,
            });
        }
    }

    let mut aggregates = Vec::new();
    for &class in &cfg.classes {
        for &method in &cfg.methods {
            let mut shape = Vec::new();
            let mut tips = Vec::new();
            let mut times = Vec::new();
            let mut pooled_sum = 0.0;
            let mut pooled_count = 0usize;
            for outcome in outcomes.iter().filter(|o| o.class == class) {
                for run in outcome.runs.iter().filter(|r| r.method == method) {
                    shape.push(run.metrics.shape_dev_pct);
                    tips.push(run.metrics.tip_dev_pct);
                    times.push(run.plan_time_s);
                    pooled_sum += run.detail.step_shape_dev.iter().sum::<f64>();
                    pooled_count += run.detail.step_shape_dev.len();
                }
            }
            if shape.is_empty() {
                continue;
            }
            let robot_length = cfg.model.nominal_length();
            aggregates.push(Aggregate {
                class: class.to_string(),
                method: method.to_string(),
                paths: shape.len(),
                mean_shape_dev_pct: mean(&shape),
                pooled_shape_dev_pct: pooled_sum / pooled_count as f64 / robot_length * 100.0,
                mean_tip_dev_pct: mean(&tips),
                mean_time_s: mean(&times),
                total_time_s: times.iter().sum(),
            });
        }
    }

    StudyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        rows,
        aggregates,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
