//! Ablation studies: clustering threshold sweep, library-size sweep over
//! nested prefixes, and the radial-symmetry pre-alignment comparison.
//!
//! Cluster and library-size studies score the sparse plan only, which
//! isolates search quality from interpolation variance; the symmetry study
//! densifies one shared sparse plan three ways.

use crate::experiments::benchmark::{mean, StudyError, REPORT_SCHEMA_VERSION};
use crate::experiments::metrics::eval_plan;
use crate::experiments::paths::{generate_path, path_seed, PathClass};
use crate::forward_model::{ModelSpec, PccModel, SymmetryDescriptor};
use crate::interpolation::{interpolate, prealign_radial};
use crate::planner::{plan_sparse, PlanOptions, WaypointPath};
use crate::shape_library::{threshold_cluster, Clustering, ShapeLibrary};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Paths shared by the ablation studies (the appendix-style suite:
/// 15 per class unless overridden).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationConfig {
    pub path_seed: u64,
    pub paths_per_class: usize,
    pub classes: Vec<PathClass>,
    pub n_waypoints: usize,
    pub h: usize,
    pub model: ModelSpec,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            path_seed: 11,
            paths_per_class: 15,
            classes: PathClass::ALL.to_vec(),
            n_waypoints: 10,
            h: 10,
            model: ModelSpec::default(),
        }
    }
}

impl AblationConfig {
    pub fn generate_paths(&self, model: &PccModel) -> Vec<(PathClass, u64, WaypointPath)> {
        let mut paths = Vec::new();
        for &class in &self.classes {
            for index in 0..self.paths_per_class {
                let seed = path_seed(self.path_seed, class, index);
                paths.push((class, seed, generate_path(class, seed, self.n_waypoints, model)));
            }
        }
        paths
    }
}

// ---------------------------------------------------------------------------
// Clustering sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSweepPoint {
    pub gamma: f64,
    pub cluster_count: usize,
    pub average_cluster_size: f64,
    /// Mean over paths of the sparse-plan mean deviation, % of robot length.
    pub mean_sparse_dev_pct: f64,
    /// Mean wall-clock search time per path, seconds.
    pub mean_search_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSweepReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub gammas: Vec<f64>,
    pub points: Vec<ClusterSweepPoint>,
}

impl ClusterSweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "gamma,cluster_count,average_cluster_size,mean_sparse_dev_pct,mean_search_time_s\n",
        );
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.gamma,
                p.cluster_count,
                p.average_cluster_size,
                p.mean_sparse_dev_pct,
                p.mean_search_time_s
            ));
        }
        out
    }
}

/// Sweeps the clustering threshold upward from zero, scoring the sparse
/// plan only. The gamma = 0 point runs through the clustered code path with
/// singleton clusters and must match linear search exactly.
pub fn ablate_cluster(
    lib: &ShapeLibrary,
    gammas: &[f64],
    cfg: &AblationConfig,
) -> Result<ClusterSweepReport, StudyError> {
    let model = PccModel::new(cfg.model)?;
    let opts = PlanOptions::default();
    let paths = cfg.generate_paths(&model);
    let robot_length = cfg.model.nominal_length();

    let mut points = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let clustering: Clustering = threshold_cluster(lib, gamma);
        let mut devs = Vec::with_capacity(paths.len());
        let mut times = Vec::with_capacity(paths.len());
        for (_, _, path) in &paths {
            let t0 = Instant::now();
            let sparse = plan_sparse(lib, Some(&clustering), path, &opts)?;
            times.push(t0.elapsed().as_secs_f64());
            devs.push(sparse.mean_deviation() / robot_length * 100.0);
        }
        points.push(ClusterSweepPoint {
            gamma,
            cluster_count: clustering.cluster_count(),
            average_cluster_size: clustering.average_cluster_size(lib.len()),
            mean_sparse_dev_pct: mean(&devs),
            mean_search_time_s: mean(&times),
        });
    }

    Ok(ClusterSweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        gammas: gammas.to_vec(),
        points,
    })
}

// ---------------------------------------------------------------------------
// Library-size sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibSizePoint {
    pub n_lib: usize,
    pub mode: String,
    pub mean_sparse_dev_pct: f64,
    pub mean_search_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibSizeReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub sizes: Vec<usize>,
    pub points: Vec<LibSizePoint>,
    /// Per path (outer) and per size (inner): linear-mode sparse deviation
    /// in %, for superset-monotonicity checks.
    pub per_path_linear_dev_pct: Vec<Vec<f64>>,
    /// Classes aligned with `per_path_linear_dev_pct` rows.
    pub per_path_class: Vec<String>,
}

impl LibSizeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_lib,mode,mean_sparse_dev_pct,mean_search_time_s\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.n_lib, p.mode, p.mean_sparse_dev_pct, p.mean_search_time_s
            ));
        }
        out
    }

    pub fn point(&self, n_lib: usize, mode: &str) -> Option<&LibSizePoint> {
        self.points.iter().find(|p| p.n_lib == n_lib && p.mode == mode)
    }
}

/// Library-size study over nested prefixes of one seeded library, so
/// larger libraries are strict supersets. Sparse deviation and search time
/// are recorded for linear and clustered modes; the clustered gamma is
/// recalibrated per size toward floor(sqrt(n) * 1.5) clusters.
pub fn ablate_libsize(
    lib: &ShapeLibrary,
    sizes: &[usize],
    cfg: &AblationConfig,
) -> Result<LibSizeReport, StudyError> {
    let model = PccModel::new(cfg.model)?;
    let opts = PlanOptions::default();
    let paths = cfg.generate_paths(&model);
    let robot_length = cfg.model.nominal_length();

    let mut points = Vec::new();
    let mut per_path_linear: Vec<Vec<f64>> = vec![Vec::new(); paths.len()];

    for &n in sizes {
        assert!(n <= lib.len(), "prefix size {n} exceeds library {}", lib.len());
        let prefix = lib.prefix(n);
        let target = (((n as f64).sqrt() * 1.5).floor() as usize).clamp(1, n);
        let gamma = crate::shape_library::suggest_threshold(&prefix, target);
        let clustering = threshold_cluster(&prefix, gamma);

        let mut lin_devs = Vec::new();
        let mut lin_times = Vec::new();
        let mut clu_devs = Vec::new();
        let mut clu_times = Vec::new();
        for (i, (_, _, path)) in paths.iter().enumerate() {
            let t0 = Instant::now();
            let sparse = plan_sparse(&prefix, None, path, &opts)?;
            lin_times.push(t0.elapsed().as_secs_f64());
            let dev = sparse.mean_deviation() / robot_length * 100.0;
            lin_devs.push(dev);
            per_path_linear[i].push(dev);

            let t0 = Instant::now();
            let sparse = plan_sparse(&prefix, Some(&clustering), path, &opts)?;
            clu_times.push(t0.elapsed().as_secs_f64());
            clu_devs.push(sparse.mean_deviation() / robot_length * 100.0);
        }
        points.push(LibSizePoint {
            n_lib: n,
            mode: "linear".into(),
            mean_sparse_dev_pct: mean(&lin_devs),
            mean_search_time_s: mean(&lin_times),
        });
        points.push(LibSizePoint {
            n_lib: n,
            mode: "clustered".into(),
            mean_sparse_dev_pct: mean(&clu_devs),
            mean_search_time_s: mean(&clu_times),
        });
    }

    Ok(LibSizeReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        sizes: sizes.to_vec(),
        points,
        per_path_linear_dev_pct: per_path_linear,
        per_path_class: paths.iter().map(|(c, _, _)| c.to_string()).collect(),
    })
}

// ---------------------------------------------------------------------------
// Radial-symmetry ablation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryVariant {
    None,
    Discrete3,
    Continuous,
}

impl SymmetryVariant {
    pub const ALL: [SymmetryVariant; 3] = [
        SymmetryVariant::None,
        SymmetryVariant::Discrete3,
        SymmetryVariant::Continuous,
    ];

    pub fn descriptor(&self) -> Option<SymmetryDescriptor> {
        match self {
            SymmetryVariant::None => None,
            SymmetryVariant::Discrete3 => Some(SymmetryDescriptor::Discrete { folds: 3 }),
            SymmetryVariant::Continuous => Some(SymmetryDescriptor::Continuous),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SymmetryVariant::None => "none",
            SymmetryVariant::Discrete3 => "discrete_3",
            SymmetryVariant::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryCell {
    pub class: String,
    pub variant: String,
    pub mean_shape_dev_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub cells: Vec<SymmetryCell>,
    pub overall: Vec<(String, f64)>,
    /// Sparse-plan deviations are shared across variants by construction;
    /// recorded once for the identity check.
    pub mean_sparse_dev_pct: f64,
}

impl SymmetryReport {
    pub fn overall_for(&self, variant: SymmetryVariant) -> f64 {
        self.overall
            .iter()
            .find(|(v, _)| v == variant.label())
            .map(|(_, d)| *d)
            .expect("variant present")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,variant,mean_shape_dev_pct\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{}\n", c.class, c.variant, c.mean_shape_dev_pct));
        }
        out
    }
}

/// Densifies one shared sparse plan per path under each pre-alignment
/// variant and compares the interpolated shape deviation.
pub fn ablate_symmetry(
    lib: &ShapeLibrary,
    cfg: &AblationConfig,
) -> Result<SymmetryReport, StudyError> {
    let model = PccModel::new(cfg.model)?;
    let opts = PlanOptions::default();
    let paths = cfg.generate_paths(&model);
    let robot_length = cfg.model.nominal_length();

    let mut sparse_devs = Vec::new();
    let mut per_variant: Vec<Vec<(PathClass, f64)>> =
        vec![Vec::new(); SymmetryVariant::ALL.len()];

    for (class, _, path) in &paths {
        let sparse = plan_sparse(lib, None, path, &opts)?;
        sparse_devs.push(sparse.mean_deviation() / robot_length * 100.0);
        for (vi, variant) in SymmetryVariant::ALL.iter().enumerate() {
            let prepared = match variant.descriptor() {
                Some(sym) => prealign_radial(&sparse, &sym, lib),
                None => sparse.clone(),
            };
            let dense = interpolate(&prepared, path, cfg.h, &model)?;
            let detail = eval_plan(&dense, path, &model, &opts)?;
            per_variant[vi].push((*class, detail.metrics.shape_dev_pct));
        }
    }

    let mut cells = Vec::new();
    let mut overall = Vec::new();
    for (vi, variant) in SymmetryVariant::ALL.iter().enumerate() {
        for &class in &cfg.classes {
            let devs: Vec<f64> = per_variant[vi]
                .iter()
                .filter(|(c, _)| *c == class)
                .map(|(_, d)| *d)
                .collect();
            cells.push(SymmetryCell {
                class: class.to_string(),
                variant: variant.label().to_string(),
                mean_shape_dev_pct: mean(&devs),
            });
        }
        let all: Vec<f64> = per_variant[vi].iter().map(|(_, d)| *d).collect();
        overall.push((variant.label().to_string(), mean(&all)));
    }

    Ok(SymmetryReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        cells,
        overall,
        mean_sparse_dev_pct: mean(&sparse_devs),
    })
}
