//! Offline shape-library generation, pairwise similarity, greedy threshold
//! clustering, threshold calibration, and the two-pass clustered search.
//!
//! The library stores full shapes rather than configurations alone, trading
//! file size for zero forward-model calls during online search.

use crate::forward_model::{Configuration, ForwardModel, ModelSpec, PccModel, Shape, CONFIG_DIM};
use crate::geometry::{Mat3, Rotation, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const LIBRARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("shapes have mismatched discretizations ({a} vs {b} points)")]
    DimensionMismatch { a: usize, b: usize },
    #[error("library file is incompatible: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] serde_json::Error),
}

/// Per-component sampling interval for library generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; CONFIG_DIM],
    pub hi: [f64; CONFIG_DIM],
}

impl Bounds {
    /// `[-kappa_max, kappa_max]` on every component.
    pub fn symmetric(kappa_max: f64) -> Self {
        Bounds {
            lo: [-kappa_max; CONFIG_DIM],
            hi: [kappa_max; CONFIG_DIM],
        }
    }

    /// Collapsed interval holding a single configuration.
    pub fn degenerate(q: &Configuration) -> Self {
        Bounds { lo: q.0, hi: q.0 }
    }

    pub fn contains(&self, q: &Configuration) -> bool {
        q.0.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Configuration {
        let mut q = [0.0; CONFIG_DIM];
        for i in 0..CONFIG_DIM {
            q[i] = if self.lo[i] == self.hi[i] {
                self.lo[i]
            } else {
                rng.random_range(self.lo[i]..=self.hi[i])
            };
        }
        Configuration(q)
    }

    /// Longest side of the sampling box.
    pub fn diameter_linf(&self) -> f64 {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }
}

/// Precomputed set of (configuration, shape) pairs approximating the
/// reachable shape space.
#[derive(Debug, Clone)]
pub struct ShapeLibrary {
    pub spec: ModelSpec,
    pub seed: u64,
    pub bounds: Bounds,
    pub shapes: Vec<Shape>,
}

impl ShapeLibrary {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Library restricted to its first `n` shapes. Because sampling is
    /// sequential in the seeded generator, this equals the library that
    /// `generate_library` would produce with `n_lib = n` and the same seed.
    pub fn prefix(&self, n: usize) -> ShapeLibrary {
        ShapeLibrary {
            spec: self.spec,
            seed: self.seed,
            bounds: self.bounds,
            shapes: self.shapes[..n].to_vec(),
        }
    }
}

/// Samples `n_lib` configurations i.i.d. uniform over `bounds` with a
/// seeded generator and runs the forward model on each. Deterministic in
/// `(seed, spec, bounds, n_lib)`, and libraries with the same seed are
/// prefix-nested.
pub fn generate_library(
    model: &PccModel,
    bounds: &Bounds,
    n_lib: usize,
    seed: u64,
) -> ShapeLibrary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes = Vec::with_capacity(n_lib);
    for _ in 0..n_lib {
        let q = bounds.sample(&mut rng);
        let shape = model
            .shape(&q)
            .expect("sampled configurations lie inside the model's validity bounds");
        shapes.push(shape);
    }
    ShapeLibrary {
        spec: *model.spec(),
        seed,
        bounds: *bounds,
        shapes,
    }
}

/// Summed pointwise distance between two equally discretized shapes:
/// `sum_j |p_j^a - p_j^b|`. Symmetric, zero iff the point lists coincide.
pub fn shape_similarity(a: &Shape, b: &Shape) -> Result<f64, LibraryError> {
    if a.points.len() != b.points.len() {
        return Err(LibraryError::DimensionMismatch {
            a: a.points.len(),
            b: b.points.len(),
        });
    }
    Ok(a.points
        .iter()
        .zip(b.points.iter())
        .map(|(p, q)| (p - q).norm())
        .sum())
}

/// Early-exit variant used by clustering: returns the similarity when it is
/// at most `gamma`, and `None` as soon as the running sum exceeds it.
fn similarity_within(a: &Shape, b: &Shape, gamma: f64) -> Option<f64> {
    let mut acc = 0.0;
    for (p, q) in a.points.iter().zip(b.points.iter()) {
        acc += (p - q).norm();
        if acc > gamma {
            return None;
        }
    }
    Some(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: usize,
    pub members: Vec<usize>,
}

/// A partition of library indices into balls of radius at most `gamma`
/// around greedily chosen centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub gamma: f64,
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn average_cluster_size(&self, n_lib: usize) -> f64 {
        n_lib as f64 / self.clusters.len().max(1) as f64
    }
}

/// Greedy threshold clustering in library index order: the first ungrouped
/// shape becomes a center and absorbs every ungrouped shape within `gamma`;
/// the pass repeats until all shapes are grouped. `gamma = 0` yields
/// singleton clusters and recovers linear-search behavior downstream.
pub fn threshold_cluster(lib: &ShapeLibrary, gamma: f64) -> Clustering {
    cluster_shapes(&lib.shapes, gamma)
}

pub(crate) fn cluster_shapes(shapes: &[Shape], gamma: f64) -> Clustering {
    let mut grouped = vec![false; shapes.len()];
    let mut clusters = Vec::new();
    for c in 0..shapes.len() {
        if grouped[c] {
            continue;
        }
        let mut members = Vec::new();
        for m in c..shapes.len() {
            if grouped[m] && m != c {
                continue;
            }
            if similarity_within(&shapes[c], &shapes[m], gamma).is_some() {
                grouped[m] = true;
                members.push(m);
            }
        }
        clusters.push(Cluster { center: c, members });
    }
    Clustering { gamma, clusters }
}

/// Finds a threshold whose greedy clustering lands within +-20% of
/// `target_clusters`, by bisection on the cluster count with clustering
/// runs as the oracle. Terminates at resolution `1e-6 x scale`.
pub fn suggest_threshold(lib: &ShapeLibrary, target_clusters: usize) -> f64 {
    assert!(
        target_clusters >= 1 && target_clusters <= lib.len(),
        "target_clusters must be in [1, n_lib]"
    );
    if target_clusters == lib.len() {
        return 0.0;
    }
    let count_at = |gamma: f64| threshold_cluster(lib, gamma).cluster_count();
    let band = (target_clusters as f64 * 0.2).max(1.0);
    let within = |count: usize| (count as f64 - target_clusters as f64).abs() <= band;

    // Scale estimate: mean pairwise similarity over a small deterministic
    // subsample.
    let probe = lib.shapes.len().min(24);
    let mut scale = 0.0;
    let mut pairs = 0usize;
    for i in 0..probe {
        for j in (i + 1)..probe {
            scale += shape_similarity(&lib.shapes[i], &lib.shapes[j]).unwrap();
            pairs += 1;
        }
    }
    let mut hi = if pairs > 0 { (scale / pairs as f64).max(1e-9) } else { 1.0 };
    let mut hi_count = count_at(hi);
    while hi_count > target_clusters {
        hi *= 2.0;
        hi_count = count_at(hi);
    }
    if within(hi_count) {
        return hi;
    }

    let mut lo = 0.0;
    let mut best = (hi, hi_count);
    let resolution = 1e-6 * hi;
    for _ in 0..128 {
        if hi - lo < resolution {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let count = count_at(mid);
        if (count as f64 - target_clusters as f64).abs()
            < (best.1 as f64 - target_clusters as f64).abs()
        {
            best = (mid, count);
        }
        if within(count) {
            return mid;
        }
        if count > target_clusters {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.0
}

/// A library paired with one clustering of it, as persisted by the sidecar
/// file.
#[derive(Debug, Clone)]
pub struct ClusteredLibrary {
    pub base: ShapeLibrary,
    pub clustering: Clustering,
}

impl ClusteredLibrary {
    pub fn new(base: ShapeLibrary, gamma: f64) -> Self {
        let clustering = threshold_cluster(&base, gamma);
        ClusteredLibrary { base, clustering }
    }
}

/// Two-pass clustered search: scores every cluster center, then scans the
/// best-scoring center's cluster exhaustively. Ties break toward the lower
/// cluster index (and lower member index). Returns `(library_index, score)`.
/// Evaluation count is `cluster_count + size(best cluster)`.
pub fn two_pass_search<F>(lib: &ShapeLibrary, clustering: &Clustering, score: F) -> (usize, f64)
where
    F: Fn(usize, &Shape) -> f64,
{
    debug_assert!(!clustering.clusters.is_empty(), "empty clustering");
    let mut best_cluster = 0usize;
    let mut best_center_score = f64::INFINITY;
    for (ci, cluster) in clustering.clusters.iter().enumerate() {
        let s = score(cluster.center, &lib.shapes[cluster.center]);
        if s < best_center_score {
            best_center_score = s;
            best_cluster = ci;
        }
    }
    let mut best_index = usize::MAX;
    let mut best_score = f64::INFINITY;
    for &m in &clustering.clusters[best_cluster].members {
        let s = score(m, &lib.shapes[m]);
        if s < best_score {
            best_score = s;
            best_index = m;
        }
    }
    (best_index, best_score)
}

// ---------------------------------------------------------------------------
// Serialization
//
// Library file: JSON object {format_version, model_spec, seed, bounds, D,
// shapes: [{q, points, tip_rotation}]}. Points are written as [x, y, z]
// triples and tip rotations row-major; serde_json emits the shortest decimal
// that round-trips each f64 bit-exactly.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ShapeRecord {
    q: [f64; CONFIG_DIM],
    points: Vec<[f64; 3]>,
    tip_rotation: [f64; 9],
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    format_version: u32,
    model_spec: ModelSpec,
    seed: u64,
    bounds: Bounds,
    #[serde(rename = "D")]
    d: usize,
    shapes: Vec<ShapeRecord>,
}

fn rotation_to_row_major(r: &Rotation) -> [f64; 9] {
    let m = r.matrix();
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

fn rotation_from_row_major(v: &[f64; 9]) -> Rotation {
    Rotation::from_matrix_unchecked(Mat3::new(
        v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8],
    ))
}

impl ShapeLibrary {
    fn to_file_repr(&self) -> LibraryFile {
        LibraryFile {
            format_version: LIBRARY_FORMAT_VERSION,
            model_spec: self.spec,
            seed: self.seed,
            bounds: self.bounds,
            d: self.spec.intervals,
            shapes: self
                .shapes
                .iter()
                .map(|s| ShapeRecord {
                    q: s.config.0,
                    points: s.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
                    tip_rotation: rotation_to_row_major(&s.tip_rotation),
                })
                .collect(),
        }
    }

    fn from_file_repr(file: LibraryFile) -> Result<Self, LibraryError> {
        if file.format_version != LIBRARY_FORMAT_VERSION {
            return Err(LibraryError::Incompatible(format!(
                "format_version {} (expected {LIBRARY_FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.d != file.model_spec.intervals {
            return Err(LibraryError::Incompatible(format!(
                "D = {} disagrees with model_spec.intervals = {}",
                file.d, file.model_spec.intervals
            )));
        }
        let shapes = file
            .shapes
            .into_iter()
            .map(|rec| {
                if rec.points.len() != file.d + 1 {
                    return Err(LibraryError::Incompatible(format!(
                        "shape has {} points, expected {}",
                        rec.points.len(),
                        file.d + 1
                    )));
                }
                Ok(Shape::new(
                    Configuration(rec.q),
                    rec.points
                        .iter()
                        .map(|p| Vec3::new(p[0], p[1], p[2]))
                        .collect(),
                    rotation_from_row_major(&rec.tip_rotation),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ShapeLibrary {
            spec: file.model_spec,
            seed: file.seed,
            bounds: file.bounds,
            shapes,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_file_repr()).expect("library serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<(), LibraryError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, &self.to_file_repr())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LibraryError> {
        let r = BufReader::new(std::fs::File::open(path)?);
        let file: LibraryFile = serde_json::from_reader(r)?;
        Self::from_file_repr(file)
    }
}

impl Clustering {
    pub fn save(&self, path: &Path) -> Result<(), LibraryError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LibraryError> {
        let r = BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(r)?)
    }
}
