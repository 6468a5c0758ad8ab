//! Per-waypoint shape search: active-subset selection, closed-form base
//! pose alignment with exact tip placement, symmetric Chamfer scoring, and
//! sparse-plan assembly.
//!
//! Alignment composes three transformations: a translation placing the tip
//! on the current waypoint, a rotation about the waypoint aligning the
//! base-to-tip directions, and an axial rotation about the path direction
//! resolving the remaining degree of freedom from a third correspondence
//! pair. The tip stays on the waypoint under all three by construction.

use crate::forward_model::{Configuration, Shape};
use crate::geometry::{signed_angle_about_axis, Pose, Rotation, Vec3};
use crate::shape_library::{two_pass_search, Clustering, ShapeLibrary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative scale for degenerate-projection and collinearity thresholds;
/// multiplied by the active path arc length to stay scale-free.
pub const EPS_PROJ_REL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("path needs at least {needed} waypoints, got {got}")]
    TooFewWaypoints { got: usize, needed: usize },
    #[error("waypoints {0} and {1} coincide")]
    DuplicateWaypoint(usize, usize),
    #[error("waypoint {0} has non-finite coordinates")]
    NonFiniteWaypoint(usize),
    #[error("first and current waypoint coincide; path direction undefined")]
    DegeneratePath,
    #[error("shape library is empty")]
    EmptyLibrary,
    #[error("backbone discretization ({intervals} intervals) must exceed the waypoint count ({waypoints})")]
    DiscretizationTooCoarse { intervals: usize, waypoints: usize },
    #[error("interpolation steps per interval must be at least 1")]
    InvalidStepCount,
    #[error(transparent)]
    Model(#[from] crate::forward_model::ModelError),
}

/// Ordered 3D waypoints with cached cumulative arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    waypoints: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl WaypointPath {
    pub fn new(waypoints: Vec<Vec3>) -> Result<Self, PlanError> {
        if waypoints.is_empty() {
            return Err(PlanError::TooFewWaypoints { got: 0, needed: 1 });
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !(w.x.is_finite() && w.y.is_finite() && w.z.is_finite()) {
                return Err(PlanError::NonFiniteWaypoint(i));
            }
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for (i, w) in waypoints.windows(2).enumerate() {
            let step = (w[1] - w[0]).norm();
            if step < 1e-12 {
                return Err(PlanError::DuplicateWaypoint(i, i + 1));
            }
            cumulative.push(cumulative[i] + step);
        }
        Ok(WaypointPath {
            waypoints,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.waypoints[i]
    }

    /// Cumulative arc length from the first waypoint to waypoint `i`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_arclen(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Arc length of the active path through the first `upto` waypoints.
    pub fn active_arclen(&self, upto: usize) -> f64 {
        self.cumulative[upto - 1]
    }
}

/// Distal index whose tail arc length best matches `target_arclen`:
/// the argmin over `m` in `[0, D-1]` of
/// `|target - sum_{j=m}^{D-1} |p_j - p_{j+1}||`, ties toward smaller `m`
/// (the longer subset). A target longer than the shape yields `m = 0`.
pub fn active_subset(shape: &Shape, target_arclen: f64) -> usize {
    let cum = shape.cum_arclen();
    let total = shape.arc_length();
    let d = shape.intervals();
    let mut best = 0usize;
    let mut best_err = f64::INFINITY;
    for m in 0..d {
        let err = (target_arclen - (total - cum[m])).abs();
        if err < best_err {
            best_err = err;
            best = m;
        }
    }
    best
}

/// How Chamfer sums are normalized. `Cardinality` divides by the point-set
/// sizes; `ArcLength` divides by the polyline lengths instead, for
/// sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChamferNorm {
    #[default]
    Cardinality,
    ArcLength,
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    pub chamfer_norm: ChamferNorm,
    /// Optional per-waypoint weights for the path-to-shape side of the
    /// deviation, e.g. to prioritize recent waypoints. Unused by default.
    pub waypoint_weights: Option<Vec<f64>>,
    /// Spacing at which the active path is resampled before Chamfer
    /// scoring. Zero scores against the bare waypoint set, which floors
    /// the deviation near waypoint-spacing/4 and blurs candidate ranking;
    /// the default matches twice the shipped backbone point spacing.
    pub search_prefix_spacing: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            chamfer_norm: ChamferNorm::default(),
            waypoint_weights: None,
            search_prefix_spacing: 0.1,
        }
    }
}

/// Resamples the waypoint prefix at `spacing` (endpoints exact); with zero
/// spacing or a single-point prefix the waypoints are returned as they are.
pub(crate) fn densify_prefix(prefix: &[Vec3], arclen: f64, spacing: f64) -> Vec<Vec3> {
    if spacing <= 0.0 || prefix.len() < 2 || arclen < spacing {
        return prefix.to_vec();
    }
    let samples = ((arclen / spacing).ceil() as usize + 1).max(2);
    crate::geometry::resample_polyline(prefix, samples)
}

/// Symmetric Chamfer distance with cardinality normalizers: mean nearest
/// distance path -> shape plus mean nearest distance shape -> path.
pub fn shape_deviation(shape_points: &[Vec3], waypoints: &[Vec3]) -> f64 {
    chamfer(
        shape_points,
        waypoints,
        ChamferNorm::Cardinality,
        0.0,
        0.0,
        None,
    )
}

pub(crate) fn chamfer(
    shape_points: &[Vec3],
    waypoints: &[Vec3],
    norm: ChamferNorm,
    shape_arclen: f64,
    path_arclen: f64,
    weights: Option<&[f64]>,
) -> f64 {
    debug_assert!(!shape_points.is_empty() && !waypoints.is_empty());
    let nearest_sq = |p: &Vec3, set: &[Vec3]| {
        set.iter()
            .map(|q| (p - q).norm_squared())
            .fold(f64::INFINITY, f64::min)
    };
    let (path_sum, path_weight) = match weights {
        Some(ws) => {
            let mut acc = 0.0;
            let mut total = 0.0;
            for (w, weight) in waypoints.iter().zip(ws.iter()) {
                acc += weight * nearest_sq(w, shape_points).sqrt();
                total += weight;
            }
            (acc, total)
        }
        None => (
            waypoints
                .iter()
                .map(|w| nearest_sq(w, shape_points).sqrt())
                .sum(),
            waypoints.len() as f64,
        ),
    };
    let shape_sum: f64 = shape_points
        .iter()
        .map(|p| nearest_sq(p, waypoints).sqrt())
        .sum();
    match norm {
        ChamferNorm::Cardinality => path_sum / path_weight + shape_sum / shape_points.len() as f64,
        ChamferNorm::ArcLength => {
            // Guard the degenerate single-point prefix (zero arc length).
            let pl = path_arclen.max(1e-12);
            let sl = shape_arclen.max(1e-12);
            path_sum / pl + shape_sum / sl
        }
    }
}

/// Per-waypoint geometry shared by every candidate evaluation. The axial
/// rotation's far-point correspondence works on the raw waypoints; Chamfer
/// scoring uses the (optionally densified) prefix.
struct WaypointContext {
    scoring_prefix: Vec<Vec3>,
    target_arclen: f64,
    w_first: Vec3,
    w_tip: Vec3,
    v1: Vec3,
    eps_proj: f64,
    /// `(w_k - w_1, arc fraction of w_k)` for the waypoint farthest from
    /// the line through the first and current waypoints; `None` when the
    /// prefix is collinear and the axial rotation is skipped.
    far: Option<(Vec3, f64)>,
}

impl WaypointContext {
    fn new(path: &WaypointPath, upto: usize, opts: &PlanOptions) -> Result<Self, PlanError> {
        debug_assert!(upto >= 3, "alignment needs at least three waypoints");
        let prefix = &path.waypoints()[..upto];
        let target_arclen = path.active_arclen(upto);
        let w_first = prefix[0];
        let w_tip = prefix[upto - 1];
        let chord = w_tip - w_first;
        let chord_len = chord.norm();
        if chord_len < 1e-12 {
            return Err(PlanError::DegeneratePath);
        }
        let v1 = chord / chord_len;
        let eps_proj = EPS_PROJ_REL * target_arclen;

        let mut far_idx = 0usize;
        let mut far_dist = -1.0;
        for (j, w) in prefix.iter().enumerate() {
            let rel = w - w_first;
            let dist = (rel - v1 * rel.dot(&v1)).norm();
            if dist > far_dist {
                far_dist = dist;
                far_idx = j;
            }
        }
        let far = if far_dist < eps_proj {
            None
        } else {
            let fraction = path.cumulative()[far_idx] / target_arclen;
            Some((prefix[far_idx] - w_first, fraction))
        };
        Ok(WaypointContext {
            scoring_prefix: densify_prefix(prefix, target_arclen, opts.search_prefix_spacing),
            target_arclen,
            w_first,
            w_tip,
            v1,
            eps_proj,
            far,
        })
    }
}

/// One aligned-and-scored library shape.
#[derive(Debug, Clone)]
pub struct AlignedCandidate {
    pub library_index: usize,
    pub base_pose: Pose,
    pub m_star: usize,
    pub deviation: f64,
}

/// Result of the closed-form construction for a single shape.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub base_pose: Pose,
    pub m_star: usize,
    /// True when the prefix was collinear and the axial rotation was
    /// skipped (a straight path has no preferred roll).
    pub collinear: bool,
}

fn align_in_context(shape: &Shape, m_star: usize, ctx: &WaypointContext) -> (Pose, bool) {
    let points = &shape.points;
    let tip = points[points.len() - 1];
    let translation = ctx.w_tip - tip;

    // After T1 the tip sits on w_i, so the base-to-tip direction of the
    // translated shape is tip - p_{m*} regardless of the translation.
    let v2_raw = tip - points[m_star];
    let v2_len = v2_raw.norm();
    if v2_len < 1e-12 {
        // Shape curls onto itself; direction undefined. Callers treat this
        // as an unusable candidate.
        return (Pose::identity(), true);
    }
    let v2 = v2_raw / v2_len;
    let r2 = Rotation::align_vectors(&v2, &ctx.v1);

    let mut collinear = true;
    let rotation = match ctx.far {
        Some((ref u_b, fraction)) => {
            // Third correspondence: the active-shape point whose arc-length
            // fraction from p_{m*} is nearest the waypoint's fraction.
            let cum = shape.cum_arclen();
            let active_len = shape.tail_arclen(m_star);
            let mut k_shape = m_star;
            let mut best = f64::INFINITY;
            for j in m_star..points.len() {
                let frac = (cum[j] - cum[m_star]) / active_len;
                let err = (frac - fraction).abs();
                if err < best {
                    best = err;
                    k_shape = j;
                }
            }
            let p_k = ctx.w_tip + r2.apply(&(points[k_shape] + translation - ctx.w_tip));
            match signed_angle_about_axis(&(p_k - ctx.w_first), u_b, &ctx.v1, ctx.eps_proj) {
                Ok(phi) => {
                    collinear = false;
                    let r3 = Rotation::from_axis_angle(&ctx.v1, phi)
                        .expect("path direction is unit by construction");
                    r3 * r2
                }
                Err(_) => r2,
            }
        }
        None => r2,
    };

    let base_translation = ctx.w_tip + rotation.apply(&(translation - ctx.w_tip));
    (Pose::new(rotation, base_translation), collinear)
}

/// Applies the three-transformation construction to one shape against the
/// first `upto` waypoints of `path`. Returns the base pose and the aligned
/// active points; the aligned tip coincides with the current waypoint.
pub fn align_base_pose(
    shape: &Shape,
    m_star: usize,
    path: &WaypointPath,
    upto: usize,
) -> Result<(Pose, Vec<Vec3>), PlanError> {
    if upto < 3 {
        return Err(PlanError::TooFewWaypoints { got: upto, needed: 3 });
    }
    let ctx = WaypointContext::new(path, upto, &PlanOptions::default())?;
    let (pose, _) = align_in_context(shape, m_star, &ctx);
    Ok((pose, pose.apply_points(&shape.points[m_star..])))
}

fn score_candidate(shape: &Shape, ctx: &WaypointContext, opts: &PlanOptions) -> (Pose, usize, f64) {
    let m_star = active_subset(shape, ctx.target_arclen);
    let (pose, _) = align_in_context(shape, m_star, ctx);
    let tip = shape.points[shape.points.len() - 1];
    if (tip - shape.points[m_star]).norm() < 1e-12 {
        return (pose, m_star, f64::INFINITY);
    }
    let aligned: Vec<Vec3> = shape.points[m_star..]
        .iter()
        .map(|p| pose.apply_point(p))
        .collect();
    let deviation = chamfer(
        &aligned,
        &ctx.scoring_prefix,
        opts.chamfer_norm,
        shape.tail_arclen(m_star),
        ctx.target_arclen,
        opts.waypoint_weights.as_deref(),
    );
    (pose, m_star, deviation)
}

/// Scores a single shape against the active path; used by search, the
/// optimization baseline comparisons, and the deviation-regularity probes.
pub fn evaluate_shape(
    shape: &Shape,
    path: &WaypointPath,
    upto: usize,
    opts: &PlanOptions,
) -> Result<(Pose, usize, f64), PlanError> {
    if upto < 3 {
        return Err(PlanError::TooFewWaypoints { got: upto, needed: 3 });
    }
    let ctx = WaypointContext::new(path, upto, opts)?;
    Ok(score_candidate(shape, &ctx, opts))
}

/// Finds the library shape minimizing the aligned deviation for the active
/// path through `upto` waypoints. Linear mode scans every shape; clustered
/// mode uses the two-pass search. Candidate evaluations are independent, so
/// the linear scan runs in parallel with a deterministic
/// (score, index)-ordered reduction.
pub fn search_waypoint(
    lib: &ShapeLibrary,
    clustering: Option<&Clustering>,
    path: &WaypointPath,
    upto: usize,
    opts: &PlanOptions,
) -> Result<AlignedCandidate, PlanError> {
    if lib.is_empty() {
        return Err(PlanError::EmptyLibrary);
    }
    if upto < 3 {
        return Err(PlanError::TooFewWaypoints { got: upto, needed: 3 });
    }
    let ctx = WaypointContext::new(path, upto, opts)?;

    let index = match clustering {
        Some(clustering) => {
            let (idx, _) = two_pass_search(lib, clustering, |_, shape| {
                score_candidate(shape, &ctx, opts).2
            });
            idx
        }
        None => {
            lib.shapes
                .par_iter()
                .enumerate()
                .map(|(i, shape)| (score_candidate(shape, &ctx, opts).2, i))
                .reduce(
                    || (f64::INFINITY, usize::MAX),
                    |a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a },
                )
                .1
        }
    };

    let (pose, m_star, deviation) = score_candidate(&lib.shapes[index], &ctx, opts);
    Ok(AlignedCandidate {
        library_index: index,
        base_pose: pose,
        m_star,
        deviation,
    })
}

/// One planned configuration per waypoint. `tip_rotation` caches the
/// world-frame tip orientation so interpolation needs no extra
/// forward-model calls.
#[derive(Debug, Clone)]
pub struct SparseEntry {
    pub config: Configuration,
    pub base_pose: Pose,
    pub m_star: usize,
    pub deviation: f64,
    pub tip_rotation: Rotation,
    pub library_index: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SparsePlan {
    pub entries: Vec<SparseEntry>,
}

impl SparsePlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mean per-waypoint deviation.
    pub fn mean_deviation(&self) -> f64 {
        self.entries.iter().map(|e| e.deviation).sum::<f64>() / self.entries.len().max(1) as f64
    }
}

/// Plans one `(configuration, base pose)` per waypoint. Waypoints 3..n run
/// the library search; the first two reuse the shape found at the third
/// waypoint, re-aligned by translation only so their tips stay exact.
pub fn plan_sparse(
    lib: &ShapeLibrary,
    clustering: Option<&Clustering>,
    path: &WaypointPath,
    opts: &PlanOptions,
) -> Result<SparsePlan, PlanError> {
    let n = path.len();
    if n < 3 {
        return Err(PlanError::TooFewWaypoints { got: n, needed: 3 });
    }
    if lib.is_empty() {
        return Err(PlanError::EmptyLibrary);
    }
    if lib.spec.intervals <= n {
        return Err(PlanError::DiscretizationTooCoarse {
            intervals: lib.spec.intervals,
            waypoints: n,
        });
    }

    let mut entries = Vec::with_capacity(n);
    // Placeholders for the first two waypoints, filled from the third.
    for upto in 3..=n {
        let candidate = search_waypoint(lib, clustering, path, upto, opts)?;
        let shape = &lib.shapes[candidate.library_index];
        let tip_rotation = candidate.base_pose.rotation * shape.tip_rotation;
        entries.push(SparseEntry {
            config: shape.config,
            base_pose: candidate.base_pose,
            m_star: candidate.m_star,
            deviation: candidate.deviation,
            tip_rotation,
            library_index: Some(candidate.library_index),
        });
    }

    let third = entries[0].clone();
    let shape3 = &lib.shapes[third.library_index.expect("search sets the index")];
    let w3 = *path.point(2);
    let mut head = Vec::with_capacity(2);
    for i in 0..2 {
        let w_i = *path.point(i);
        let base_pose = Pose::new(
            third.base_pose.rotation,
            third.base_pose.translation + (w_i - w3),
        );
        let target = path.active_arclen(i + 1);
        let m_star = active_subset(shape3, target);
        let aligned: Vec<Vec3> = shape3.points[m_star..]
            .iter()
            .map(|p| base_pose.apply_point(p))
            .collect();
        let prefix = densify_prefix(
            &path.waypoints()[..=i],
            target,
            opts.search_prefix_spacing,
        );
        let deviation = chamfer(
            &aligned,
            &prefix,
            opts.chamfer_norm,
            shape3.tail_arclen(m_star),
            target,
            opts.waypoint_weights.as_deref(),
        );
        head.push(SparseEntry {
            config: third.config,
            base_pose,
            m_star,
            deviation,
            tip_rotation: third.tip_rotation,
            library_index: third.library_index,
        });
    }
    head.extend(entries);
    Ok(SparsePlan { entries: head })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_model::{ForwardModel, ModelSpec, PccModel};
    use crate::shape_library::{generate_library, threshold_cluster, Bounds};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn model() -> PccModel {
        PccModel::new(ModelSpec::default()).unwrap()
    }

    fn straight_shape(points: usize, spacing: f64) -> Shape {
        Shape::new(
            Configuration::zeros(),
            (0..points)
                .map(|j| Vec3::new(0.0, 0.0, spacing * j as f64))
                .collect(),
            Rotation::identity(),
        )
    }

    #[test]
    fn active_subset_scans_exhaustively() {
        // 11 points spaced 0.1 apart; target 0.33: tail(7) = 0.30 beats
        // tail(6) = 0.40.
        let shape = straight_shape(11, 0.1);
        assert_eq!(active_subset(&shape, 0.33), 7);
    }

    #[test]
    fn active_subset_tie_prefers_longer_subset() {
        // Binary-exact spacing so the tie is exact in f64: tails are
        // m=6 -> 0.5 and m=7 -> 0.375; target 0.4375 is equidistant.
        let shape = straight_shape(11, 0.125);
        assert_eq!(active_subset(&shape, 0.4375), 6);
    }

    #[test]
    fn active_subset_saturates_at_whole_shape() {
        let shape = straight_shape(11, 0.1);
        assert_eq!(active_subset(&shape, 5.0), 0);
    }

    #[test]
    fn chamfer_identical_sets_is_zero() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0)];
        assert_abs_diff_eq!(shape_deviation(&pts, &pts), 0.0);
    }

    #[test]
    fn chamfer_singletons_by_hand() {
        let a = vec![Vec3::zeros()];
        let b = vec![Vec3::new(1.0, 0.0, 0.0)];
        assert_abs_diff_eq!(shape_deviation(&a, &b), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn chamfer_matches_double_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut sample = |n: usize| -> Vec<Vec3> {
            (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect()
        };
        let shape_pts = sample(61);
        let path_pts = sample(10);

        let mut sum_pw = 0.0;
        for w in &path_pts {
            let mut best = f64::INFINITY;
            for p in &shape_pts {
                best = best.min((w - p).norm());
            }
            sum_pw += best;
        }
        let mut sum_sp = 0.0;
        for p in &shape_pts {
            let mut best = f64::INFINITY;
            for w in &path_pts {
                best = best.min((w - p).norm());
            }
            sum_sp += best;
        }
        let oracle = sum_pw / path_pts.len() as f64 + sum_sp / shape_pts.len() as f64;
        assert_abs_diff_eq!(shape_deviation(&shape_pts, &path_pts), oracle, epsilon = 1e-12);
    }

    fn helix_path(n: usize) -> WaypointPath {
        WaypointPath::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    Vec3::new(
                        0.5 * (1.5 * t).sin(),
                        0.4 * (1.2 * t).cos() - 0.4,
                        1.8 * t,
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn alignment_places_tip_exactly_on_waypoint() {
        let m = model();
        let path = helix_path(8);
        for seed in 0..20u64 {
            let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 1, seed);
            let shape = &lib.shapes[0];
            for upto in 3..=8usize {
                let m_star = active_subset(shape, path.active_arclen(upto));
                let (pose, aligned) = align_base_pose(shape, m_star, &path, upto).unwrap();
                let tip = aligned.last().unwrap();
                assert!(
                    (tip - path.point(upto - 1)).norm() < 1e-9,
                    "tip off waypoint: {:e}",
                    (tip - path.point(upto - 1)).norm()
                );
                // Rigidity: pairwise distances preserved.
                let src = &shape.points[m_star..];
                for (i, j) in [(0usize, src.len() - 1), (1, src.len() / 2)] {
                    let before = (src[i] - src[j]).norm();
                    let after = (aligned[i] - aligned[j]).norm();
                    assert!((before - after).abs() < 1e-9);
                }
                let _ = pose;
            }
        }
    }

    #[test]
    fn alignment_of_shape_already_on_path_is_identity() {
        let m = model();
        let q = Configuration::new([0.6, 0.2, -0.3, 0.4, 0.1, -0.2]);
        let shape = m.shape(&q).unwrap();
        // Use backbone points themselves as waypoints: tip at the last one.
        let path = WaypointPath::new(shape.points.iter().step_by(6).cloned().collect()).unwrap();
        let upto = path.len();
        let m_star = active_subset(&shape, path.active_arclen(upto));
        assert_eq!(m_star, 0);
        let (pose, _) = align_base_pose(&shape, m_star, &path, upto).unwrap();
        assert!((pose.rotation.matrix() - Rotation::identity().matrix()).norm() < 1e-7);
        assert!(pose.translation.norm() < 1e-7);
    }

    #[test]
    fn straight_shape_on_rotated_straight_path_composes_t1_t2() {
        let m = model();
        let shape = m.shape(&Configuration::zeros()).unwrap();
        // Straight path along +x: collinear, so no axial rotation applies.
        let path = WaypointPath::new(
            (0..5)
                .map(|i| Vec3::new(0.5 * i as f64, 0.0, 0.0))
                .collect(),
        )
        .unwrap();
        let upto = 5;
        let m_star = active_subset(&shape, path.active_arclen(upto));
        let (pose, aligned) = align_base_pose(&shape, m_star, &path, upto).unwrap();
        // v2 = +z must map onto v1 = +x, a quarter turn about -y.
        let expected = Rotation::align_vectors(&Vec3::z(), &Vec3::x());
        assert!((pose.rotation.matrix() - expected.matrix()).norm() < 1e-9);
        assert!((aligned.last().unwrap() - path.point(4)).norm() < 1e-9);
    }

    #[test]
    fn t3_axis_keeps_first_and_current_waypoints_fixed() {
        let m = model();
        let path = helix_path(9);
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 6, 77);
        for shape in &lib.shapes {
            let upto = 9;
            let ctx_target = path.active_arclen(upto);
            let m_star = active_subset(shape, ctx_target);
            let (pose, _) = align_base_pose(shape, m_star, &path, upto).unwrap();
            // Rebuild T1+T2 only and compare the residual rotation's axis
            // action on the two anchor waypoints.
            let tip = shape.points[shape.points.len() - 1];
            let translation = path.point(upto - 1) - tip;
            let v2 = (tip - shape.points[m_star]).normalize();
            let v1 = (path.point(upto - 1) - path.point(0)).normalize();
            let r2 = Rotation::align_vectors(&v2, &v1);
            let r3 = pose.rotation * r2.inverse();
            let spin = |w: &Vec3| path.point(upto - 1) + r3.apply(&(w - path.point(upto - 1)));
            assert!((spin(path.point(0)) - path.point(0)).norm() < 1e-9);
            assert!((spin(path.point(upto - 1)) - path.point(upto - 1)).norm() < 1e-9);
            let _ = translation;
        }
    }

    #[test]
    fn search_recovers_planted_shape_within_discretization_error() {
        let m = model();
        let mut lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 50, 5);
        let q = Configuration::new([0.7, -0.1, 0.4, 0.3, -0.2, 0.5]);
        let planted = m.shape(&q).unwrap();
        lib.shapes.push(planted.clone());

        // Path sampled from the planted shape's own backbone. Deviation is
        // floored by waypoint discretization: interior backbone points sit
        // up to half a waypoint spacing from the nearest waypoint, so even
        // the planted shape scores about spacing/4 rather than zero.
        let path =
            WaypointPath::new(planted.points.iter().step_by(6).cloned().collect()).unwrap();
        let upto = path.len();
        let spacing = path.total_arclen() / (upto - 1) as f64;
        let hit = search_waypoint(&lib, None, &path, upto, &PlanOptions::default()).unwrap();
        let planted_dev =
            evaluate_shape(&planted, &path, upto, &PlanOptions::default()).unwrap().2;
        assert!(hit.deviation <= planted_dev + 1e-12);
        assert!(
            hit.library_index == lib.len() - 1 || hit.deviation <= planted_dev,
            "planted shape not recovered"
        );
        assert!(
            planted_dev < spacing / 2.0,
            "planted deviation {planted_dev} above discretization bound"
        );
    }

    #[test]
    fn clustered_search_with_gamma_zero_equals_linear() {
        let m = model();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 80, 15);
        let clustering = threshold_cluster(&lib, 0.0);
        let path = helix_path(7);
        let opts = PlanOptions::default();
        for upto in 3..=7usize {
            let lin = search_waypoint(&lib, None, &path, upto, &opts).unwrap();
            let clu = search_waypoint(&lib, Some(&clustering), &path, upto, &opts).unwrap();
            assert_eq!(lin.library_index, clu.library_index);
            assert_eq!(lin.deviation, clu.deviation);
        }
    }

    #[test]
    fn linear_search_is_optimal_within_library() {
        let m = model();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 40, 23);
        let path = helix_path(6);
        let opts = PlanOptions::default();
        let best = search_waypoint(&lib, None, &path, 6, &opts).unwrap();
        for shape in &lib.shapes {
            let (_, _, dev) = evaluate_shape(shape, &path, 6, &opts).unwrap();
            assert!(dev >= best.deviation - 1e-15);
        }
    }

    #[test]
    fn sparse_plan_boundary_policy_and_tip_exactness() {
        let m = model();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 60, 3);
        let path = helix_path(3);
        let plan = plan_sparse(&lib, None, &path, &PlanOptions::default()).unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(plan.entries[0].config, plan.entries[2].config);
        assert_eq!(plan.entries[1].config, plan.entries[2].config);
        for (i, entry) in plan.entries.iter().enumerate() {
            let shape = m.shape(&entry.config).unwrap();
            let tip = entry.base_pose.apply_point(shape.tip());
            assert!(
                (tip - path.point(i)).norm() < 1e-9,
                "entry {i} tip error {:e}",
                (tip - path.point(i)).norm()
            );
        }
    }

    #[test]
    fn sparse_plan_rejects_short_paths() {
        let m = model();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 5, 3);
        let path = WaypointPath::new(vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)]).unwrap();
        assert!(matches!(
            plan_sparse(&lib, None, &path, &PlanOptions::default()),
            Err(PlanError::TooFewWaypoints { .. })
        ));
    }

    #[test]
    fn sparse_plan_rejects_coarse_discretization() {
        let m = PccModel::new(ModelSpec {
            intervals: 9,
            ..ModelSpec::default()
        })
        .unwrap();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 5, 3);
        let path = helix_path(10);
        assert!(matches!(
            plan_sparse(&lib, None, &path, &PlanOptions::default()),
            Err(PlanError::DiscretizationTooCoarse { .. })
        ));
    }

    #[test]
    fn empty_library_is_an_error() {
        let m = model();
        let lib = ShapeLibrary {
            spec: *m.spec(),
            seed: 0,
            bounds: Bounds::symmetric(1.0),
            shapes: vec![],
        };
        let path = helix_path(4);
        assert!(matches!(
            search_waypoint(&lib, None, &path, 3, &PlanOptions::default()),
            Err(PlanError::EmptyLibrary)
        ));
    }

    #[test]
    fn waypoint_path_rejects_duplicates() {
        let err = WaypointPath::new(vec![Vec3::zeros(), Vec3::zeros()]).unwrap_err();
        assert!(matches!(err, PlanError::DuplicateWaypoint(0, 1)));
    }
}
