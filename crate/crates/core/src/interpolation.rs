//! Radial-symmetry pre-alignment of sparse plans and tip-exact dense
//! interpolation between waypoints.
//!
//! Consecutive sparse configurations may sit in very different bending
//! planes; rotating each about the base axis toward a common reference
//! direction removes most of the orientation discontinuity before joint
//! interpolation. Densification then interpolates the tip pose directly and
//! back-solves the base pose so the tip lands exactly on the interpolated
//! waypoint segment at every step.

use crate::forward_model::{Configuration, ForwardModel, SymmetryDescriptor};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::planner::{PlanError, SparseEntry, SparsePlan, WaypointPath};
use crate::shape_library::{cluster_shapes, ShapeLibrary};
use std::f64::consts::TAU;

/// One step of a dense plan: the joint state, the base pose that realizes
/// the desired tip, and where the step sits (`interval` j, blend `alpha`).
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub config: Configuration,
    pub base_pose: Pose,
    pub desired_tip: Pose,
    pub interval: usize,
    pub alpha: f64,
}

/// `(n - 1) * h + 1` timed configurations covering the whole path.
#[derive(Debug, Clone)]
pub struct DensePlan {
    pub steps: Vec<DenseStep>,
    pub h: usize,
}

impl DensePlan {
    pub fn expected_len(n_waypoints: usize, h: usize) -> usize {
        (n_waypoints - 1) * h + 1
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Optimal alignment angle for one entry: `atan2(-x1 . y_j, x1 . x_j)`
/// maximizes the post-alignment dot product between the entry's base x-axis
/// and the reference direction `x1`.
pub fn alignment_angle(reference_x: &Vec3, base: &Rotation) -> f64 {
    let xj = base.x_axis();
    let yj = base.y_axis();
    (-reference_x.dot(&yj)).atan2(reference_x.dot(&xj))
}

fn apply_radial_rotation(entry: &SparseEntry, theta: f64) -> SparseEntry {
    // Rotating the bending pairs by theta turns the local shape by
    // rot_z(theta); composing the base pose with rot_z(-theta) cancels it,
    // leaving the world-frame shape untouched.
    SparseEntry {
        config: entry.config.rotate_bending_planes(theta),
        base_pose: entry.base_pose * Pose::from_rotation(Rotation::rot_z(-theta)),
        m_star: entry.m_star,
        deviation: entry.deviation,
        tip_rotation: entry.tip_rotation * Rotation::rot_z(-theta),
        library_index: entry.library_index,
    }
}

/// Rotates every sparse entry about its base axis toward the first entry's
/// base x-axis. Continuous symmetry applies the optimal angle directly;
/// discrete symmetry snaps it to the nearest `360/k` degree increment;
/// data-driven symmetry substitutes the most favorably oriented member of
/// the entry's tip-aligned similarity cluster. World-frame shapes are
/// preserved (exactly for continuous/discrete, within the clustering
/// threshold for data-driven) and waypoint tips stay exact in all modes.
pub fn prealign_radial(
    plan: &SparsePlan,
    sym: &SymmetryDescriptor,
    lib: &ShapeLibrary,
) -> SparsePlan {
    if plan.is_empty() {
        return plan.clone();
    }
    let reference_x = plan.entries[0].base_pose.rotation.x_axis();
    let entries = match sym {
        SymmetryDescriptor::Continuous => plan
            .entries
            .iter()
            .map(|e| {
                let theta = alignment_angle(&reference_x, &e.base_pose.rotation);
                apply_radial_rotation(e, theta)
            })
            .collect(),
        SymmetryDescriptor::Discrete { folds } => {
            let step = TAU / (*folds).max(1) as f64;
            plan.entries
                .iter()
                .map(|e| {
                    let theta = alignment_angle(&reference_x, &e.base_pose.rotation);
                    let snapped = (theta / step).round() * step;
                    apply_radial_rotation(e, snapped)
                })
                .collect()
        }
        SymmetryDescriptor::DataDriven { gamma } => {
            prealign_data_driven(plan, lib, *gamma, &reference_x)
        }
    };
    SparsePlan { entries }
}

/// Azimuth of a shape's tip about the base z-axis.
fn tip_azimuth(tip: &Vec3) -> f64 {
    if tip.x.hypot(tip.y) < 1e-12 {
        0.0
    } else {
        tip.y.atan2(tip.x)
    }
}

fn prealign_data_driven(
    plan: &SparsePlan,
    lib: &ShapeLibrary,
    gamma: f64,
    reference_x: &Vec3,
) -> Vec<SparseEntry> {
    // Cluster shapes after rotating each about the base axis so its tip
    // lies in the x-z half-plane (x >= 0); members of a cluster are treated
    // as radially symmetric variants of one another.
    let azimuths: Vec<f64> = lib.shapes.iter().map(|s| tip_azimuth(s.tip())).collect();
    let aligned: Vec<_> = lib
        .shapes
        .iter()
        .zip(azimuths.iter())
        .map(|(s, a)| {
            let rz = Rotation::rot_z(-a);
            crate::forward_model::Shape::new(
                s.config,
                s.points.iter().map(|p| rz.apply(p)).collect(),
                rz * s.tip_rotation,
            )
        })
        .collect();
    let clustering = cluster_shapes(&aligned, gamma);
    let mut cluster_of = vec![0usize; lib.len()];
    for (ci, cluster) in clustering.clusters.iter().enumerate() {
        for &m in &cluster.members {
            cluster_of[m] = ci;
        }
    }

    plan.entries
        .iter()
        .map(|entry| {
            let Some(idx) = entry.library_index else {
                return entry.clone();
            };
            let members = &clustering.clusters[cluster_of[idx]].members;
            let a_orig = azimuths[idx];
            // Pick the member whose substituted base orientation points
            // closest to the reference direction.
            let mut best = (idx, f64::NEG_INFINITY);
            for &c in members {
                let delta = a_orig - azimuths[c];
                let base_rot = entry.base_pose.rotation * Rotation::rot_z(delta);
                let score = reference_x.dot(&base_rot.x_axis());
                if score > best.1 {
                    best = (c, score);
                }
            }
            let (chosen, _) = best;
            if chosen == idx {
                return entry.clone();
            }
            let shape = &lib.shapes[chosen];
            let rotation = entry.base_pose.rotation * Rotation::rot_z(a_orig - azimuths[chosen]);
            // Keep the waypoint tip exact: shift the base so the substituted
            // shape's tip lands where the original one did.
            let entry_tip = entry.base_pose.apply_point(lib.shapes[idx].tip());
            let provisional = Pose::new(rotation, entry.base_pose.translation);
            let translation =
                entry.base_pose.translation + (entry_tip - provisional.apply_point(shape.tip()));
            let base_pose = Pose::new(rotation, translation);
            SparseEntry {
                config: shape.config,
                base_pose,
                m_star: entry.m_star,
                deviation: entry.deviation,
                tip_rotation: base_pose.rotation * shape.tip_rotation,
                library_index: Some(chosen),
            }
        })
        .collect()
}

/// Densifies a sparse plan with `h` steps per waypoint interval. At blend
/// `alpha = k/h` the desired tip position interpolates the waypoints
/// linearly and the desired tip orientation slerps the sparse tip
/// rotations; the joint state interpolates linearly and the base pose is
/// `desired_tip * tip_pose(config)^-1`, which places the tip exactly.
/// Interval endpoints are deduplicated, so the plan has `(n-1)h + 1` steps
/// built from exactly `(n-1)h` forward-model evaluations.
pub fn interpolate(
    plan: &SparsePlan,
    path: &WaypointPath,
    h: usize,
    model: &impl ForwardModel,
) -> Result<DensePlan, PlanError> {
    if h < 1 {
        return Err(PlanError::InvalidStepCount);
    }
    let n = plan.len();
    assert_eq!(n, path.len(), "plan and path lengths must agree");

    let mut steps = Vec::with_capacity(DensePlan::expected_len(n, h));
    let first = &plan.entries[0];
    steps.push(DenseStep {
        config: first.config,
        base_pose: first.base_pose,
        desired_tip: Pose::new(first.tip_rotation, *path.point(0)),
        interval: 0,
        alpha: 0.0,
    });

    for j in 0..n - 1 {
        let a = &plan.entries[j];
        let b = &plan.entries[j + 1];
        let w_a = path.point(j);
        let w_b = path.point(j + 1);
        for k in 1..=h {
            let alpha = k as f64 / h as f64;
            let config = Configuration::lerp(&a.config, &b.config, alpha);
            let tip_local = model.tip_pose(&config)?;
            let desired_tip = Pose::new(
                a.tip_rotation.slerp(&b.tip_rotation, alpha),
                (1.0 - alpha) * w_a + alpha * w_b,
            );
            let base_pose = desired_tip * tip_local.inverse();
            steps.push(DenseStep {
                config,
                base_pose,
                desired_tip,
                interval: j,
                alpha,
            });
        }
    }
    Ok(DensePlan { steps, h })
}

/// Tip error of the blended motion between two dense steps at blend
/// `beta`: joint state and base translation interpolate linearly, base
/// rotation slerps, and the error is measured against the straight tip
/// segment connecting the two steps.
pub fn tip_blend_error(
    a: &DenseStep,
    b: &DenseStep,
    beta: f64,
    model: &impl ForwardModel,
) -> Result<f64, PlanError> {
    let config = Configuration::lerp(&a.config, &b.config, beta);
    let base = Pose::new(
        a.base_pose.rotation.slerp(&b.base_pose.rotation, beta),
        (1.0 - beta) * a.base_pose.translation + beta * b.base_pose.translation,
    );
    let tip = base.apply_point(&model.tip_pose(&config)?.translation);
    let ftl =
        (1.0 - beta) * a.desired_tip.translation + beta * b.desired_tip.translation;
    Ok((tip - ftl).norm())
}

/// Maximum blended tip error within each consecutive pair of dense steps,
/// probed at `beta_samples` interior blend values. Feeds the interpolation
/// convergence study.
pub fn inter_step_tip_error(
    plan: &DensePlan,
    model: &impl ForwardModel,
    beta_samples: usize,
) -> Result<Vec<f64>, PlanError> {
    assert!(beta_samples >= 3, "need at least 3 interior samples");
    let mut maxima = Vec::with_capacity(plan.steps.len().saturating_sub(1));
    for pair in plan.steps.windows(2) {
        let mut worst = 0.0f64;
        for i in 1..=beta_samples {
            let beta = i as f64 / (beta_samples + 1) as f64;
            worst = worst.max(tip_blend_error(&pair[0], &pair[1], beta, model)?);
        }
        maxima.push(worst);
    }
    Ok(maxima)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_model::{ModelError, ModelSpec, PccModel, Shape};
    use crate::planner::{plan_sparse, PlanOptions};
    use crate::shape_library::{generate_library, Bounds};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn model() -> PccModel {
        PccModel::new(ModelSpec::default()).unwrap()
    }

    fn test_path(n: usize) -> WaypointPath {
        WaypointPath::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    Vec3::new(0.6 * (1.3 * t).sin(), 0.5 * t * t, 2.0 * t)
                })
                .collect(),
        )
        .unwrap()
    }

    fn test_plan(n: usize) -> (PccModel, ShapeLibrary, WaypointPath, SparsePlan) {
        let m = model();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 300, 17);
        let path = test_path(n);
        let plan = plan_sparse(&lib, None, &path, &PlanOptions::default()).unwrap();
        (m, lib, path, plan)
    }

    #[test]
    fn alignment_angle_matches_direct_substitution() {
        // x_j = (0,1,0), y_j = (-1,0,0), x1 = (1,0,0) -> atan2(1, 0) = pi/2.
        let base = Rotation::rot_z(FRAC_PI_2);
        let theta = alignment_angle(&Vec3::x(), &base);
        assert_abs_diff_eq!(theta, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn already_aligned_entry_is_unchanged() {
        let (_, lib, _, plan) = test_plan(5);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Continuous, &lib);
        let e0 = &aligned.entries[0];
        let theta0 = alignment_angle(
            &plan.entries[0].base_pose.rotation.x_axis(),
            &plan.entries[0].base_pose.rotation,
        );
        // The base axes are orthonormal only to machine precision, so the
        // angle is zero up to rounding rather than bitwise.
        assert_abs_diff_eq!(theta0, 0.0, epsilon = 1e-12);
        for (a, b) in e0.config.0.iter().zip(plan.entries[0].config.0.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn discrete_snap_picks_nearest_increment() {
        // 50 degrees against 3-fold symmetry snaps to 0, not 120.
        let theta = 50.0f64.to_radians();
        let step = TAU / 3.0;
        let snapped = (theta / step).round() * step;
        assert_abs_diff_eq!(snapped, 0.0, epsilon = 1e-12);
        // and 70 degrees snaps to 120.
        let theta = 70.0f64.to_radians();
        let snapped = (theta / step).round() * step;
        assert_abs_diff_eq!(snapped, step, epsilon = 1e-12);
    }

    #[test]
    fn continuous_prealignment_preserves_world_shape() {
        let (m, lib, path, plan) = test_plan(7);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Continuous, &lib);
        for (before, after) in plan.entries.iter().zip(aligned.entries.iter()) {
            let shape_before = m.shape(&before.config).unwrap();
            let shape_after = m.shape(&after.config).unwrap();
            for (p, q) in shape_before.points.iter().zip(shape_after.points.iter()) {
                let world_before = before.base_pose.apply_point(p);
                let world_after = after.base_pose.apply_point(q);
                assert!(
                    (world_before - world_after).norm() < 1e-9,
                    "world shape moved by {:e}",
                    (world_before - world_after).norm()
                );
            }
        }
        // Tips stay exactly on their waypoints.
        for (i, e) in aligned.entries.iter().enumerate() {
            let tip = e.base_pose.apply_point(m.shape(&e.config).unwrap().tip());
            assert!((tip - path.point(i)).norm() < 1e-9);
        }
    }

    #[test]
    fn prealignment_angle_is_optimal_on_a_grid() {
        let (_, lib, _, plan) = test_plan(6);
        let reference = plan.entries[0].base_pose.rotation.x_axis();
        for entry in &plan.entries {
            let theta = alignment_angle(&reference, &entry.base_pose.rotation);
            let post = |t: f64| {
                let r = entry.base_pose.rotation * Rotation::rot_z(-t);
                reference.dot(&r.x_axis())
            };
            let chosen = post(theta);
            let mut grid_best = f64::NEG_INFINITY;
            let mut t = -std::f64::consts::PI;
            while t < std::f64::consts::PI {
                grid_best = grid_best.max(post(t));
                t += 1e-3;
            }
            assert!(chosen >= grid_best - 1e-6, "theta not optimal");
            // Alignment never decreases the dot product relative to no turn.
            assert!(chosen + 1e-12 >= post(0.0));
        }
        let _ = lib;
    }

    #[test]
    fn dense_endpoints_reproduce_sparse_tips() {
        let (m, lib, path, plan) = test_plan(6);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Continuous, &lib);
        let dense = interpolate(&aligned, &path, 10, &m).unwrap();
        assert_eq!(dense.len(), DensePlan::expected_len(6, 10));
        for (i, w) in path.waypoints().iter().enumerate() {
            let step = &dense.steps[i * 10];
            assert!((step.desired_tip.translation - w).norm() < 1e-12);
            let tip = step
                .base_pose
                .apply_point(&m.tip_pose(&step.config).unwrap().translation);
            assert!((tip - w).norm() < 1e-9);
        }
    }

    #[test]
    fn every_step_tip_is_exact() {
        let (m, lib, path, plan) = test_plan(5);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Continuous, &lib);
        let dense = interpolate(&aligned, &path, 7, &m).unwrap();
        for step in &dense.steps {
            let tip = step
                .base_pose
                .apply_point(&m.tip_pose(&step.config).unwrap().translation);
            let expected = (1.0 - step.alpha) * path.point(step.interval)
                + step.alpha * path.point(step.interval + 1);
            assert!(
                (tip - expected).norm() < 1e-9,
                "step tip error {:e}",
                (tip - expected).norm()
            );
            assert!((step.desired_tip.translation - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn equal_consecutive_configs_move_base_linearly() {
        let m = model();
        let q = Configuration::new([0.4, 0.2, -0.3, 0.1, 0.2, 0.0]);
        let shape = m.shape(&q).unwrap();
        let tip_rot = shape.tip_rotation;
        let entries: Vec<SparseEntry> = (0..3)
            .map(|i| SparseEntry {
                config: q,
                base_pose: Pose::from_translation(Vec3::new(0.3 * i as f64, 0.0, 0.0)),
                m_star: 0,
                deviation: 0.0,
                tip_rotation: tip_rot,
                library_index: None,
            })
            .collect();
        let tip0 = *shape.tip();
        let path = WaypointPath::new(
            (0..3)
                .map(|i| tip0 + Vec3::new(0.3 * i as f64, 0.0, 0.0))
                .collect(),
        )
        .unwrap();
        let plan = SparsePlan { entries };
        let dense = interpolate(&plan, &path, 4, &m).unwrap();
        for step in &dense.steps {
            assert_eq!(step.config, q);
        }
        // Base translation is linear in alpha within each interval.
        for pair in dense.steps.windows(2) {
            let d = pair[1].base_pose.translation - pair[0].base_pose.translation;
            assert!((d - Vec3::new(0.3 / 4.0, 0.0, 0.0)).norm() < 1e-9);
        }
    }

    struct CountingModel<'a> {
        inner: &'a PccModel,
        calls: AtomicUsize,
    }

    impl ForwardModel for CountingModel<'_> {
        fn shape(&self, q: &Configuration) -> Result<Shape, ModelError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.shape(q)
        }

        fn symmetry(&self) -> SymmetryDescriptor {
            self.inner.symmetry()
        }

        fn nominal_length(&self) -> f64 {
            self.inner.nominal_length()
        }
    }

    #[test]
    fn interpolation_budget_is_exactly_intervals_times_h() {
        let (m, lib, path, plan) = test_plan(6);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Continuous, &lib);
        let counting = CountingModel {
            inner: &m,
            calls: AtomicUsize::new(0),
        };
        let h = 9;
        let _dense = interpolate(&aligned, &path, h, &counting).unwrap();
        assert_eq!(counting.calls.load(Ordering::Relaxed), (6 - 1) * h);
    }

    #[test]
    fn blend_error_vanishes_at_endpoints() {
        let (m, lib, path, plan) = test_plan(5);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Continuous, &lib);
        let dense = interpolate(&aligned, &path, 4, &m).unwrap();
        for pair in dense.steps.windows(2) {
            assert!(tip_blend_error(&pair[0], &pair[1], 0.0, &m).unwrap() < 1e-9);
            assert!(tip_blend_error(&pair[0], &pair[1], 1.0, &m).unwrap() < 1e-9);
        }
    }

    #[test]
    fn straight_constant_plan_has_zero_blend_error() {
        let m = model();
        let q = Configuration::zeros();
        let shape = m.shape(&q).unwrap();
        let tip0 = *shape.tip();
        let path = WaypointPath::new(
            (0..4)
                .map(|i| tip0 + Vec3::new(0.0, 0.0, 0.2 * i as f64))
                .collect(),
        )
        .unwrap();
        let entries: Vec<SparseEntry> = (0..4)
            .map(|i| SparseEntry {
                config: q,
                base_pose: Pose::from_translation(Vec3::new(0.0, 0.0, 0.2 * i as f64)),
                m_star: 0,
                deviation: 0.0,
                tip_rotation: shape.tip_rotation,
                library_index: None,
            })
            .collect();
        let dense = interpolate(&SparsePlan { entries }, &path, 5, &m).unwrap();
        let maxima = inter_step_tip_error(&dense, &m, 5).unwrap();
        for e in maxima {
            assert!(e < 1e-9, "straight-line blend error {e}");
        }
    }

    #[test]
    fn discrete_prealignment_preserves_world_shape() {
        let (m, lib, _, plan) = test_plan(6);
        let aligned = prealign_radial(&plan, &SymmetryDescriptor::Discrete { folds: 3 }, &lib);
        for (before, after) in plan.entries.iter().zip(aligned.entries.iter()) {
            let shape_before = m.shape(&before.config).unwrap();
            let shape_after = m.shape(&after.config).unwrap();
            let mut worst = 0.0f64;
            for (p, q) in shape_before.points.iter().zip(shape_after.points.iter()) {
                let d = (before.base_pose.apply_point(p) - after.base_pose.apply_point(q)).norm();
                worst = worst.max(d);
            }
            assert!(worst < 1e-9);
        }
    }

    #[test]
    fn data_driven_prealignment_keeps_tips_exact() {
        let m = model();
        let lib = generate_library(&m, &Bounds::symmetric(FRAC_PI_2), 150, 29);
        let path = test_path(5);
        let plan = plan_sparse(&lib, None, &path, &PlanOptions::default()).unwrap();
        let aligned = prealign_radial(
            &plan,
            &SymmetryDescriptor::DataDriven { gamma: 3.0 },
            &lib,
        );
        for (i, e) in aligned.entries.iter().enumerate() {
            let tip = e.base_pose.apply_point(m.shape(&e.config).unwrap().tip());
            assert!(
                (tip - path.point(i)).norm() < 1e-9,
                "tip moved by {:e}",
                (tip - path.point(i)).norm()
            );
        }
    }
}
