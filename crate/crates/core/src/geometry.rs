//! SE(3) primitives: rotations, rigid poses, and the closed-form rotational
//! constructions used by base-pose alignment and interpolation.
//!
//! Rotations are stored as 3x3 matrices; quaternions appear only transiently
//! inside [`Rotation::slerp`]. This is not a general Lie-group library — it
//! covers exactly what the planner needs.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use std::f64::consts::PI;
use std::ops::Mul;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance for unit-norm and orthonormality checks.
pub const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation axis must be unit length, got norm {0}")]
    NonUnitAxis(f64),
    #[error("projection onto the plane normal to the axis is degenerate (norm {norm:.3e} <= eps {eps:.3e})")]
    DegenerateProjection { norm: f64, eps: f64 },
}

/// A 3x3 orthonormal matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix already known to be orthonormal with determinant +1.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Rodrigues formula: `R = I + sin(angle) [axis]x + (1 - cos(angle)) [axis]x^2`.
    /// The axis must be unit length.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, GeometryError> {
        let norm = axis.norm();
        if (norm - 1.0).abs() > ORTHO_TOL {
            return Err(GeometryError::NonUnitAxis(norm));
        }
        Ok(Self::rodrigues(axis, angle))
    }

    fn rodrigues(axis: &Vec3, angle: f64) -> Self {
        let k = skew(axis);
        Rotation(Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::rodrigues(&Vec3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::rodrigues(&Vec3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::rodrigues(&Vec3::z(), angle)
    }

    /// The shortest rotation taking unit vector `from` onto unit vector `to`.
    ///
    /// Degeneracies: antipodal inputs rotate pi about a fixed perpendicular
    /// axis (the cross of `from` with the standard basis vector least
    /// parallel to it); near-parallel inputs return the identity.
    pub fn align_vectors(from: &Vec3, to: &Vec3) -> Self {
        let dot = from.dot(to);
        if dot <= -1.0 + 1e-9 {
            let e = least_parallel_basis(from);
            let axis = from.cross(&e).normalize();
            return Self::rodrigues(&axis, PI);
        }
        let cross = from.cross(to);
        let n = cross.norm();
        if n < 1e-12 {
            return Self::identity();
        }
        Self::rodrigues(&(cross / n), n.atan2(dot))
    }

    /// Spherical linear interpolation along the shortest geodesic, with the
    /// usual quaternion dot-product sign correction. Endpoints are returned
    /// exactly.
    pub fn slerp(&self, other: &Rotation, alpha: f64) -> Rotation {
        if alpha <= 0.0 {
            return *self;
        }
        if alpha >= 1.0 {
            return *other;
        }
        let qa = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            self.0,
        ));
        let qb = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            other.0,
        ));
        let a = qa.into_inner().coords;
        let mut b = qb.into_inner().coords;
        let mut dot = a.dot(&b);
        if dot < 0.0 {
            b = -b;
            dot = -dot;
        }
        let q = if dot > 1.0 - 1e-12 {
            (a * (1.0 - alpha) + b * alpha).normalize()
        } else {
            let theta = dot.clamp(-1.0, 1.0).acos();
            let sin_theta = theta.sin();
            (a * ((1.0 - alpha) * theta).sin() + b * (alpha * theta).sin()) / sin_theta
        };
        let uq = UnitQuaternion::new_normalize(Quaternion::from_vector(q));
        Rotation(uq.to_rotation_matrix().into_inner())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn x_axis(&self) -> Vec3 {
        self.0.column(0).into()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.0.column(1).into()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.0.column(2).into()
    }

    /// Geodesic angle to another rotation, in [0, pi].
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let rel = self.0.transpose() * other.0;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Rigid transform in SE(3): `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Pose::new(rotation, Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Pose::new(Rotation::identity(), translation)
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn apply_points(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.apply_point(p)).collect()
    }

    pub fn inverse(&self) -> Pose {
        let rinv = self.rotation.inverse();
        Pose {
            rotation: rinv,
            translation: -rinv.apply(&self.translation),
        }
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation.apply(&rhs.translation) + self.translation,
        }
    }
}

/// Signed angle that rotates the projection of `u_a` (onto the plane normal
/// to `axis`) onto the projection of `u_b`, measured about the unit `axis`.
///
/// Fails with [`GeometryError::DegenerateProjection`] when either projection
/// has norm at most `eps_proj`.
pub fn signed_angle_about_axis(
    u_a: &Vec3,
    u_b: &Vec3,
    axis: &Vec3,
    eps_proj: f64,
) -> Result<f64, GeometryError> {
    let pa = u_a - axis * u_a.dot(axis);
    let pb = u_b - axis * u_b.dot(axis);
    let na = pa.norm();
    let nb = pb.norm();
    if na <= eps_proj {
        return Err(GeometryError::DegenerateProjection { norm: na, eps: eps_proj });
    }
    if nb <= eps_proj {
        return Err(GeometryError::DegenerateProjection { norm: nb, eps: eps_proj });
    }
    Ok(pa.cross(&pb).dot(axis).atan2(pa.dot(&pb)))
}

/// Resamples a polyline to `n` points equally spaced in arc length,
/// keeping the endpoints exact.
pub fn resample_polyline(points: &[Vec3], n: usize) -> Vec<Vec3> {
    assert!(points.len() >= 2 && n >= 2);
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    out.push(points[0]);
    let mut seg = 0usize;
    for i in 1..n - 1 {
        let target = total * i as f64 / (n - 1) as f64;
        while seg + 2 < points.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = (cum[seg + 1] - cum[seg]).max(1e-300);
        let t = (target - cum[seg]) / span;
        out.push(points[seg] * (1.0 - t) + points[seg + 1] * t);
    }
    out.push(*points.last().unwrap());
    out
}

fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Standard basis vector with the smallest |component| along `v`.
fn least_parallel_basis(v: &Vec3) -> Vec3 {
    let ax = v.x.abs();
    let ay = v.y.abs();
    let az = v.z.abs();
    if ax <= ay && ax <= az {
        Vec3::x()
    } else if ay <= az {
        Vec3::y()
    } else {
        Vec3::z()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn assert_vec_eq(a: &Vec3, b: &Vec3, eps: f64) {
        assert!(
            (a - b).norm() < eps,
            "vectors differ: {a:?} vs {b:?} (|d| = {})",
            (a - b).norm()
        );
    }

    fn assert_rot_eq(a: &Rotation, b: &Rotation, eps: f64) {
        let d = (a.matrix() - b.matrix()).norm();
        assert!(d < eps, "rotations differ by {d}: {a:?} vs {b:?}");
    }

    #[test]
    fn axis_angle_quarter_turn_about_z() {
        let r = Rotation::from_axis_angle(&Vec3::z(), FRAC_PI_2).unwrap();
        assert_vec_eq(&r.apply(&Vec3::x()), &Vec3::y(), 1e-12);
    }

    #[test]
    fn axis_angle_zero_is_identity() {
        let r = Rotation::from_axis_angle(&Vec3::x(), 0.0).unwrap();
        assert_rot_eq(&r, &Rotation::identity(), 1e-15);
    }

    #[test]
    fn axis_angle_rejects_non_unit_axis() {
        let err = Rotation::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.3).unwrap_err();
        assert!(matches!(err, GeometryError::NonUnitAxis(_)));
    }

    #[test]
    fn axis_angle_keeps_axis_fixed() {
        let axis = Vec3::new(0.3, -0.4, 0.5).normalize();
        let r = Rotation::from_axis_angle(&axis, 1.234).unwrap();
        assert_vec_eq(&r.apply(&axis), &axis, 1e-12);
    }

    // Independent Rodrigues oracle: explicit term-by-term matrix assembly,
    // checked entry-wise. The diagonal axis by 2*pi/3 must permute the
    // coordinate axes cyclically.
    #[test]
    fn axis_angle_cyclic_permutation_matches_rodrigues_oracle() {
        let s = 1.0 / 3.0_f64.sqrt();
        let axis = Vec3::new(s, s, s);
        let angle = 2.0 * PI / 3.0;
        let r = Rotation::from_axis_angle(&axis, angle).unwrap();
        assert_vec_eq(&r.apply(&Vec3::x()), &Vec3::y(), 1e-12);
        assert_vec_eq(&r.apply(&Vec3::y()), &Vec3::z(), 1e-12);
        assert_vec_eq(&r.apply(&Vec3::z()), &Vec3::x(), 1e-12);

        let (sin, cos) = angle.sin_cos();
        let mut oracle = [[0.0f64; 3]; 3];
        let a = [axis.x, axis.y, axis.z];
        for (i, row) in oracle.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let eye = if i == j { 1.0 } else { 0.0 };
                // skew(axis)[i][j] written out via the Levi-Civita symbol
                let k = [
                    [0.0, -a[2], a[1]],
                    [a[2], 0.0, -a[0]],
                    [-a[1], a[0], 0.0],
                ];
                let k2 = (0..3).map(|m| k[i][m] * k[m][j]).sum::<f64>();
                *entry = eye + sin * k[i][j] + (1.0 - cos) * k2;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(r.matrix()[(i, j)], oracle[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn align_vectors_quarter_turn() {
        let from = Vec3::x();
        let to = Vec3::z();
        let r = Rotation::align_vectors(&from, &to);
        assert_vec_eq(&r.apply(&from), &to, 1e-12);
        // axis is (1,0,0) x (0,0,1) = (0,-1,0), angle pi/2
        let expected = Rotation::from_axis_angle(&Vec3::new(0.0, -1.0, 0.0), FRAC_PI_2).unwrap();
        assert_rot_eq(&r, &expected, 1e-12);
    }

    #[test]
    fn align_vectors_identical_is_identity() {
        let v = Vec3::new(0.6, 0.0, 0.8);
        assert_rot_eq(&Rotation::align_vectors(&v, &v), &Rotation::identity(), 1e-15);
    }

    #[test]
    fn align_vectors_antipodal_still_maps() {
        let from = Vec3::x();
        let to = -Vec3::x();
        let r = Rotation::align_vectors(&from, &to);
        assert_vec_eq(&r.apply(&from), &to, 1e-9);
        // determinant must stay +1
        assert_abs_diff_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn signed_angle_planar_quarter_turn() {
        let phi =
            signed_angle_about_axis(&Vec3::x(), &Vec3::y(), &Vec3::z(), 1e-12).unwrap();
        assert_abs_diff_eq!(phi, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn signed_angle_identical_inputs_is_zero() {
        let u = Vec3::new(0.3, 0.2, 0.9);
        let phi = signed_angle_about_axis(&u, &u, &Vec3::z(), 1e-12).unwrap();
        assert_abs_diff_eq!(phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn signed_angle_discards_axis_component() {
        let phi = signed_angle_about_axis(
            &Vec3::new(1.0, 0.0, 1.0),
            &Vec3::new(0.0, 1.0, 1.0),
            &Vec3::z(),
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(phi, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn signed_angle_degenerate_projection_errors() {
        let err = signed_angle_about_axis(&Vec3::z(), &Vec3::x(), &Vec3::z(), 1e-9).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateProjection { .. }));
    }

    #[test]
    fn slerp_endpoints_are_exact() {
        let a = Rotation::rot_x(0.3);
        let b = Rotation::rot_y(0.7);
        assert_eq!(a.slerp(&b, 0.0), a);
        assert_eq!(a.slerp(&b, 1.0), b);
    }

    #[test]
    fn slerp_single_axis_midpoint() {
        let a = Rotation::identity();
        let b = Rotation::rot_z(FRAC_PI_2);
        let mid = a.slerp(&b, 0.5);
        assert_rot_eq(&mid, &Rotation::rot_z(FRAC_PI_4), 1e-12);
    }

    // Independent slerp oracle: walk the geodesic directly via the relative
    // rotation's axis-angle form, R_a * exp(alpha * log(R_a^T R_b)).
    #[test]
    fn slerp_matches_geodesic_oracle() {
        let a = Rotation::rot_x(0.3);
        let b = Rotation::rot_y(0.7);
        let alpha = 0.25;
        let got = a.slerp(&b, alpha);

        let rel = a.inverse() * b;
        let angle = Rotation::identity().angle_to(&rel);
        let m = rel.matrix();
        let axis = Vec3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        )
        .normalize();
        let oracle = a * Rotation::from_axis_angle(&axis, alpha * angle).unwrap();
        assert_rot_eq(&got, &oracle, 1e-9);
    }

    #[test]
    fn pose_identity_leaves_points() {
        let pts = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.0, 4.0)];
        assert_eq!(Pose::identity().apply_points(&pts), pts);
    }

    #[test]
    fn pose_pure_translation() {
        let p = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        assert_vec_eq(&p.apply_point(&Vec3::zeros()), &Vec3::new(1.0, 2.0, 3.0), 1e-15);
    }

    #[test]
    fn pose_rotation_then_translation_composed_by_hand() {
        let p = Pose::new(Rotation::rot_z(FRAC_PI_2), Vec3::new(1.0, 0.0, 0.0));
        assert_vec_eq(&p.apply_point(&Vec3::x()), &Vec3::new(1.0, 1.0, 0.0), 1e-12);
    }

    #[test]
    fn pose_inverse_composes_to_identity() {
        let p = Pose::new(Rotation::rot_y(0.8), Vec3::new(0.1, -2.0, 0.7));
        let id = p * p.inverse();
        assert_rot_eq(&id.rotation, &Rotation::identity(), 1e-12);
        assert_vec_eq(&id.translation, &Vec3::zeros(), 1e-12);
    }

    #[test]
    fn pose_composition_is_associative() {
        let a = Pose::new(Rotation::rot_x(0.2), Vec3::new(1.0, 0.0, 0.0));
        let b = Pose::new(Rotation::rot_y(-0.4), Vec3::new(0.0, 2.0, 0.0));
        let c = Pose::new(Rotation::rot_z(1.1), Vec3::new(0.0, 0.0, -1.0));
        let lhs = (a * b) * c;
        let rhs = a * (b * c);
        assert_rot_eq(&lhs.rotation, &rhs.rotation, 1e-12);
        assert_vec_eq(&lhs.translation, &rhs.translation, 1e-12);
    }
}
