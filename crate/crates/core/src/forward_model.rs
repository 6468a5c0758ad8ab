//! Forward-model interface and the shipped three-segment piece-wise
//! constant curvature (PCC) model.
//!
//! A configuration holds two bending components per segment, `(kx, ky)`,
//! which avoids the bending-plane singularity at zero curvature and makes
//! uniform sampling well defined. Each segment is a circular arc of
//! curvature `|(kx, ky)|` in the plane at angle `atan2(ky, kx)`, expressed
//! in the frame left by the previous segment, so segments join with tangent
//! continuity.

use crate::geometry::{Pose, Rotation, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Number of bending components in the shipped configuration space.
pub const CONFIG_DIM: usize = 6;
/// Segments in the shipped PCC model.
pub const SEGMENTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("segment {segment} curvature magnitude {magnitude:.6} exceeds limit {limit:.6}")]
    OutOfBounds {
        segment: usize,
        magnitude: f64,
        limit: f64,
    },
    #[error("configuration contains non-finite components")]
    NonFinite,
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
}

/// Joint state: per segment i, bending components `(kx_i, ky_i)` in
/// rad per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration(pub [f64; CONFIG_DIM]);

impl Configuration {
    pub fn zeros() -> Self {
        Configuration([0.0; CONFIG_DIM])
    }

    pub fn new(q: [f64; CONFIG_DIM]) -> Self {
        Configuration(q)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Bending pair of segment `i`.
    pub fn segment(&self, i: usize) -> (f64, f64) {
        (self.0[2 * i], self.0[2 * i + 1])
    }

    /// Rotates every segment's bending pair by `angle` in its own plane.
    /// Under radial symmetry this rotates the whole shape about the base
    /// z-axis by the same angle.
    pub fn rotate_bending_planes(&self, angle: f64) -> Configuration {
        let (sin, cos) = angle.sin_cos();
        let mut q = [0.0; CONFIG_DIM];
        for i in 0..SEGMENTS {
            let (kx, ky) = self.segment(i);
            q[2 * i] = cos * kx - sin * ky;
            q[2 * i + 1] = sin * kx + cos * ky;
        }
        Configuration(q)
    }

    pub fn lerp(a: &Configuration, b: &Configuration, alpha: f64) -> Configuration {
        let mut q = [0.0; CONFIG_DIM];
        for i in 0..CONFIG_DIM {
            q[i] = (1.0 - alpha) * a.0[i] + alpha * b.0[i];
        }
        Configuration(q)
    }

    /// Euclidean distance in configuration space.
    pub fn distance(&self, other: &Configuration) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Chebyshev (infinity-norm) distance in configuration space.
    pub fn distance_linf(&self, other: &Configuration) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Kinds of radial symmetry a continuum robot may exhibit about its base
/// axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetryDescriptor {
    /// Fully symmetric actuation: any rotation of the bending planes
    /// produces the same shape in a rotated frame.
    Continuous,
    /// k-fold symmetry, e.g. a robot with k tendons per segment.
    Discrete { folds: u32 },
    /// Symmetry identified empirically by clustering tip-aligned shapes
    /// with threshold `gamma`.
    DataDriven { gamma: f64 },
}

/// Static description of the shipped model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub segment_count: usize,
    pub segment_length: f64,
    /// Number of backbone intervals; the discretized shape has
    /// `intervals + 1` points.
    pub intervals: usize,
    /// Per-component sampling bound: components are drawn from
    /// `[-kappa_max, kappa_max]` by default.
    pub kappa_max: f64,
    pub symmetry: SymmetryDescriptor,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            segment_count: SEGMENTS,
            segment_length: 1.0,
            intervals: 60,
            kappa_max: FRAC_PI_2,
            symmetry: SymmetryDescriptor::Continuous,
        }
    }
}

impl ModelSpec {
    pub fn nominal_length(&self) -> f64 {
        self.segment_count as f64 * self.segment_length
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.segment_count != SEGMENTS {
            return Err(ModelError::InvalidSpec(format!(
                "expected {SEGMENTS} segments, got {}",
                self.segment_count
            )));
        }
        if self.segment_length <= 0.0 {
            return Err(ModelError::InvalidSpec("segment_length must be positive".into()));
        }
        if self.intervals < 3 * self.segment_count {
            return Err(ModelError::InvalidSpec(format!(
                "intervals ({}) must be at least 3 x segment_count ({})",
                self.intervals,
                3 * self.segment_count
            )));
        }
        if !(self.kappa_max > 0.0) {
            return Err(ModelError::InvalidSpec("kappa_max must be positive".into()));
        }
        Ok(())
    }
}

/// A discretized backbone in the robot base frame (`points[0]` is the
/// origin) together with the configuration that produced it and the
/// backbone frame at the tip.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub config: Configuration,
    pub points: Vec<Vec3>,
    pub tip_rotation: Rotation,
    cum_arclen: Vec<f64>,
}

impl Shape {
    pub fn new(config: Configuration, points: Vec<Vec3>, tip_rotation: Rotation) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            acc += (w[1] - w[0]).norm();
            cum.push(acc);
        }
        Shape {
            config,
            points,
            tip_rotation,
            cum_arclen: cum,
        }
    }

    /// Number of backbone intervals (points - 1).
    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn tip(&self) -> &Vec3 {
        self.points.last().expect("shape has at least one point")
    }

    /// Polyline arc length from the base to each point.
    pub fn cum_arclen(&self) -> &[f64] {
        &self.cum_arclen
    }

    pub fn arc_length(&self) -> f64 {
        *self.cum_arclen.last().unwrap()
    }

    /// Arc length of the distal portion starting at point `m`.
    pub fn tail_arclen(&self, m: usize) -> f64 {
        self.arc_length() - self.cum_arclen[m]
    }
}

/// Contract every forward model must satisfy to plug into the planner:
/// a discretized shape, the tip frame, a symmetry descriptor, and the
/// nominal backbone length.
pub trait ForwardModel: Sync {
    fn shape(&self, q: &Configuration) -> Result<Shape, ModelError>;

    fn tip_pose(&self, q: &Configuration) -> Result<Pose, ModelError> {
        let shape = self.shape(q)?;
        Ok(Pose::new(shape.tip_rotation, *shape.tip()))
    }

    fn symmetry(&self) -> SymmetryDescriptor;

    fn nominal_length(&self) -> f64;
}

/// The shipped piece-wise constant curvature model.
#[derive(Debug, Clone)]
pub struct PccModel {
    spec: ModelSpec,
}

impl PccModel {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        Ok(PccModel { spec })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Validity limit on per-segment curvature magnitude. The sampling box
    /// is `[-kappa_max, kappa_max]` per component; its rotation-invariant
    /// circumscription is `sqrt(2) * kappa_max`, which keeps radially
    /// rotated configurations evaluable.
    pub fn curvature_limit(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.spec.kappa_max + 1e-9
    }

    fn check_bounds(&self, q: &Configuration) -> Result<(), ModelError> {
        if q.0.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let limit = self.curvature_limit();
        for i in 0..self.spec.segment_count {
            let (kx, ky) = q.segment(i);
            let magnitude = kx.hypot(ky);
            if magnitude > limit {
                return Err(ModelError::OutOfBounds {
                    segment: i,
                    magnitude,
                    limit,
                });
            }
        }
        Ok(())
    }
}

/// Point at arc length `s` along a constant-curvature arc with bending
/// pair `(kx, ky)`, in the frame at the arc's start.
fn arc_point(kx: f64, ky: f64, s: f64) -> Vec3 {
    let kappa = kx.hypot(ky);
    if kappa < 1e-14 {
        return Vec3::new(0.0, 0.0, s);
    }
    let (cos_phi, sin_phi) = (kx / kappa, ky / kappa);
    // 1 - cos(x) written as 2 sin^2(x/2) to avoid cancellation at small x
    let half = 0.5 * kappa * s;
    let bend = 2.0 * half.sin() * half.sin() / kappa;
    let rise = (kappa * s).sin() / kappa;
    Vec3::new(bend * cos_phi, bend * sin_phi, rise)
}

/// Backbone frame rotation accumulated over arc length `s` of the same arc.
fn arc_rotation(kx: f64, ky: f64, s: f64) -> Rotation {
    let kappa = kx.hypot(ky);
    if kappa < 1e-14 {
        return Rotation::identity();
    }
    let axis = Vec3::new(-ky / kappa, kx / kappa, 0.0);
    Rotation::from_axis_angle(&axis, kappa * s).expect("axis is unit by construction")
}

impl ForwardModel for PccModel {
    fn shape(&self, q: &Configuration) -> Result<Shape, ModelError> {
        self.check_bounds(q)?;
        let spec = &self.spec;
        let ell = spec.segment_length;
        let nseg = spec.segment_count;
        let d = spec.intervals;
        let total = spec.nominal_length();

        // Frame at the start of each segment, plus the end frame.
        let mut frames = Vec::with_capacity(nseg + 1);
        let mut acc = Pose::identity();
        frames.push(acc);
        for i in 0..nseg {
            let (kx, ky) = q.segment(i);
            acc = acc * Pose::new(arc_rotation(kx, ky, ell), arc_point(kx, ky, ell));
            frames.push(acc);
        }

        let mut points = Vec::with_capacity(d + 1);
        for j in 0..=d {
            let s = total * j as f64 / d as f64;
            let seg = ((s / ell) as usize).min(nseg - 1);
            let local = s - seg as f64 * ell;
            let (kx, ky) = q.segment(seg);
            points.push(frames[seg].apply_point(&arc_point(kx, ky, local)));
        }

        Ok(Shape::new(*q, points, frames[nseg].rotation))
    }

    fn tip_pose(&self, q: &Configuration) -> Result<Pose, ModelError> {
        let shape = self.shape(q)?;
        Ok(Pose::new(shape.tip_rotation, *shape.tip()))
    }

    fn symmetry(&self) -> SymmetryDescriptor {
        self.spec.symmetry
    }

    fn nominal_length(&self) -> f64 {
        self.spec.nominal_length()
    }
}
