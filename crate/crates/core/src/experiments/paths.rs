//! Seeded test-path generators for the three benchmark curve classes.
//!
//! C curves are half circles with the start at the origin; S curves are
//! planar cubic Bezier curves with an inflection forced by the control
//! points; robot curves come straight from the forward model on sampled
//! configurations and are feasible by construction. C and S paths are
//! rescaled toward the origin when their arc length exceeds the cap
//! (0.95 x robot length); robot curves are left at full backbone length so
//! planted configurations remain recoverable.

use crate::forward_model::{Configuration, ForwardModel, PccModel};
use crate::geometry::{Rotation, Vec3};
use crate::planner::WaypointPath;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

/// Fraction of the nominal robot length used as the arc-length cap for
/// generated C and S paths.
pub const ARC_CAP_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathClass {
    C,
    S,
    Robot,
}

impl PathClass {
    pub const ALL: [PathClass; 3] = [PathClass::C, PathClass::S, PathClass::Robot];
}

impl fmt::Display for PathClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathClass::C => write!(f, "c_curves"),
            PathClass::S => write!(f, "s_curves"),
            PathClass::Robot => write!(f, "robot_curves"),
        }
    }
}

impl FromStr for PathClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "c_curves" => Ok(PathClass::C),
            "s" | "s_curves" => Ok(PathClass::S),
            "robot" | "robot_curves" => Ok(PathClass::Robot),
            other => Err(format!("unknown path class '{other}'")),
        }
    }
}

pub use crate::geometry::resample_polyline;

fn rescale_to_cap(points: &mut [Vec3], cap: f64) {
    let len: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if len > cap {
        let scale = cap / len;
        for p in points.iter_mut() {
            *p *= scale;
        }
    }
}

/// Half circle from the origin to an endpoint sampled in
/// `[0.5, 1.5] x [-0.75, 0.25] x [1, 2]`, with the bending plane drawn
/// uniformly from `[0, 2 pi)` about the start-end chord.
pub fn gen_c_curve(seed: u64, n: usize, robot_length: f64) -> WaypointPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let endpoint = Vec3::new(
        rng.random_range(0.5..=1.5),
        rng.random_range(-0.75..=0.25),
        rng.random_range(1.0..=2.0),
    );
    let plane_angle = rng.random_range(0.0..TAU);

    let chord = endpoint.norm();
    let chord_dir = endpoint / chord;
    // Reference perpendicular, then spun about the chord by the plane angle.
    let helper = if chord_dir.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let perp0 = chord_dir.cross(&helper).normalize();
    let perp = Rotation::from_axis_angle(&chord_dir, plane_angle)
        .expect("chord direction is unit")
        .apply(&perp0);

    let center = endpoint / 2.0;
    let radius = chord / 2.0;
    // Dense half-circle sweep; uniform in t is uniform in arc length.
    let dense = 256usize;
    let mut points: Vec<Vec3> = (0..=dense)
        .map(|i| {
            let t = PI * i as f64 / dense as f64;
            center - chord_dir * (radius * t.cos()) + perp * (radius * t.sin())
        })
        .collect();
    points[0] = Vec3::zeros();
    let last = points.len() - 1;
    points[last] = endpoint;
    rescale_to_cap(&mut points, ARC_CAP_FRACTION * robot_length);
    WaypointPath::new(resample_polyline(&points, n)).expect("half circle is non-degenerate")
}

/// Planar cubic Bezier with the start at the origin and the endpoint in
/// `[-2.25, -1.25] x [-0.5, 0.5] x {1.5}`. The control points force an S:
/// the first offsets from the start toward +z, the second from the
/// endpoint toward -z, both by 40% of the chord length.
pub fn gen_s_curve(seed: u64, n: usize, robot_length: f64) -> WaypointPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let endpoint = Vec3::new(
        rng.random_range(-2.25..=-1.25),
        rng.random_range(-0.5..=0.5),
        1.5,
    );
    let chord = endpoint.norm();
    let p0 = Vec3::zeros();
    let p1 = p0 + Vec3::new(0.0, 0.0, 0.4 * chord);
    let p2 = endpoint - Vec3::new(0.0, 0.0, 0.4 * chord);
    let p3 = endpoint;

    let dense = 512usize;
    let mut points: Vec<Vec3> = (0..=dense)
        .map(|i| {
            let t = i as f64 / dense as f64;
            let u = 1.0 - t;
            p0 * (u * u * u) + p1 * (3.0 * u * u * t) + p2 * (3.0 * u * t * t) + p3 * (t * t * t)
        })
        .collect();
    rescale_to_cap(&mut points, ARC_CAP_FRACTION * robot_length);
    WaypointPath::new(resample_polyline(&points, n)).expect("Bezier curve is non-degenerate")
}

/// Forward-model backbone of a configuration with per-segment curvature
/// magnitude in `[0.2, 0.8] x kappa_max` (bending-plane angles uniform),
/// resampled to `n` waypoints. Tests planning quality on known-feasible
/// shapes; the full backbone length is kept so the source configuration
/// stays recoverable.
pub fn gen_robot_curve(seed: u64, n: usize, model: &PccModel) -> WaypointPath {
    gen_robot_curve_with_config(seed, n, model).0
}

pub fn gen_robot_curve_with_config(
    seed: u64,
    n: usize,
    model: &PccModel,
) -> (WaypointPath, Configuration) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa_max = model.spec().kappa_max;
    let mut q = [0.0f64; 6];
    for seg in 0..3 {
        let magnitude = rng.random_range(0.2 * kappa_max..=0.8 * kappa_max);
        let angle = rng.random_range(0.0..TAU);
        q[2 * seg] = magnitude * angle.cos();
        q[2 * seg + 1] = magnitude * angle.sin();
    }
    let config = Configuration(q);
    let shape = model.shape(&config).expect("sampled curvature is in bounds");
    let path = WaypointPath::new(resample_polyline(&shape.points, n))
        .expect("backbone is non-degenerate");
    (path, config)
}

/// Dispatches on the curve class.
pub fn generate_path(class: PathClass, seed: u64, n: usize, model: &PccModel) -> WaypointPath {
    match class {
        PathClass::C => gen_c_curve(seed, n, model.nominal_length()),
        PathClass::S => gen_s_curve(seed, n, model.nominal_length()),
        PathClass::Robot => gen_robot_curve(seed, n, model),
    }
}

/// Stable seed derivation for (class, path index) pairs: splitmix64 over
/// the packed inputs, so studies can regenerate any path independently.
pub fn path_seed(base: u64, class: PathClass, index: usize) -> u64 {
    let class_id = match class {
        PathClass::C => 1u64,
        PathClass::S => 2,
        PathClass::Robot => 3,
    };
    let mut x = base
        .wrapping_add(class_id.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
