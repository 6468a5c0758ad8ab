//! Sequential local-optimization planner used as the comparison method.
//!
//! Each waypoint is solved by a bounded quasi-Newton descent over the joint
//! decision vector z = (q in R^6, base translation in R^3, base rotation
//! vector in R^3), warm-started from the previous waypoint's solution. The
//! cost is the aligned shape deviation plus a quadratic tip penalty; there
//! is no closed-form tip placement, so tip error stays strictly positive on
//! curved paths. That gap against the sampling planner is the point of the
//! comparison.

use crate::forward_model::{Configuration, ForwardModel};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::interpolation::{DensePlan, DenseStep};
use crate::planner::{
    active_subset, chamfer, densify_prefix, ChamferNorm, PlanError, PlanOptions, WaypointPath,
};

pub const BASELINE_DIM: usize = 12;

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// Weight on the squared tip-placement error.
    pub lambda_tip: f64,
    pub max_iters: usize,
    /// Forward-difference step for gradients.
    pub fd_step: f64,
    /// Stop when the projected gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step improves the cost by less than this.
    pub cost_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            lambda_tip: 10.0,
            max_iters: 200,
            fd_step: 1e-6,
            grad_tol: 1e-7,
            cost_tol: 1e-12,
        }
    }
}

/// Decision vector plus bookkeeping for one waypoint's local solve.
#[derive(Debug, Clone, Copy)]
pub struct BaselineState {
    pub z: [f64; BASELINE_DIM],
    pub cost: f64,
    /// False when the solver hit its iteration cap before converging; the
    /// best iterate is still returned.
    pub converged: bool,
}

impl BaselineState {
    pub fn zeros() -> Self {
        BaselineState {
            z: [0.0; BASELINE_DIM],
            cost: f64::INFINITY,
            converged: false,
        }
    }

    pub fn config(&self) -> Configuration {
        let mut q = [0.0; 6];
        q.copy_from_slice(&self.z[..6]);
        Configuration(q)
    }

    pub fn base_pose(&self) -> Pose {
        let t = Vec3::new(self.z[6], self.z[7], self.z[8]);
        let r = Vec3::new(self.z[9], self.z[10], self.z[11]);
        let angle = r.norm();
        let rotation = if angle < 1e-14 {
            Rotation::identity()
        } else {
            Rotation::from_axis_angle(&(r / angle), angle).expect("normalized axis")
        };
        Pose::new(rotation, t)
    }
}

struct Problem<'a, M: ForwardModel> {
    model: &'a M,
    prefix: Vec<Vec3>,
    target_arclen: f64,
    lambda_tip: f64,
    lo: [f64; BASELINE_DIM],
    hi: [f64; BASELINE_DIM],
}

impl<M: ForwardModel> Problem<'_, M> {
    fn cost(&self, z: &[f64; BASELINE_DIM]) -> f64 {
        let state = BaselineState {
            z: *z,
            cost: 0.0,
            converged: false,
        };
        let q = state.config();
        let Ok(shape) = self.model.shape(&q) else {
            return f64::INFINITY;
        };
        let pose = state.base_pose();
        let m_star = active_subset(&shape, self.target_arclen);
        let posed: Vec<Vec3> = shape.points[m_star..]
            .iter()
            .map(|p| pose.apply_point(p))
            .collect();
        let deviation = chamfer(
            &posed,
            &self.prefix,
            ChamferNorm::Cardinality,
            shape.tail_arclen(m_star),
            self.target_arclen,
            None,
        );
        let tip_err = (posed[posed.len() - 1] - self.prefix[self.prefix.len() - 1]).norm_squared();
        deviation + self.lambda_tip * tip_err
    }

    fn project(&self, z: &mut [f64; BASELINE_DIM]) {
        for i in 0..BASELINE_DIM {
            z[i] = z[i].clamp(self.lo[i], self.hi[i]);
        }
        // Keep the rotation vector inside the |r| < pi chart.
        let r = Vec3::new(z[9], z[10], z[11]);
        let angle = r.norm();
        let cap = std::f64::consts::PI * 0.999;
        if angle > cap {
            let scaled = r * (cap / angle);
            z[9] = scaled.x;
            z[10] = scaled.y;
            z[11] = scaled.z;
        }
    }

    /// Forward differences, flipping to a backward step at the upper bound
    /// so the model is never evaluated outside its box.
    fn gradient(&self, z: &[f64; BASELINE_DIM], f0: f64, h: f64) -> [f64; BASELINE_DIM] {
        let mut g = [0.0; BASELINE_DIM];
        for i in 0..BASELINE_DIM {
            let mut zp = *z;
            if z[i] + h <= self.hi[i] {
                zp[i] = z[i] + h;
                g[i] = (self.cost(&zp) - f0) / h;
            } else {
                zp[i] = z[i] - h;
                g[i] = (f0 - self.cost(&zp)) / h;
            }
        }
        g
    }
}

/// Locally minimizes the penalized deviation cost for the active path
/// through `upto` waypoints, starting from `warm_start`. Projected BFGS
/// with Armijo backtracking; deterministic, monotone in accepted steps, and
/// capped at `cfg.max_iters`.
pub fn optimize_waypoint<M: ForwardModel>(
    model: &M,
    path: &WaypointPath,
    upto: usize,
    warm_start: &BaselineState,
    kappa_max: f64,
    cfg: &BaselineConfig,
) -> BaselineState {
    let mut lo = [f64::NEG_INFINITY; BASELINE_DIM];
    let mut hi = [f64::INFINITY; BASELINE_DIM];
    for i in 0..6 {
        lo[i] = -kappa_max;
        hi[i] = kappa_max;
    }
    let problem = Problem {
        model,
        prefix: path.waypoints()[..upto].to_vec(),
        target_arclen: path.active_arclen(upto),
        lambda_tip: cfg.lambda_tip,
        lo,
        hi,
    };

    let mut z = warm_start.z;
    problem.project(&mut z);
    let mut f = problem.cost(&z);
    let mut hess_inv = identity_matrix();
    let mut g = problem.gradient(&z, f, cfg.fd_step);
    let mut converged = false;
    let mut scaled = false;
    let mut stall_count = 0usize;

    for _ in 0..cfg.max_iters {
        // Projected gradient as the stationarity measure.
        let mut pg_norm = 0.0f64;
        for i in 0..BASELINE_DIM {
            let step = (z[i] - g[i]).clamp(problem.lo[i], problem.hi[i]) - z[i];
            pg_norm = pg_norm.max(step.abs());
        }
        if pg_norm < cfg.grad_tol {
            converged = true;
            break;
        }

        let mut direction = mat_vec(&hess_inv, &g);
        for d in direction.iter_mut() {
            *d = -*d;
        }
        // Fall back to steepest descent when curvature information turns
        // the step uphill.
        if dot(&direction, &g) > -1e-16 {
            hess_inv = identity_matrix();
            for i in 0..BASELINE_DIM {
                direction[i] = -g[i];
            }
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut z_next = z;
        let mut f_next = f;
        for _ in 0..30 {
            let mut trial = z;
            for i in 0..BASELINE_DIM {
                trial[i] = z[i] + alpha * direction[i];
            }
            problem.project(&mut trial);
            let f_trial = problem.cost(&trial);
            let actual_step: f64 = (0..BASELINE_DIM)
                .map(|i| (trial[i] - z[i]) * g[i])
                .sum();
            if f_trial <= f + 1e-4 * actual_step.min(0.0) && f_trial < f {
                z_next = trial;
                f_next = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }

        let g_next = problem.gradient(&z_next, f_next, cfg.fd_step);
        let mut s = [0.0; BASELINE_DIM];
        let mut y = [0.0; BASELINE_DIM];
        for i in 0..BASELINE_DIM {
            s[i] = z_next[i] - z[i];
            y[i] = g_next[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if !scaled {
                // Scale the initial inverse Hessian to the first curvature
                // estimate; a unit H0 makes early steps wildly misscaled.
                let yy = dot(&y, &y).max(1e-300);
                hess_inv = identity_matrix();
                for (i, row) in hess_inv.iter_mut().enumerate() {
                    row[i] = sy / yy;
                }
                scaled = true;
            }
            bfgs_update(&mut hess_inv, &s, &y, sy);
        }

        let improvement = f - f_next;
        z = z_next;
        f = f_next;
        g = g_next;
        // A single barely-improving (heavily backtracked) step is not
        // convergence; require a run of them.
        if improvement < cfg.cost_tol {
            stall_count += 1;
            if stall_count >= 3 {
                converged = true;
                break;
            }
        } else {
            stall_count = 0;
        }
    }

    BaselineState {
        z,
        cost: f,
        converged,
    }
}

/// Plans every waypoint in order with warm starting, then densifies with
/// the same blend grid as the sampling planner but without any tip-exact
/// correction: joint state and base translation interpolate linearly and
/// the base rotation slerps.
pub fn plan_baseline<M: ForwardModel>(
    model: &M,
    path: &WaypointPath,
    h: usize,
    kappa_max: f64,
    cfg: &BaselineConfig,
) -> Result<DensePlan, PlanError> {
    if h < 1 {
        return Err(PlanError::InvalidStepCount);
    }
    let n = path.len();
    let mut states = Vec::with_capacity(n);
    let mut warm = BaselineState::zeros();
    warm.z = [0.0; BASELINE_DIM];
    for i in 1..=n {
        let solved = optimize_waypoint(model, path, i, &warm, kappa_max, cfg);
        warm = solved;
        states.push(solved);
    }

    // Realized world tip rotations at the waypoints drive the desired-tip
    // orientation interpolation, exactly as in the sampling pipeline.
    let mut tip_rotations = Vec::with_capacity(n);
    for s in &states {
        let tip_local = model.tip_pose(&s.config())?;
        tip_rotations.push(s.base_pose().rotation * tip_local.rotation);
    }

    let mut steps = Vec::with_capacity(DensePlan::expected_len(n.max(1), h));
    steps.push(DenseStep {
        config: states[0].config(),
        base_pose: states[0].base_pose(),
        desired_tip: Pose::new(tip_rotations[0], *path.point(0)),
        interval: 0,
        alpha: 0.0,
    });
    for j in 0..n.saturating_sub(1) {
        let (a, b) = (&states[j], &states[j + 1]);
        let pose_a = a.base_pose();
        let pose_b = b.base_pose();
        let (qa, qb) = (a.config(), b.config());
        for k in 1..=h {
            let alpha = k as f64 / h as f64;
            let config = Configuration::lerp(&qa, &qb, alpha);
            let base_pose = Pose::new(
                pose_a.rotation.slerp(&pose_b.rotation, alpha),
                (1.0 - alpha) * pose_a.translation + alpha * pose_b.translation,
            );
            let desired_tip = Pose::new(
                tip_rotations[j].slerp(&tip_rotations[j + 1], alpha),
                (1.0 - alpha) * path.point(j) + alpha * path.point(j + 1),
            );
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

type Matrix = [[f64; BASELINE_DIM]; BASELINE_DIM];

fn identity_matrix() -> Matrix {
    let mut m = [[0.0; BASELINE_DIM]; BASELINE_DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mat_vec(m: &Matrix, v: &[f64; BASELINE_DIM]) -> [f64; BASELINE_DIM] {
    let mut out = [0.0; BASELINE_DIM];
    for i in 0..BASELINE_DIM {
        out[i] = (0..BASELINE_DIM).map(|j| m[i][j] * v[j]).sum();
    }
    out
}

fn dot(a: &[f64; BASELINE_DIM], b: &[f64; BASELINE_DIM]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Standard BFGS inverse-Hessian update.
fn bfgs_update(h: &mut Matrix, s: &[f64; BASELINE_DIM], y: &[f64; BASELINE_DIM], sy: f64) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..BASELINE_DIM {
        for j in 0..BASELINE_DIM {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
