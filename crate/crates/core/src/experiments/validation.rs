//! Empirical validation studies: interpolation convergence order, Monte
//! Carlo configuration-space coverage, and the deviation-regularity probe,
//! plus the small fitting utilities they share.

use crate::experiments::benchmark::StudyError;
use crate::forward_model::{Configuration, ForwardModel, PccModel};
use crate::interpolation::{inter_step_tip_error, interpolate};
use crate::planner::{evaluate_shape, PlanOptions, SparsePlan, WaypointPath};
use crate::shape_library::Bounds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Pool-adjacent-violators fit of a nonincreasing sequence (squared loss).
pub fn isotonic_nonincreasing(ys: &[f64]) -> Vec<f64> {
    // PAVA on the negated sequence gives the nondecreasing fit.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(ys.len());
    for &y in ys {
        blocks.push((-y, 1));
        while blocks.len() >= 2 {
            let (v2, n2) = blocks[blocks.len() - 1];
            let (v1, n1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            blocks.pop();
            let n = n1 + n2;
            blocks.push(((v1 * n1 as f64 + v2 * n2 as f64) / n as f64, n));
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (v, n) in blocks {
        for _ in 0..n {
            out.push(-v);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

/// Error floor below which a measured maximum is treated as numerically
/// zero (relative to robot length); straight-path degeneracies report a
/// floor flag instead of a slope.
pub const CONVERGENCE_FLOOR_REL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceResult {
    /// `(h, max inter-step tip error over the trajectory)` per step count.
    pub errors: Vec<(usize, f64)>,
    /// Fitted log-log slope of max error vs h; `None` when floored.
    pub slope: Option<f64>,
    pub floored: bool,
}

/// Densifies one sparse plan at each `h` and fits the decay rate of the
/// worst inter-step tip error. Pre-align the plan first if the pipeline
/// under study does.
pub fn convergence_study(
    model: &PccModel,
    path: &WaypointPath,
    sparse: &SparsePlan,
    hs: &[usize],
    beta_samples: usize,
) -> Result<ConvergenceResult, StudyError> {
    let floor = CONVERGENCE_FLOOR_REL * model.nominal_length();
    let mut errors = Vec::with_capacity(hs.len());
    for &h in hs {
        let dense = interpolate(sparse, path, h, model)?;
        let maxima = inter_step_tip_error(&dense, model, beta_samples)?;
        let worst = maxima.into_iter().fold(0.0, f64::max);
        errors.push((h, worst));
    }
    let floored = errors.iter().any(|(_, e)| *e < floor);
    let slope = if floored {
        None
    } else {
        let xs: Vec<f64> = errors.iter().map(|(h, _)| *h as f64).collect();
        let ys: Vec<f64> = errors.iter().map(|(_, e)| *e).collect();
        Some(loglog_slope(&xs, &ys))
    };
    Ok(ConvergenceResult {
        errors,
        slope,
        floored,
    })
}

// ---------------------------------------------------------------------------
// Coverage study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageNorm {
    L2,
    Linf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub n: usize,
    /// Fraction of trials in which all probes had a sample within eps.
    pub p_hat: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of the probability that `n` uniform samples form an
/// eps-cover of the sampling box, probed at `probes` uniform test points
/// per trial. The estimate is nondecreasing in `n` up to binomial noise.
pub fn coverage_study(
    bounds: &Bounds,
    eps: f64,
    norm: CoverageNorm,
    ns: &[usize],
    trials: usize,
    probes: usize,
    seed: u64,
) -> Vec<CoveragePoint> {
    let dist_within = |a: &Configuration, b: &Configuration| match norm {
        CoverageNorm::L2 => a.distance(b) <= eps,
        CoverageNorm::Linf => a.distance_linf(b) <= eps,
    };
    ns.iter()
        .map(|&n| {
            let mut covered = 0usize;
            for trial in 0..trials {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (n as u64) << 20 ^ trial as u64);
                let samples: Vec<Configuration> =
                    (0..n).map(|_| bounds.sample(&mut rng)).collect();
                let mut all_covered = true;
                for _ in 0..probes {
                    let probe = bounds.sample(&mut rng);
                    if !samples.iter().any(|s| dist_within(s, &probe)) {
                        all_covered = false;
                        break;
                    }
                }
                if all_covered {
                    covered += 1;
                }
            }
            CoveragePoint {
                n,
                p_hat: covered as f64 / trials as f64,
                trials,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Deviation-regularity probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityPoint {
    pub delta: f64,
    /// Empirical max of |E(q1) - E(q2)| / |q1 - q2| over sampled pairs.
    pub max_ratio: f64,
}

/// Samples configuration pairs at distance `delta` and records the largest
/// deviation difference quotient of the aligned shape deviation against the
/// given path. The maxima estimate the deviation's modulus of continuity;
/// they must stay finite and stable as `delta` refines.
pub fn deviation_regularity_probe(
    model: &PccModel,
    path: &WaypointPath,
    deltas: &[f64],
    pairs: usize,
    seed: u64,
) -> Result<Vec<RegularityPoint>, StudyError> {
    let bounds = Bounds::symmetric(model.spec().kappa_max);
    let opts = PlanOptions::default();
    let upto = path.len();
    let mut points = Vec::with_capacity(deltas.len());
    for (di, &delta) in deltas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(di as u64));
        let mut max_ratio = 0.0f64;
        for _ in 0..pairs {
            let q1 = bounds.sample(&mut rng);
            // Random direction, scaled to delta, reflected back into the box.
            let mut q2 = q1.0;
            let mut dir = [0.0f64; 6];
            let mut norm = 0.0;
            for d in dir.iter_mut() {
                *d = rng.random_range(-1.0..1.0);
                norm += *d * *d;
            }
            let norm = norm.sqrt().max(1e-12);
            for (i, d) in dir.iter().enumerate() {
                q2[i] += delta * d / norm;
                if q2[i] > bounds.hi[i] {
                    q2[i] = 2.0 * bounds.hi[i] - q2[i];
                }
                if q2[i] < bounds.lo[i] {
                    q2[i] = 2.0 * bounds.lo[i] - q2[i];
                }
            }
            let q2 = Configuration(q2);
            let dq = q1.distance(&q2);
            if dq < 1e-9 {
                continue;
            }
            let s1 = model.shape(&q1)?;
            let s2 = model.shape(&q2)?;
            let e1 = evaluate_shape(&s1, path, upto, &opts)?.2;
            let e2 = evaluate_shape(&s2, path, upto, &opts)?.2;
            max_ratio = max_ratio.max((e1 - e2).abs() / dq);
        }
        points.push(RegularityPoint { delta, max_ratio });
    }
    Ok(points)
}
