//! Statistical checks of the log-determinant estimator on a concrete pair of
//! points, and of the smoothed-factor series on a synthetic draw source.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::barrier::{frobenius_ratio, logdet_phi_exact, weights_at, BarrierParams, BarrierPoint};
use crate::error::{Error, Result};
use crate::logdet_estimator::{
    default_sample_count, estimate_factor, exact_trace_integrand, sample_delta, select_branch, sigmoid,
};
use crate::parallel::{map_indexed, try_map_indexed};
use crate::polytope::Polytope;
use crate::rng::{standard_normal_vec, Purpose, SeedTree};
use crate::solver::{SolverConfig, SolverState};

pub const TAIL_LEVELS: [f64; 3] = [8.0, 16.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorCheckConfig {
    pub n_draws: usize,
    /// Runs of the full smoothed-factor estimator on the instance.
    pub n_factor_runs: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for EstimatorCheckConfig {
    fn default() -> Self {
        Self {
            n_draws: 100_000,
            n_factor_runs: 2_000,
            gamma: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheck {
    pub s: f64,
    pub frequency: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorCheck {
    pub delta: f64,
    pub runs: usize,
    pub mean_x: f64,
    pub standard_error: f64,
    pub target: f64,
    pub error: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    pub delta_exact: f64,
    pub delta_quadrature: f64,
    pub mean_y: f64,
    pub standard_error_y: f64,
    pub mean_error_in_se: f64,
    /// `‖D(θ)⁻¹D(z) − I‖_F`, the scale of the tail levels.
    pub frobenius_ratio: f64,
    pub weight_ratio_min: f64,
    pub weight_ratio_max: f64,
    pub tails: Vec<TailCheck>,
    pub factor: FactorCheck,
    pub passed: bool,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Composite Gauss-Legendre (5 points per panel) on `[0, 1]`.
pub fn integrate_unit<F: Fn(f64) -> Result<f64>>(panels: usize, g: F) -> Result<f64> {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let h = 1.0 / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            s += w * g(mid + 0.5 * h * x)?;
        }
    }
    Ok(0.5 * h * s)
}

fn weight_ratio_range(from: &BarrierPoint, to: &BarrierPoint) -> (f64, f64) {
    from.weights
        .as_slice()
        .iter()
        .zip(to.weights.as_slice())
        .map(|(a, b)| b / a)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

/// Picks `z` as a Gaussian step from `θ` in the local metric, halved until
/// the weight ratios lie in `[½, 2]`.
pub fn pick_pair(polytope: &Polytope, params: &BarrierParams, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
    let bp = weights_at(polytope, params, theta)?;
    let aug = polytope.augmented().clone();
    let solver = SolverState::initialize(&bp.weights, aug.clone(), SolverConfig::default())?;
    let mut rng = SeedTree::new(seed).stream(0, Purpose::Instance, 0);
    let xi = standard_normal_vec(&mut rng, aug.n_rows());
    let scaled: Vec<f64> = xi.iter().zip(bp.weights.as_slice()).map(|(x, d)| x * d.sqrt()).collect();
    let step = solver.solve(&aug.matvec_t(&scaled)?, &bp.weights)?;
    let mut scale = params.alpha.sqrt();
    for _ in 0..60 {
        let z: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
        if polytope.contains_interior(&z)? {
            let bz = weights_at(polytope, params, &z)?;
            let (lo, hi) = weight_ratio_range(&bp, &bz);
            if lo >= 0.5 && hi <= 2.0 {
                return Ok(z);
            }
        }
        scale *= 0.5;
    }
    Err(Error::config("instance", "could not find a nearby interior point"))
}

/// Runs the estimator checks for the pair `(θ, z)`.
pub fn check_pair(
    polytope: &Polytope,
    params: &BarrierParams,
    theta: &[f64],
    z: &[f64],
    cfg: &EstimatorCheckConfig,
) -> Result<EstimatorReport> {
    if cfg.n_draws < 2 {
        return Err(Error::config("n_draws", "must be at least 2"));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::config("gamma", format!("must lie in (0, 1), got {}", cfg.gamma)));
    }
    let aug = polytope.augmented().clone();
    let from = weights_at(polytope, params, theta)?;
    let to = weights_at(polytope, params, z)?;
    let solver = SolverState::initialize(&from.weights, aug.clone(), SolverConfig::default())?;
    let delta_exact = logdet_phi_exact(&aug, &to, params)? - logdet_phi_exact(&aug, &from, params)?;
    let delta_quadrature = integrate_unit(16, |t| exact_trace_integrand(&from.weights, &to.weights, &aug, t))?;

    let seeds = SeedTree::new(cfg.seed).child(1);
    let ys = try_map_indexed(cfg.n_draws, |j| {
        let mut rng = seeds.stream(0, Purpose::Validation, j as u64);
        sample_delta(&from, &to, &aug, &solver, &mut rng).map(|s| s.y)
    })?;
    let (mean_y, standard_error_y) = mean_se(&ys);
    let c = frobenius_ratio(&from, &to)?;
    let (lo, hi) = weight_ratio_range(&from, &to);
    let tails: Vec<TailCheck> = TAIL_LEVELS
        .iter()
        .map(|&s| {
            let hits = ys.iter().filter(|y| (*y - delta_exact).abs() >= s * c).count();
            let frequency = hits as f64 / ys.len() as f64;
            let p = 2.0 * (-s / 8.0).exp();
            let bound = p + 3.0 * binomial_se(p.min(1.0), ys.len());
            TailCheck {
                s,
                frequency,
                bound,
                passed: frequency <= bound,
            }
        })
        .collect();

    // full estimator: selector plus 𝒩 draws per run
    let n = default_sample_count(cfg.gamma);
    let fseeds = SeedTree::new(cfg.seed).child(2);
    let xs = try_map_indexed(cfg.n_factor_runs.max(2), |r| -> Result<f64> {
        let draws = (0..=n)
            .map(|j| {
                let mut rng = fseeds.stream(r as u64, Purpose::Validation, j as u64);
                sample_delta(&from, &to, &aug, &solver, &mut rng).map(|s| s.y)
            })
            .collect::<Result<Vec<f64>>>()?;
        let branch = select_branch(draws[0], cfg.gamma);
        Ok(estimate_factor(draws[0], &draws[1..], branch))
    })?;
    let factor = factor_check(delta_exact, &xs, cfg.gamma);
    let mean_error_in_se = (mean_y - delta_exact).abs() / standard_error_y.max(f64::MIN_POSITIVE);
    let passed = mean_error_in_se <= 4.0
        && (delta_quadrature - delta_exact).abs() <= 1e-6
        && tails.iter().all(|t| t.passed)
        && factor.passed;
    Ok(EstimatorReport {
        theta: theta.to_vec(),
        z: z.to_vec(),
        delta_exact,
        delta_quadrature,
        mean_y,
        standard_error_y,
        mean_error_in_se,
        frobenius_ratio: c,
        weight_ratio_min: lo,
        weight_ratio_max: hi,
        tails,
        factor,
        passed,
    })
}

fn factor_check(delta: f64, xs: &[f64], gamma: f64) -> FactorCheck {
    let (mean_x, standard_error) = mean_se(xs);
    let target = sigmoid(delta / 2.0);
    let error = (mean_x - target).abs();
    let bound = gamma + 3.0 * standard_error;
    FactorCheck {
        delta,
        runs: xs.len(),
        mean_x,
        standard_error,
        target,
        error,
        bound,
        passed: error <= bound,
    }
}

/// Draws shaped like the estimator's: `Δ` plus a centred weighted sum of
/// chi-square terms with Frobenius weight `noise`.
pub fn synthetic_draw<R: Rng + ?Sized>(rng: &mut R, delta: f64, noise: f64) -> f64 {
    const K: usize = 4;
    let lambda = noise / (K as f64).sqrt();
    let mut y = delta;
    for _ in 0..K {
        let g: f64 = StandardNormal.sample(rng);
        y += lambda * (g * g - 1.0);
    }
    y
}

/// Mean of the smoothed-factor estimator over `runs` independent runs fed by
/// [`synthetic_draw`], compared with `sigmoid(Δ/2)`.
pub fn synthetic_factor_check(delta: f64, gamma: f64, noise: f64, runs: usize, seed: u64) -> FactorCheck {
    let n = default_sample_count(gamma);
    let seeds = SeedTree::new(seed);
    let xs = map_indexed(runs.max(2), |r| {
        let mut rng = seeds.stream(r as u64, Purpose::Validation, 0);
        let draws: Vec<f64> = (0..=n).map(|_| synthetic_draw(&mut rng, delta, noise)).collect();
        let branch = select_branch(draws[0], gamma);
        estimate_factor(draws[0], &draws[1..], branch)
    });
    factor_check(delta, &xs, gamma)
}
