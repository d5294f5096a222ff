//! The soft-threshold Dikin walk.
//!
//! Each step proposes `z = θ + √α · (ÂᵀD(θ)Â)⁻¹ Âᵀ D(θ)^{1/2} ξ` with
//! `ξ ~ N(0, I_{m+d})`, so `z − θ ~ N(0, Φ(θ)⁻¹)`, and accepts with
//! probability
//!
//! ```text
//! ½ · sigmoid(Δ/2) · min(1, exp(f(θ) − f(z) + ½‖z−θ‖²_{Φ(θ)} − ½‖θ−z‖²_{Φ(z)}))
//! ```
//!
//! where `Δ = log det Φ(z) − log det Φ(θ)`. In exact mode `Δ` comes from dense
//! factorizations; in estimated mode `sigmoid(Δ/2)` is replaced by the series
//! estimate of [`crate::logdet_estimator`].

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::barrier::{local_norm_sq, weights_at, BarrierParams, BarrierPoint, MIN_SLACK};
use crate::error::{Error, Result};
use crate::logdet_estimator::{
    default_sample_count, estimate_factor, sample_delta, select_branch, sigmoid, SeriesBranch,
};
use crate::parallel::try_map_indexed;
use crate::polytope::Polytope;
use crate::rng::{standard_normal_vec, uniform01, Purpose, SeedTree};
use crate::solver::{Backend, SolverConfig, SolverState, SolverStats};
use crate::sparsela::{gram, logdet_dense, DenseSym};
use crate::target::{Regularity, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Estimated,
}

/// Constants replacing `10⁵`, `10⁴` and `10⁹` in the step-size and step-count
/// formulas, plus a directly chosen `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PracticalConstants {
    pub alpha_const: f64,
    pub eta_const: f64,
    pub steps_const: f64,
    pub gamma: f64,
}

impl Default for PracticalConstants {
    fn default() -> Self {
        Self {
            alpha_const: 10.0,
            eta_const: 10.0,
            steps_const: 50.0,
            gamma: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Paper,
    Practical(PracticalConstants),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub params: BarrierParams,
    pub gamma: f64,
    pub steps: u64,
    pub n_samples: usize,
    pub mode: Mode,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Steps discarded before samples are recorded.
    pub burn_in: u64,
    /// Record every `thin`-th state after burn-in.
    pub thin: u64,
    /// Multiplies `Δ` (and every estimator draw) inside the determinant
    /// factor. Only for mutation tests of the validation suite; must be 1 in
    /// real runs.
    pub delta_scale: f64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        BarrierParams::new(self.params.alpha, self.params.eta)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin", "must be at least 1"));
        }
        if !(self.delta_scale > 0.0 && self.delta_scale.is_finite()) {
            return Err(Error::config("delta_scale", "must be positive"));
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.solver.backend = backend;
        self
    }

    /// Sets `γ` and the matching `𝒩`, leaving `α` untouched.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self.n_samples = default_sample_count(gamma);
        self
    }
}

/// Step-size schedule. `w` is the warmness of the start and `delta` the
/// target total-variation error.
pub fn hyperparams(
    m: usize,
    d: usize,
    radius: f64,
    regularity: Regularity,
    w: f64,
    delta: f64,
    profile: Profile,
) -> Result<WalkConfig> {
    if m == 0 || d == 0 {
        return Err(Error::config("polytope", "m and d must be positive"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("R", "must be positive"));
    }
    if !(w >= 1.0 && w.is_finite()) {
        return Err(Error::config("w", "must be >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("delta", "must lie in (0, 1)"));
    }
    let (m_f, d_f) = (m as f64, d as f64);
    // L² for Lipschitz targets, β for smooth ones
    let (curv, log_exp) = match regularity {
        Regularity::Lipschitz(l) if l > 0.0 && l.is_finite() => (l * l, 1.02),
        Regularity::Smooth(b) if b > 0.0 && b.is_finite() => (b, 1.01),
        _ => return Err(Error::config("target.regularity", "constant must be positive")),
    };
    let log_wd = (w / delta).ln().max(f64::MIN_POSITIVE);
    let (ca, ce, ct, gamma) = match profile {
        Profile::Paper => {
            let gamma = delta / (1e20 * (m_f * d_f + curv * radius * radius) * log_wd.powf(log_exp));
            (1e5, 1e4, 1e9, gamma)
        }
        Profile::Practical(c) => (c.alpha_const, c.eta_const, c.steps_const, c.gamma),
    };
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    let alpha = 1.0 / (ca * d_f * (1.0 / gamma).ln());
    let eta = 1.0 / (ce * d_f * curv);
    let base = ct * (2.0 * m_f / alpha + radius * radius / eta) * log_wd;
    let steps = base * base.ln().max(1.0).powf(1.01);
    let config = WalkConfig {
        params: BarrierParams::new(alpha, eta)?,
        gamma,
        steps: if steps >= u64::MAX as f64 { u64::MAX } else { steps.ceil() as u64 },
        n_samples: default_sample_count(gamma),
        mode: Mode::Estimated,
        seed: 0,
        solver: SolverConfig::default(),
        burn_in: 0,
        thin: 1,
        delta_scale: 1.0,
    };
    config.validate()?;
    Ok(config)
}

/// Per-chain counters. Wall time is kept apart from everything else so
/// deterministic reports can leave it out.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub steps: u64,
    pub accepted: u64,
    pub out_of_k: u64,
    pub branch_counts: [u64; 3],
    /// `‖D(θ)⁻¹D(z) − I‖_F` of each accepted move.
    pub accepted_frobenius: Vec<f64>,
    pub step_seconds: Vec<f64>,
}

impl Diagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    pub fn out_of_k_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.out_of_k as f64 / self.steps as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub bp: BarrierPoint,
    pub solver: SolverState,
    pub f_value: f64,
    /// `log det(ÂᵀD(θ)Â)`; only maintained in exact mode.
    pub logdet_gram: Option<f64>,
    pub step_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub z: Vec<f64>,
    pub interior: bool,
    pub accepted: bool,
    pub uniform: f64,
    pub probability: f64,
    pub branch: Option<SeriesBranch>,
    /// Exact-mode probability for the same pair, when requested.
    pub exact_probability: Option<f64>,
}

pub struct Chain<'a> {
    polytope: &'a Polytope,
    target: &'a Target,
    config: WalkConfig,
    seeds: SeedTree,
    state: ChainState,
    diag: Diagnostics,
}

fn check_f(value: f64, step: u64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::TargetEvaluation { value, step })
    }
}

fn gram_logdet(polytope: &Polytope, bp: &BarrierPoint) -> Result<f64> {
    logdet_dense(&gram(polytope.augmented(), &bp.weights)?)
}

impl<'a> Chain<'a> {
    pub fn new(
        polytope: &'a Polytope,
        target: &'a Target,
        config: WalkConfig,
        theta0: &[f64],
    ) -> Result<Self> {
        config.validate()?;
        target.validate(polytope.dim())?;
        let bp = weights_at(polytope, &config.params, theta0)?;
        let solver = SolverState::initialize(
            &bp.weights,
            polytope.augmented().clone(),
            config.solver,
        )?;
        let f_value = check_f(target.eval(theta0), 0)?;
        let logdet_gram = match config.mode {
            Mode::Exact => Some(gram_logdet(polytope, &bp)?),
            Mode::Estimated => None,
        };
        Ok(Self {
            polytope,
            target,
            seeds: SeedTree::new(config.seed),
            config,
            state: ChainState {
                bp,
                solver,
                f_value,
                logdet_gram,
                step_index: 0,
            },
            diag: Diagnostics::default(),
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn theta(&self) -> &[f64] {
        &self.state.bp.theta
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    pub fn solver_stats(&self) -> SolverStats {
        self.state.solver.stats()
    }

    /// Gaussian proposal with covariance `Φ(θ)⁻¹` driven by `xi` (length m+d).
    pub fn propose_with(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let aug = self.polytope.augmented();
        let w = &self.state.bp.weights;
        if xi.len() != aug.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "proposal noise",
                expected: aug.n_rows(),
                found: xi.len(),
            });
        }
        let scaled: Vec<f64> = xi
            .iter()
            .zip(w.as_slice())
            .map(|(x, d)| x * d.sqrt())
            .collect();
        let u = aug.matvec_t(&scaled)?;
        let step = self.state.solver.solve(&u, w)?;
        let sa = self.config.params.alpha.sqrt();
        Ok(self
            .state
            .bp
            .theta
            .iter()
            .zip(step)
            .map(|(t, s)| t + sa * s)
            .collect())
    }

    pub fn propose(&self) -> Result<Vec<f64>> {
        let n = self.polytope.augmented().n_rows();
        let mut rng = self.seeds.stream(self.state.step_index, Purpose::Proposal, 0);
        self.propose_with(&standard_normal_vec(&mut rng, n))
    }

    /// `min(1, exp(f(θ) − f(z) + ½‖z−θ‖²_{Φ(θ)} − ½‖θ−z‖²_{Φ(z)}))`.
    fn metropolis_term(&self, bp_z: &BarrierPoint, f_z: f64) -> Result<f64> {
        let aug = self.polytope.augmented();
        let diff: Vec<f64> = bp_z
            .theta
            .iter()
            .zip(&self.state.bp.theta)
            .map(|(a, b)| a - b)
            .collect();
        let params = &self.config.params;
        let n_theta = local_norm_sq(aug, &self.state.bp, params, &diff)?;
        let n_z = local_norm_sq(aug, bp_z, params, &diff)?;
        Ok((self.state.f_value - f_z + 0.5 * n_theta - 0.5 * n_z).exp().min(1.0))
    }

    /// Exact acceptance probability for moving to an interior `z`.
    pub fn accept_prob_exact(&self, z: &[f64]) -> Result<f64> {
        let bp_z = weights_at(self.polytope, &self.config.params, z)?;
        let f_z = check_f(self.target.eval(z), self.state.step_index)?;
        let ld_theta = match self.state.logdet_gram {
            Some(v) => v,
            None => gram_logdet(self.polytope, &self.state.bp)?,
        };
        let delta = self.config.delta_scale * (gram_logdet(self.polytope, &bp_z)? - ld_theta);
        Ok(0.5 * sigmoid(delta / 2.0) * self.metropolis_term(&bp_z, f_z)?)
    }

    /// Draws `𝒩 + 1` estimator samples for the pair `(θ, z)`: the first is
    /// the branch selector, the rest enter the series products.
    pub fn estimator_draws(&self, bp_z: &BarrierPoint) -> Result<Vec<f64>> {
        let step = self.state.step_index;
        let seeds = self.seeds;
        let aug = self.polytope.augmented();
        let bp = &self.state.bp;
        let solver = &self.state.solver;
        try_map_indexed(self.config.n_samples + 1, |j| {
            let mut rng = seeds.stream(step, Purpose::EstimatorDraw, j as u64);
            sample_delta(bp, bp_z, aug, solver, &mut rng).map(|s| s.y)
        })
    }

    /// Estimated acceptance probability `½ · X · min(1, exp-term)`.
    pub fn accept_prob_estimated(&self, z: &[f64]) -> Result<(f64, SeriesBranch)> {
        let bp_z = weights_at(self.polytope, &self.config.params, z)?;
        let f_z = check_f(self.target.eval(z), self.state.step_index)?;
        self.estimated_with(&bp_z, f_z)
    }

    fn estimated_with(&self, bp_z: &BarrierPoint, f_z: f64) -> Result<(f64, SeriesBranch)> {
        let mut ys = self.estimator_draws(bp_z)?;
        if self.config.delta_scale != 1.0 {
            ys.iter_mut().for_each(|y| *y *= self.config.delta_scale);
        }
        let branch = select_branch(ys[0], self.config.gamma);
        let x = estimate_factor(ys[0], &ys[1..], branch);
        Ok((0.5 * x * self.metropolis_term(bp_z, f_z)?, branch))
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        self.step_inner(false)
    }

    /// Runs a step in the configured mode and, when `with_exact`, also
    /// evaluates the exact-mode probability on the same proposal and uniform.
    pub fn step_inner(&mut self, with_exact: bool) -> Result<StepOutcome> {
        let started = Instant::now();
        let step = self.state.step_index;
        let z = self.propose()?;
        let uniform = uniform01(&mut self.seeds.stream(step, Purpose::Accept, 0));
        let interior = self
            .polytope
            .slack(&z)?
            .iter()
            .all(|&s| s >= MIN_SLACK);
        let mut outcome = StepOutcome {
            z,
            interior,
            accepted: false,
            uniform,
            probability: 0.0,
            branch: None,
            exact_probability: None,
        };
        if interior {
            let bp_z = weights_at(self.polytope, &self.config.params, &outcome.z)?;
            let f_z = check_f(self.target.eval(&outcome.z), step)?;
            let mut logdet_z = None;
            let exact = if self.config.mode == Mode::Exact || with_exact {
                let ld_theta = match self.state.logdet_gram {
                    Some(v) => v,
                    None => gram_logdet(self.polytope, &self.state.bp)?,
                };
                let ld_z = gram_logdet(self.polytope, &bp_z)?;
                logdet_z = Some(ld_z);
                let mh = self.metropolis_term(&bp_z, f_z)?;
                let delta = self.config.delta_scale * (ld_z - ld_theta);
                Some(0.5 * sigmoid(delta / 2.0) * mh)
            } else {
                None
            };
            outcome.exact_probability = exact.filter(|_| with_exact);
            let p = match self.config.mode {
                Mode::Exact => exact.unwrap_or(0.0),
                Mode::Estimated => {
                    let (p, branch) = self.estimated_with(&bp_z, f_z)?;
                    outcome.branch = Some(branch);
                    self.diag.branch_counts[branch as usize] += 1;
                    p
                }
            };
            outcome.probability = p;
            outcome.accepted = uniform < outcome.probability;
            if outcome.accepted {
                let ratio = crate::barrier::frobenius_ratio(&self.state.bp, &bp_z)?;
                self.diag.accepted_frobenius.push(ratio);
                self.state.solver.update(&bp_z.weights)?;
                self.state.bp = bp_z;
                self.state.f_value = f_z;
                if self.config.mode == Mode::Exact {
                    self.state.logdet_gram = logdet_z;
                }
                self.diag.accepted += 1;
            }
        } else {
            self.diag.out_of_k += 1;
        }
        self.diag.steps += 1;
        self.state.step_index += 1;
        self.diag.step_seconds.push(started.elapsed().as_secs_f64());
        Ok(outcome)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub samples: Vec<Vec<f64>>,
    pub final_point: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub solver_stats: SolverStats,
}

pub fn run(
    config: &WalkConfig,
    polytope: &Polytope,
    target: &Target,
    theta0: &[f64],
) -> Result<RunResult> {
    let mut chain = Chain::new(polytope, target, config.clone(), theta0)?;
    let mut samples = Vec::new();
    for i in 0..config.steps {
        chain.step()?;
        if i >= config.burn_in && (i - config.burn_in).is_multiple_of(config.thin) {
            samples.push(chain.theta().to_vec());
        }
    }
    Ok(RunResult {
        samples,
        final_point: chain.theta().to_vec(),
        solver_stats: chain.solver_stats(),
        diagnostics: chain.diag,
    })
}

/// Dense `log q(θ → z)` for the Gaussian proposal with covariance `Φ(θ)⁻¹`.
pub fn log_proposal_density(
    polytope: &Polytope,
    params: &BarrierParams,
    theta: &[f64],
    z: &[f64],
) -> Result<f64> {
    let bp = weights_at(polytope, params, theta)?;
    let phi: DenseSym = crate::barrier::phi_dense(polytope.augmented(), &bp, params)?;
    let diff: Vec<f64> = z.iter().zip(theta).map(|(a, b)| a - b).collect();
    let quad = crate::sparsela::dot(&diff, &phi.matvec(&diff)?);
    let d = theta.len() as f64;
    Ok(0.5 * logdet_dense(&phi)? - 0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * quad)
}

/// Exact acceptance probability for a pair, computed from scratch.
pub fn accept_prob_exact_pair(
    polytope: &Polytope,
    params: &BarrierParams,
    target: &Target,
    theta: &[f64],
    z: &[f64],
) -> Result<f64> {
    let config = WalkConfig {
        params: *params,
        gamma: 0.5,
        steps: 0,
        n_samples: 1,
        mode: Mode::Exact,
        seed: 0,
        solver: SolverConfig::with_backend(Backend::ExactRefactor),
        burn_in: 0,
        thin: 1,
        delta_scale: 1.0,
    };
    Chain::new(polytope, target, config, theta)?.accept_prob_exact(z)
}
