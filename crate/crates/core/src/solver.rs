//! Maintained solver for `Mᵀ C M` under slowly drifting positive diagonals `C`.
//!
//! The state keeps a Cholesky factor for a base diagonal `C₀`. Rows whose
//! weight moved by more than `eps_lowrank` relative to `C₀` are carried as a
//! low-rank Woodbury correction; the remaining small drift is absorbed by a
//! few steps of preconditioned conjugate gradients against the true operator,
//! so every solve meets the residual contract regardless of the threshold.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparsela::{dot, gram, norm2, Cholesky, DenseLu, DiagWeights, SparseMatrix};

/// Residual guaranteed by [`SolverState::solve`], relative to `‖v‖`.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ExactRefactor,
    WoodburyIncremental,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub backend: Backend,
    pub k_max: usize,
    pub eps_lowrank: f64,
    /// Refinement stops once the relative residual falls below this.
    pub refine_tol: f64,
    pub max_refine_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: Backend::WoodburyIncremental,
            k_max: 64,
            eps_lowrank: 0.05,
            refine_tol: 1e-11,
            max_refine_iters: 200,
        }
    }
}

impl SolverConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    solves: AtomicU64,
    refine_iterations: AtomicU64,
    fallback_factorizations: AtomicU64,
}

impl Clone for Counters {
    fn clone(&self) -> Self {
        Self {
            solves: AtomicU64::new(self.solves.load(Ordering::Relaxed)),
            refine_iterations: AtomicU64::new(self.refine_iterations.load(Ordering::Relaxed)),
            fallback_factorizations: AtomicU64::new(self.fallback_factorizations.load(Ordering::Relaxed)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SolverStats {
    pub refactorizations: u64,
    pub lowrank_updates: u64,
    pub solves: u64,
    pub refine_iterations: u64,
    /// Fresh factorizations taken when refinement against the maintained
    /// inverse failed.
    pub fallback_factorizations: u64,
}

impl SolverStats {
    pub fn merge(&mut self, other: &SolverStats) {
        self.refactorizations += other.refactorizations;
        self.lowrank_updates += other.lowrank_updates;
        self.solves += other.solves;
        self.refine_iterations += other.refine_iterations;
        self.fallback_factorizations += other.fallback_factorizations;
    }
}

#[derive(Debug, Clone)]
struct PendingRow {
    row: usize,
    delta: f64,
    /// `G₀⁻¹ m_row`
    z: Arc<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    matrix: Arc<SparseMatrix>,
    config: SolverConfig,
    base_weights: Arc<DiagWeights>,
    base_factor: Arc<Cholesky>,
    weights: DiagWeights,
    pending: Vec<PendingRow>,
    capacitance: Option<DenseLu>,
    refactorizations: u64,
    lowrank_updates: u64,
    counters: Counters,
}

/// `Σᵢ ((c'ᵢ − cᵢ)/cᵢ)²`.
pub fn frobenius_change(c_old: &DiagWeights, c_new: &DiagWeights) -> Result<f64> {
    if c_old.len() != c_new.len() {
        return Err(Error::DimensionMismatch {
            context: "frobenius_change",
            expected: c_old.len(),
            found: c_new.len(),
        });
    }
    Ok(c_old
        .as_slice()
        .iter()
        .zip(c_new.as_slice())
        .map(|(a, b)| ((b - a) / a).powi(2))
        .sum())
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}

impl SolverState {
    pub fn initialize(
        c: &DiagWeights,
        matrix: Arc<SparseMatrix>,
        config: SolverConfig,
    ) -> Result<Self> {
        if c.len() != matrix.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "solver initialize",
                expected: matrix.n_rows(),
                found: c.len(),
            });
        }
        if !(config.eps_lowrank >= 0.0 && config.refine_tol > 0.0) {
            return Err(Error::config(
                "solver",
                "eps_lowrank must be >= 0 and refine_tol > 0",
            ));
        }
        let factor = Cholesky::factor(&gram(&matrix, c)?)?;
        Ok(Self {
            matrix,
            config,
            base_weights: Arc::new(c.clone()),
            base_factor: Arc::new(factor),
            weights: c.clone(),
            pending: Vec::new(),
            capacitance: None,
            refactorizations: 1,
            lowrank_updates: 0,
            counters: Counters::default(),
        })
    }

    pub fn matrix(&self) -> &Arc<SparseMatrix> {
        &self.matrix
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn weights(&self) -> &DiagWeights {
        &self.weights
    }

    pub fn base_weights(&self) -> &DiagWeights {
        &self.base_weights
    }

    pub fn pending_rows(&self) -> Vec<usize> {
        self.pending.iter().map(|p| p.row).collect()
    }

    pub fn stats(&self) -> SolverStats {
        SolverStats {
            refactorizations: self.refactorizations,
            lowrank_updates: self.lowrank_updates,
            solves: self.counters.solves.load(Ordering::Relaxed),
            refine_iterations: self.counters.refine_iterations.load(Ordering::Relaxed),
            fallback_factorizations: self.counters.fallback_factorizations.load(Ordering::Relaxed),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_cols()
    }

    fn refactor(&mut self, c: &DiagWeights) -> Result<()> {
        let factor = Cholesky::factor(&gram(&self.matrix, c)?)?;
        self.base_factor = Arc::new(factor);
        self.base_weights = Arc::new(c.clone());
        self.weights = c.clone();
        self.pending.clear();
        self.capacitance = None;
        self.refactorizations += 1;
        Ok(())
    }

    pub fn update(&mut self, c_new: &DiagWeights) -> Result<()> {
        if c_new.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                context: "solver update",
                expected: self.weights.len(),
                found: c_new.len(),
            });
        }
        if c_new == &self.weights {
            return Ok(());
        }
        if self.config.backend == Backend::ExactRefactor || self.config.k_max == 0 {
            return self.refactor(c_new);
        }
        let eps = self.config.eps_lowrank;
        let base = self.base_weights.as_slice();
        let changed: Vec<usize> = c_new
            .as_slice()
            .iter()
            .zip(base)
            .enumerate()
            .filter(|(_, (c, c0))| (*c / *c0 - 1.0).abs() > eps)
            .map(|(i, _)| i)
            .collect();
        if changed.len() > self.config.k_max {
            return self.refactor(c_new);
        }

        let mut pending = Vec::with_capacity(changed.len());
        for &row in &changed {
            let delta = c_new.as_slice()[row] - base[row];
            let z = match self.pending.iter().find(|p| p.row == row) {
                Some(p) => Arc::clone(&p.z),
                None => {
                    let mut e = vec![0.0; self.dim()];
                    let (cols, vals) = self.matrix.row(row);
                    for (&c, &v) in cols.iter().zip(vals) {
                        e[c] = v;
                    }
                    self.base_factor.solve_in_place(&mut e);
                    Arc::new(e)
                }
            };
            pending.push(PendingRow { row, delta, z });
        }

        let capacitance = if pending.is_empty() {
            None
        } else {
            let k = pending.len();
            let mut cap = vec![0.0; k * k];
            for (i, pi) in pending.iter().enumerate() {
                for (j, pj) in pending.iter().enumerate() {
                    let u = self.matrix.row_dot(pi.row, &pj.z);
                    cap[i * k + j] = if i == j { 1.0 } else { 0.0 } + pi.delta * u;
                }
            }
            match DenseLu::factor(k, cap) {
                Some(lu) => Some(lu),
                None => return self.refactor(c_new),
            }
        };
        self.pending = pending;
        self.capacitance = capacitance;
        self.weights = c_new.clone();
        self.lowrank_updates += 1;
        Ok(())
    }

    /// Applies the maintained approximate inverse (base factor plus Woodbury
    /// correction for the pending rows).
    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        self.base_factor.solve_in_place(&mut w);
        if let Some(lu) = &self.capacitance {
            let rhs: Vec<f64> = self
                .pending
                .iter()
                .map(|p| p.delta * self.matrix.row_dot(p.row, &w))
                .collect();
            let s = lu.solve(&rhs);
            for (p, si) in self.pending.iter().zip(s) {
                for (wk, zk) in w.iter_mut().zip(p.z.iter()) {
                    *wk -= si * zk;
                }
            }
        }
        w
    }

    /// Solves `(Mᵀ C M) w = v` where `C` must be the weights this state
    /// currently represents.
    pub fn solve(&self, v: &[f64], c: &DiagWeights) -> Result<Vec<f64>> {
        if c.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                context: "solver solve weights",
                expected: self.weights.len(),
                found: c.len(),
            });
        }
        let diff = max_rel_diff(self.weights.as_slice(), c.as_slice());
        if diff > 1e-12 {
            return Err(Error::StaleState { max_rel_diff: diff });
        }
        self.refined_solve(v, self.weights.as_slice())
    }

    /// Solves `(Mᵀ C M) w = v` for weights `C` close to the represented ones,
    /// using the state only as a preconditioner. Used for the interpolated
    /// weights of the determinant estimator, where the state stays at `D(θ)`.
    pub fn solve_nearby(&self, v: &[f64], c: &DiagWeights) -> Result<Vec<f64>> {
        if c.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                context: "solver solve_nearby weights",
                expected: self.weights.len(),
                found: c.len(),
            });
        }
        self.refined_solve(v, c.as_slice())
    }

    fn refined_solve(&self, v: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                context: "solver solve",
                expected: d,
                found: v.len(),
            });
        }
        self.counters.solves.fetch_add(1, Ordering::Relaxed);
        let vnorm = norm2(v);
        if vnorm == 0.0 {
            return Ok(vec![0.0; d]);
        }
        let (x, res, iters) = self.pcg(v, c, &|r| self.precondition(r));
        let mut total_iters = iters;
        let result = if res <= SOLVE_TOLERANCE * vnorm {
            Ok(x)
        } else {
            // The maintained inverse can lose all precision when weights
            // span many orders of magnitude; a fresh factor of the true
            // operator recovers.
            self.counters.fallback_factorizations.fetch_add(1, Ordering::Relaxed);
            let fresh = Cholesky::factor(&gram(&self.matrix, &DiagWeights::new(c.to_vec())?)?)?;
            let (x2, res2, iters2) = self.pcg(v, c, &|r| fresh.solve(r).unwrap_or_else(|_| r.to_vec()));
            total_iters += iters2;
            if res2 <= SOLVE_TOLERANCE * vnorm {
                Ok(x2)
            } else {
                Err(Error::SolveDidNotConverge {
                    iterations: total_iters,
                    residual: res2.min(res) / vnorm,
                })
            }
        };
        self.counters
            .refine_iterations
            .fetch_add(total_iters as u64, Ordering::Relaxed);
        result
    }

    /// Preconditioned conjugate gradients on `Mᵀ diag(c) M`, started from
    /// the preconditioned right-hand side. Returns the best iterate, its true
    /// residual norm and the iteration count.
    fn pcg(
        &self,
        v: &[f64],
        c: &[f64],
        precond: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> (Vec<f64>, f64, usize) {
        let d = self.dim();
        let apply = |x: &[f64], out: &mut [f64]| self.matrix.weighted_normal_apply(c, x, out);
        let true_residual = |x: &[f64]| {
            let mut ax = vec![0.0; d];
            apply(x, &mut ax);
            let r: Vec<f64> = v.iter().zip(&ax).map(|(a, b)| a - b).collect();
            let n = norm2(&r);
            (r, if n.is_nan() { f64::INFINITY } else { n })
        };
        let target = self.config.refine_tol * norm2(v);

        let mut x = precond(v);
        let (mut r, mut rnorm) = true_residual(&x);
        let mut best = (rnorm, x.clone());
        let mut iters = 0usize;
        if rnorm <= target {
            return (x, rnorm, 0);
        }
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; d];
        while iters < self.config.max_refine_iters {
            iters += 1;
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0 && rz.is_finite()) {
                break;
            }
            let step = rz / pap;
            for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
                *xi += step * pi;
                *ri -= step * api;
            }
            rnorm = norm2(&r);
            if rnorm <= target {
                // confirm against the true residual before stopping
                (r, rnorm) = true_residual(&x);
                if rnorm < best.0 {
                    best = (rnorm, x.clone());
                }
                if rnorm <= target {
                    break;
                }
                // recursive residual drifted; restart from the true one
                z = precond(&r);
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
                continue;
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        // the loop may end on a recursive residual; score the last iterate
        let (_, last) = true_residual(&x);
        if last < best.0 {
            best = (last, x);
        }
        (best.1, best.0, iters)
    }
}
