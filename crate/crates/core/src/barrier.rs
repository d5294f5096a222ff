//! Regularized log-barrier geometry.
//!
//! `Φ(θ) = α⁻¹ Âᵀ D(θ) Â` with `D_i = 1/s_i²` on constraint rows and
//! `D_{m+j} = α/η` on the identity block, so that
//! `Φ(θ) = α⁻¹ H(θ) + η⁻¹ I`.

use crate::error::{Error, Result};
use crate::polytope::Polytope;
use crate::sparsela::{gram, logdet_dense, DenseSym, DiagWeights, SparseMatrix};

/// Slacks below this are treated as on the boundary.
pub const MIN_SLACK: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub alpha: f64,
    pub eta: f64,
}

impl BarrierParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config("alpha", format!("must be positive, got {alpha}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config("eta", format!("must be positive, got {eta}")));
        }
        if !(alpha / eta).is_finite() || alpha / eta <= 0.0 {
            return Err(Error::config("eta", "alpha/eta must be positive and finite"));
        }
        Ok(Self { alpha, eta })
    }

    /// Weight on the identity block of `Â`.
    pub fn regularizer_weight(&self) -> f64 {
        self.alpha / self.eta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPoint {
    pub theta: Vec<f64>,
    pub slacks: Vec<f64>,
    pub weights: DiagWeights,
}

pub fn weights_at(p: &Polytope, params: &BarrierParams, theta: &[f64]) -> Result<BarrierPoint> {
    let slacks = p.slack(theta)?;
    if let Some((row, &s)) = slacks.iter().enumerate().find(|(_, s)| !(**s >= MIN_SLACK)) {
        return Err(Error::NotInterior { row, slack: s });
    }
    let reg = params.regularizer_weight();
    let w: Vec<f64> = slacks
        .iter()
        .map(|s| 1.0 / (s * s))
        .chain(std::iter::repeat_n(reg, p.dim()))
        .collect();
    Ok(BarrierPoint {
        theta: theta.to_vec(),
        slacks,
        weights: DiagWeights::new(w)?,
    })
}

/// `‖u‖²_{Φ(θ)} = α⁻¹ Σᵢ Dᵢ (Âu)ᵢ²`.
pub fn local_norm_sq(
    aug: &SparseMatrix,
    bp: &BarrierPoint,
    params: &BarrierParams,
    u: &[f64],
) -> Result<f64> {
    let au = aug.matvec(u)?;
    Ok(au
        .iter()
        .zip(bp.weights.as_slice())
        .map(|(x, w)| w * x * x)
        .sum::<f64>()
        / params.alpha)
}

/// Dense `Φ(θ)`.
pub fn phi_dense(aug: &SparseMatrix, bp: &BarrierPoint, params: &BarrierParams) -> Result<DenseSym> {
    Ok(gram(aug, &bp.weights)?.scaled(1.0 / params.alpha))
}

pub fn logdet_phi_exact(aug: &SparseMatrix, bp: &BarrierPoint, params: &BarrierParams) -> Result<f64> {
    let d = aug.n_cols() as f64;
    Ok(logdet_dense(&gram(aug, &bp.weights)?)? - d * params.alpha.ln())
}

/// `‖D(θ)⁻¹D(z) − I‖_F`.
pub fn frobenius_ratio(from: &BarrierPoint, to: &BarrierPoint) -> Result<f64> {
    Ok(crate::solver::frobenius_change(&from.weights, &to.weights)?.sqrt())
}
