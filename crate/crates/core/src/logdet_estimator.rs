//! Randomized estimates of `Δ = log det Φ(z) − log det Φ(θ)` and of the
//! smoothed determinant factor `sigmoid(Δ/2)`.
//!
//! One draw is `Y = vᵀ (Âᵀ C(t) Â)⁻¹ Âᵀ (D(z) − D(θ)) Â v` with `v` standard
//! normal, `t` uniform on `[0, 1]` and `C(t) = (1−t) D(θ) + t D(z)`. Since
//! `d/dt log det(ÂᵀC(t)Â) = tr((ÂᵀC(t)Â)⁻¹ Âᵀ(D(z)−D(θ))Â)`, averaging over
//! `t` and `v` gives `E[Y] = Δ`.
//!
//! Products of independent draws are unbiased for powers of `Δ`, which is what
//! the series estimators below are built from.

use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::barrier::BarrierPoint;
use crate::error::{Error, Result};
use crate::rng::{standard_normal_vec, uniform01};
use crate::solver::SolverState;
use crate::sparsela::{dot, DiagWeights, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSample {
    pub y: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesBranch {
    TaylorAtZero,
    ExponentialAtInfinity,
    SaturateOne,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `max(1, ⌈10 log(1/γ)⌉)`.
pub fn default_sample_count(gamma: f64) -> usize {
    let x = 10.0 * (1.0 / gamma).ln();
    // absorb rounding in ln for exact multiples such as γ = e⁻¹
    ((x - 1e-9).ceil() as usize).max(1)
}

pub fn select_branch(y1: f64, gamma: f64) -> SeriesBranch {
    if y1 < 0.25 {
        SeriesBranch::TaylorAtZero
    } else if y1 < 2.0 * (1.0 / gamma).ln() {
        SeriesBranch::ExponentialAtInfinity
    } else {
        SeriesBranch::SaturateOne
    }
}

/// Draws one `Y`. `rng` supplies `v` first, then `t`.
pub fn sample_delta<R: Rng + ?Sized>(
    from: &BarrierPoint,
    to: &BarrierPoint,
    aug: &SparseMatrix,
    solver: &SolverState,
    rng: &mut R,
) -> Result<EstimatorSample> {
    let v = standard_normal_vec(rng, aug.n_cols());
    let t = uniform01(rng);
    let y = delta_quadratic_form(from, to, aug, solver, &v, t)?;
    Ok(EstimatorSample { y, t })
}

/// `vᵀ (ÂᵀC(t)Â)⁻¹ Âᵀ(D(z)−D(θ))Â v` for given `v` and `t`.
pub fn delta_quadratic_form(
    from: &BarrierPoint,
    to: &BarrierPoint,
    aug: &SparseMatrix,
    solver: &SolverState,
    v: &[f64],
    t: f64,
) -> Result<f64> {
    let (d0, d1) = (from.weights.as_slice(), to.weights.as_slice());
    if d0.len() != aug.n_rows() || d1.len() != aug.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "estimator weights",
            expected: aug.n_rows(),
            found: d0.len().min(d1.len()),
        });
    }
    let av = aug.matvec(v)?;
    let scaled: Vec<f64> = av
        .iter()
        .zip(d0.iter().zip(d1))
        .map(|(x, (a, b))| (b - a) * x)
        .collect();
    if scaled.iter().all(|&s| s == 0.0) {
        return Ok(0.0);
    }
    let rhs = aug.matvec_t(&scaled)?;
    let ct = from.weights.interpolate(&to.weights, t)?;
    let w = solver.solve_nearby(&rhs, &ct)?;
    Ok(dot(v, &w))
}

fn coefficient_cache() -> &'static Mutex<Vec<f64>> {
    static CACHE: OnceLock<Mutex<Vec<f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// Taylor coefficients `c_ℓ` of `sigmoid(Δ/2)` at `Δ = 0`, `ℓ = 0..=n`.
///
/// With `sₙ = σ⁽ⁿ⁾(0)`, the identity `σ' = σ − σ²` gives
/// `s_{n+1} = sₙ − Σᵢ C(n,i) sᵢ s_{n−i}` from `s₀ = ½`. The scaled values
/// `gₙ = 2^{n+1} sₙ` are integers with `g_{n+1} = 2gₙ − Σᵢ C(n,i) gᵢ g_{n−i}`,
/// so the recurrence runs exactly in big integers and
/// `c_ℓ = g_ℓ / (2^{2ℓ+1} ℓ!)`. Results are cached.
pub fn taylor_coefficients(n: usize) -> Vec<f64> {
    let mut cache = coefficient_cache().lock().unwrap_or_else(|e| e.into_inner());
    if cache.len() <= n {
        let target = (n + 1).max(2 * cache.len());
        let mut g: Vec<BigInt> = vec![BigInt::from(1)];
        let mut binom: Vec<BigInt> = vec![BigInt::from(1)];
        for k in 0..target - 1 {
            let mut conv = BigInt::from(0);
            for i in 0..=k {
                conv += &binom[i] * &g[i] * &g[k - i];
            }
            g.push(BigInt::from(2) * &g[k] - conv);
            // next row of Pascal's triangle
            let mut next = vec![BigInt::from(1); k + 2];
            for i in 1..=k {
                next[i] = &binom[i - 1] + &binom[i];
            }
            binom = next;
        }
        let mut factorial = BigInt::from(1);
        let mut out = Vec::with_capacity(target);
        for (l, gl) in g.iter().enumerate() {
            if l > 0 {
                factorial *= BigInt::from(l as u64);
            }
            let den = (BigInt::from(1) << (2 * l + 1)) * &factorial;
            out.push(rational_to_f64(&BigRational::new_raw(gl.clone(), den)));
        }
        *cache = out;
    }
    cache[..=n].to_vec()
}

fn rational_to_f64(q: &BigRational) -> f64 {
    use num_bigint::Sign;
    let (num, den) = (q.numer(), q.denom());
    if num.sign() == Sign::NoSign {
        return 0.0;
    }
    // scale so the integer quotient carries ~60 significant bits
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let quotient = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let (sign, digits) = quotient.to_u64_digits();
    let mag = digits
        .iter()
        .rev()
        .fold(0.0f64, |acc, &d| acc * 18446744073709551616.0 + d as f64);
    let v = mag * 2f64.powi(-shift as i32);
    if sign == Sign::Minus {
        -v
    } else {
        v
    }
}

/// Series estimate of `sigmoid(Δ/2)` from a selector draw and `𝒩` further
/// independent draws, clamped to `[0, 1]`.
///
/// The exponential branch writes `sigmoid(Δ/2) = Σ_k (−1)^k e^{−kΔ/2}` and
/// expands each term around the selector value `c`:
/// `e^{−kΔ/2} = e^{−kc/2} Σ_ℓ (−k(Δ−c)/2)^ℓ / ℓ!`, with `(Δ−c)^ℓ` replaced by
/// `Π_{j≤ℓ}(Y_j − c)`.
pub fn estimate_factor(selector: f64, draws: &[f64], branch: SeriesBranch) -> f64 {
    let n = draws.len();
    let x = match branch {
        SeriesBranch::SaturateOne => 1.0,
        SeriesBranch::TaylorAtZero => {
            let c = taylor_coefficients(n);
            let mut prod = 1.0;
            let mut sum = c[0];
            for (l, y) in draws.iter().enumerate() {
                prod *= y;
                sum += c[l + 1] * prod;
            }
            sum
        }
        SeriesBranch::ExponentialAtInfinity => {
            let centre = selector;
            // p[ℓ] = Π_{j≤ℓ}(Y_j − c) / ℓ!
            let mut p = Vec::with_capacity(n + 1);
            p.push(1.0);
            let mut acc = 1.0;
            for (l, y) in draws.iter().enumerate() {
                acc *= (y - centre) / (l + 1) as f64;
                p.push(acc);
            }
            let k_max = 2 * n.max(1) - 1;
            let mut sum = 0.0;
            for k in 0..=k_max {
                let xk = -(k as f64) / 2.0;
                let poly = p.iter().rev().fold(0.0, |h, &c| h * xk + c);
                let term = (-(k as f64) * centre / 2.0).exp() * poly;
                if k % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            sum
        }
    };
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Unclamped deterministic evaluation of a branch at a known `Δ` (every draw
/// equal to `Δ`, selector `Δ + centre_offset`). Used to check truncation.
pub fn truncated_series(delta: f64, centre_offset: f64, n: usize, branch: SeriesBranch) -> f64 {
    match branch {
        SeriesBranch::SaturateOne => 1.0,
        SeriesBranch::TaylorAtZero => taylor_coefficients(n)
            .iter()
            .enumerate()
            .map(|(l, c)| c * delta.powi(l as i32))
            .sum(),
        SeriesBranch::ExponentialAtInfinity => {
            let centre = delta + centre_offset;
            let mut p = vec![1.0];
            for l in 0..n {
                p.push(p[l] * (delta - centre) / (l + 1) as f64);
            }
            (0..2 * n.max(1))
                .map(|k| {
                    let xk = -(k as f64) / 2.0;
                    let poly = p.iter().rev().fold(0.0, |h, &c| h * xk + c);
                    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                    s * (-(k as f64) * centre / 2.0).exp() * poly
                })
                .sum()
        }
    }
}

/// Dense-trace evaluation of the `t`-integrand,
/// `tr((ÂᵀC(t)Â)⁻¹ Âᵀ(D(z)−D(θ))Â)`.
pub fn exact_trace_integrand(
    from: &DiagWeights,
    to: &DiagWeights,
    aug: &SparseMatrix,
    t: f64,
) -> Result<f64> {
    use crate::sparsela::{factor, gram};
    let ct = from.interpolate(to, t)?;
    let f = factor(&gram(aug, &ct)?)?;
    let d = aug.n_cols();
    let diff: Vec<f64> = from
        .as_slice()
        .iter()
        .zip(to.as_slice())
        .map(|(a, b)| b - a)
        .collect();
    let mut tr = 0.0;
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let w = f.solve(&e)?;
        let aw = aug.matvec(&w)?;
        let ae = aug.matvec(&e)?;
        tr += aw.iter().zip(&ae).zip(&diff).map(|((x, y), c)| x * y * c).sum::<f64>();
    }
    Ok(tr)
}
