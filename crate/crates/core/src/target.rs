//! Convex potentials `f` for the target `π ∝ e^{-f}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Lipschitz(f64),
    Smooth(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticData {
    pub x: Vec<Vec<f64>>,
    /// Labels in `{-1, 1}`.
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// `f ≡ 0`. Carries a nominal Lipschitz constant of 1 for the step-size
    /// formulas.
    Uniform,
    /// `f(θ) = cᵀθ`.
    Linear(Vec<f64>),
    /// `f(θ) = β/2 ‖θ − μ‖²`.
    Quadratic { beta: f64, mu: Vec<f64> },
    /// `f(θ) = Σᵢ log(1 + exp(−yᵢ xᵢᵀθ))`.
    Logistic(LogisticData),
}

impl Target {
    pub fn validate(&self, d: usize) -> Result<()> {
        let dim_err = |field: &str, n: usize| {
            Error::config(field, format!("expected length {d}, found {n}"))
        };
        match self {
            Target::Uniform => Ok(()),
            Target::Linear(c) => {
                if c.len() != d {
                    return Err(dim_err("target.coeffs", c.len()));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("target.coeffs", "non-finite coefficient"));
                }
                Ok(())
            }
            Target::Quadratic { beta, mu } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::config("target.beta", "must be positive"));
                }
                if mu.len() != d {
                    return Err(dim_err("target.mu", mu.len()));
                }
                Ok(())
            }
            Target::Logistic(data) => {
                if data.x.len() != data.y.len() || data.x.is_empty() {
                    return Err(Error::config(
                        "target.logistic",
                        "x and y must be nonempty and equally long",
                    ));
                }
                if let Some(r) = data.x.iter().find(|r| r.len() != d) {
                    return Err(dim_err("target.logistic.x", r.len()));
                }
                if data.y.iter().any(|&y| y != 1.0 && y != -1.0) {
                    return Err(Error::config("target.logistic.y", "labels must be -1 or 1"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            Target::Uniform => 0.0,
            Target::Linear(c) => c.iter().zip(theta).map(|(a, b)| a * b).sum(),
            Target::Quadratic { beta, mu } => {
                0.5 * beta * theta.iter().zip(mu).map(|(t, m)| (t - m).powi(2)).sum::<f64>()
            }
            Target::Logistic(data) => data
                .x
                .iter()
                .zip(&data.y)
                .map(|(x, y)| {
                    let u = -y * x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
                    // log(1 + e^u) without overflow
                    u.max(0.0) + (-u.abs()).exp().ln_1p()
                })
                .sum(),
        }
    }

    pub fn regularity(&self) -> Regularity {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self {
            Target::Uniform => Regularity::Lipschitz(1.0),
            Target::Linear(c) => Regularity::Lipschitz(norm(c).max(f64::MIN_POSITIVE)),
            Target::Quadratic { beta, .. } => Regularity::Smooth(*beta),
            Target::Logistic(data) => {
                Regularity::Lipschitz(data.x.iter().map(|x| norm(x)).sum::<f64>().max(f64::MIN_POSITIVE))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Target::Uniform => "uniform",
            Target::Linear(_) => "linear",
            Target::Quadratic { .. } => "quadratic",
            Target::Logistic(_) => "logistic",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_values() {
        assert_eq!(Target::Uniform.eval(&[1.0, 2.0]), 0.0);
        assert_eq!(Target::Linear(vec![2.0, -1.0]).eval(&[1.0, 3.0]), -1.0);
        let q = Target::Quadratic {
            beta: 2.0,
            mu: vec![1.0, 0.0],
        };
        assert_eq!(q.eval(&[0.0, 1.0]), 2.0);
        let l = Target::Logistic(LogisticData {
            x: vec![vec![1.0, 0.0]],
            y: vec![1.0],
        });
        assert!((l.eval(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((l.eval(&[-800.0, 0.0]) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn regularity_constants() {
        assert_eq!(Target::Uniform.regularity(), Regularity::Lipschitz(1.0));
        assert_eq!(
            Target::Linear(vec![3.0, 4.0]).regularity(),
            Regularity::Lipschitz(5.0)
        );
        assert_eq!(
            Target::Quadratic {
                beta: 2.5,
                mu: vec![0.0]
            }
            .regularity(),
            Regularity::Smooth(2.5)
        );
    }

    #[test]
    fn validation() {
        assert!(Target::Linear(vec![1.0]).validate(2).is_err());
        assert!(Target::Quadratic {
            beta: -1.0,
            mu: vec![0.0]
        }
        .validate(1)
        .is_err());
        let bad = Target::Logistic(LogisticData {
            x: vec![vec![1.0]],
            y: vec![0.5],
        });
        assert!(bad.validate(1).is_err());
    }
}
