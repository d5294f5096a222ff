//! Shared helpers and dense oracles for the integration tests.
#![allow(dead_code)]

use dikin_core::polytope::{build_hypercube, build_l1_ball, build_simplex, build_sparse_random, Polytope};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Small builder corpus, d ≤ 6.
pub fn small_corpus() -> Vec<Polytope> {
    vec![
        build_hypercube(1, 1.0).unwrap(),
        build_hypercube(2, 1.0).unwrap(),
        build_hypercube(4, 0.5).unwrap(),
        build_simplex(2).unwrap(),
        build_simplex(5).unwrap(),
        build_l1_ball(3, 1.0).unwrap(),
        build_sparse_random(3, 11).unwrap(),
        build_sparse_random(6, 12).unwrap(),
    ]
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn dense_a(p: &Polytope) -> DMatrix<f64> {
    let rows = p.a().to_dense();
    DMatrix::from_fn(p.n_constraints(), p.dim(), |i, j| rows[i][j])
}

pub fn slacks(p: &Polytope, theta: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(p.b()) - dense_a(p) * DVector::from_column_slice(theta)
}

/// Largest `τ` with `θ + τu` inside the closure.
pub fn ray_length(p: &Polytope, theta: &[f64], u: &[f64]) -> f64 {
    let s = slacks(p, theta);
    let au = dense_a(p) * DVector::from_column_slice(u);
    (0..s.len())
        .filter(|&i| au[i] > 0.0)
        .map(|i| s[i] / au[i])
        .fold(f64::INFINITY, f64::min)
}

/// Interior point reached from `from` along a random ray, at a uniform
/// fraction up to `max_frac` of the distance to the boundary.
pub fn random_interior(p: &Polytope, from: &[f64], rng: &mut ChaCha8Rng, max_frac: f64) -> Vec<f64> {
    let u = gaussian(rng, p.dim());
    let tau = ray_length(p, from, &u);
    let t = rng.random_range(0.0..max_frac) * tau;
    from.iter().zip(&u).map(|(a, b)| a + t * b).collect()
}

/// `Ψ(θ) = Aᵀ S(θ)⁻² A + c I`.
pub fn psi(p: &Polytope, theta: &[f64], c: f64) -> DMatrix<f64> {
    let a = dense_a(p);
    let s = slacks(p, theta);
    let w = DMatrix::from_diagonal(&s.map(|x| 1.0 / (x * x)));
    a.transpose() * w * &a + DMatrix::identity(p.dim(), p.dim()) * c
}

pub fn local_norm(m: &DMatrix<f64>, h: &[f64]) -> f64 {
    let h = DVector::from_column_slice(h);
    (h.transpose() * m * &h)[(0, 0)].sqrt()
}

/// `‖Ψ(θ)^{-1/2}(Ψ(z) − Ψ(θ))Ψ(θ)^{-1/2}‖_F` through the symmetric square root.
pub fn psi_change(p: &Polytope, theta: &[f64], z: &[f64], c: f64) -> f64 {
    let p0 = psi(p, theta, c);
    let p1 = psi(p, z, c);
    let eig = p0.clone().symmetric_eigen();
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    (&inv_sqrt * (p1 - p0) * &inv_sqrt).norm()
}

pub fn logdet(m: &DMatrix<f64>) -> f64 {
    let l = m.clone().cholesky().expect("positive definite").l();
    2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>()
}
