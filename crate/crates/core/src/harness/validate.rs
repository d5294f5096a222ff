//! Reference moments and grid cell masses for targets with known laws, and
//! the comparison of a sample set against them.

use serde::Serialize;

use super::geometry::{self, Point};
use crate::error::{Error, Result};
use crate::polytope::{build_simplex, Polytope};
use crate::target::Target;

pub const GRID_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub mean: f64,
    pub second_moment: f64,
    pub grid_tv: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            mean: 0.05,
            second_moment: 0.05,
            grid_tv: 0.1,
        }
    }
}

/// Histogram grid over the first one or two coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: usize,
    /// Row-major cell probabilities (first coordinate major).
    pub masses: Vec<f64>,
}

impl Grid {
    fn cell_of(&self, theta: &[f64]) -> usize {
        let mut idx = 0;
        for k in 0..self.lo.len() {
            let u = (theta[k] - self.lo[k]) / (self.hi[k] - self.lo[k]);
            let b = ((u * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1);
            idx = idx * self.bins + b;
        }
        idx
    }

    pub fn histogram(&self, samples: &[Vec<f64>]) -> Vec<f64> {
        let mut h = vec![0.0; self.masses.len()];
        for s in samples {
            h[self.cell_of(s)] += 1.0;
        }
        let n = samples.len().max(1) as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    }

    pub fn tv(&self, samples: &[Vec<f64>]) -> f64 {
        total_variation(&self.histogram(samples), &self.masses)
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    pub reference_mean: Vec<f64>,
    pub reference_second_moment: Vec<f64>,
    pub mean_error_max: f64,
    pub second_moment_error_max: f64,
    pub grid_tv: Option<f64>,
    pub thresholds: Thresholds,
    pub passed: bool,
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, g: F) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Moments and bin masses of the density `∝ e^{−g}` on `[lo, hi]`.
fn interval_law<F: Fn(f64) -> f64>(lo: f64, hi: f64, g: F, bins: usize) -> (f64, f64, Vec<f64>) {
    let shift = g(lo).min(g(hi)).min(g(0.5 * (lo + hi)));
    let w = |x: f64| (-(g(x) - shift)).exp();
    let width = (hi - lo) / bins as f64;
    let per_bin = 400;
    let mut masses = Vec::with_capacity(bins);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..bins {
        let (a, b) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
        let mass = simpson(a, b, per_bin, w);
        z += mass;
        m1 += simpson(a, b, per_bin, |x| x * w(x));
        m2 += simpson(a, b, per_bin, |x| x * x * w(x));
        masses.push(mass);
    }
    masses.iter_mut().for_each(|m| *m /= z);
    (m1 / z, m2 / z, masses)
}

/// Per-coordinate bounds when every constraint involves one coordinate.
fn box_bounds(p: &Polytope) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = p.dim();
    let mut lo = vec![f64::NEG_INFINITY; d];
    let mut hi = vec![f64::INFINITY; d];
    for i in 0..p.n_constraints() {
        let (cols, vals) = p.a().row(i);
        match (cols, vals) {
            ([c], [v]) if *v > 0.0 => hi[*c] = hi[*c].min(p.b()[i] / v),
            ([c], [v]) if *v < 0.0 => lo[*c] = lo[*c].max(p.b()[i] / v),
            ([], []) => {}
            _ => return None,
        }
    }
    lo.iter().chain(&hi).all(|x| x.is_finite()).then_some((lo, hi))
}

/// One-dimensional potential of coordinate `j` for separable targets.
fn coordinate_potential(target: &Target, j: usize) -> Option<Box<dyn Fn(f64) -> f64 + '_>> {
    match target {
        Target::Uniform => Some(Box::new(|_| 0.0)),
        Target::Linear(c) => {
            let cj = c[j];
            Some(Box::new(move |x| cj * x))
        }
        Target::Quadratic { beta, mu } => {
            let (b, m) = (*beta, mu[j]);
            Some(Box::new(move |x| 0.5 * b * (x - m) * (x - m)))
        }
        Target::Logistic(_) => None,
    }
}

fn planar_polygon(p: &Polytope) -> Vec<Point> {
    let r = p.radius() + 1.0;
    let mut poly = geometry::rect(-r, r, -r, r);
    for i in 0..p.n_constraints() {
        let (cols, vals) = p.a().row(i);
        let mut a = [0.0; 2];
        for (&c, &v) in cols.iter().zip(vals) {
            a[c] = v;
        }
        poly = geometry::clip(&poly, a, p.b()[i]);
    }
    poly
}

fn planar_reference(p: &Polytope, target: &Target) -> Result<Reference> {
    let poly = planar_polygon(p);
    if geometry::area(&poly) <= 0.0 {
        return Err(Error::UnsupportedValidation("empty planar polytope".into()));
    }
    let lo = [0, 1].map(|k| poly.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min));
    let hi = [0, 1].map(|k| poly.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max));
    let shift = target.eval(p.witness());
    let uniform = matches!(target, Target::Uniform);
    let sub = if uniform { 1 } else { 8 };
    let n = GRID_BINS;
    let (wx, wy) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
    let mut masses = vec![0.0; n * n];
    let mut mom = [0.0; 5];
    let clip_all = |cell: Vec<Point>| {
        let mut c = cell;
        for i in 0..p.n_constraints() {
            let (cols, vals) = p.a().row(i);
            let mut a = [0.0; 2];
            for (&col, &v) in cols.iter().zip(vals) {
                a[col] = v;
            }
            c = geometry::clip(&c, a, p.b()[i]);
            if c.is_empty() {
                break;
            }
        }
        c
    };
    for i in 0..n {
        for j in 0..n {
            let (x0, y0) = (lo[0] + i as f64 * wx, lo[1] + j as f64 * wy);
            for si in 0..sub {
                for sj in 0..sub {
                    let (sx, sy) = (wx / sub as f64, wy / sub as f64);
                    let ax = x0 + si as f64 * sx;
                    let ay = y0 + sj as f64 * sy;
                    let piece = clip_all(geometry::rect(ax, ax + sx, ay, ay + sy));
                    if piece.len() < 3 {
                        continue;
                    }
                    let w = |q: Point| {
                        if uniform {
                            1.0
                        } else {
                            (-(target.eval(&q) - shift)).exp()
                        }
                    };
                    let m0 = geometry::integrate(&piece, &w);
                    masses[i * n + j] += m0;
                    mom[0] += m0;
                    mom[1] += geometry::integrate(&piece, &|q| q[0] * w(q));
                    mom[2] += geometry::integrate(&piece, &|q| q[1] * w(q));
                    mom[3] += geometry::integrate(&piece, &|q| q[0] * q[0] * w(q));
                    mom[4] += geometry::integrate(&piece, &|q| q[1] * q[1] * w(q));
                }
            }
        }
    }
    let z = mom[0];
    masses.iter_mut().for_each(|m| *m /= z);
    Ok(Reference {
        mean: vec![mom[1] / z, mom[2] / z],
        second_moment: vec![mom[3] / z, mom[4] / z],
        grid: Some(Grid {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            bins: n,
            masses,
        }),
    })
}

fn is_standard_simplex(p: &Polytope) -> bool {
    build_simplex(p.dim())
        .map(|s| s.a().as_ref() == p.a().as_ref() && s.b() == p.b())
        .unwrap_or(false)
}

/// Reference law for the supported (polytope, target) pairs:
/// any one- or two-dimensional polytope with a target evaluable by
/// quadrature, axis-aligned boxes with separable targets in any dimension,
/// and the uniform law on the standard simplex.
pub fn reference_for(p: &Polytope, target: &Target) -> Result<Reference> {
    let d = p.dim();
    if d == 2 {
        return planar_reference(p, target);
    }
    if let Some((lo, hi)) = box_bounds(p) {
        let mut mean = Vec::with_capacity(d);
        let mut second = Vec::with_capacity(d);
        let mut marginals = Vec::new();
        for j in 0..d {
            let g = match coordinate_potential(target, j) {
                Some(g) => g,
                None if d == 1 => {
                    Box::new(move |x: f64| target.eval(&[x])) as Box<dyn Fn(f64) -> f64>
                }
                None => {
                    return Err(Error::UnsupportedValidation(format!(
                        "{} target on a box is not separable",
                        target.name()
                    )))
                }
            };
            let (m1, m2, masses) = interval_law(lo[j], hi[j], g, GRID_BINS);
            mean.push(m1);
            second.push(m2);
            if j < 2 {
                marginals.push(masses);
            }
        }
        let k = marginals.len();
        let masses = if k == 1 {
            marginals[0].clone()
        } else {
            marginals[0]
                .iter()
                .flat_map(|a| marginals[1].iter().map(move |b| a * b))
                .collect()
        };
        return Ok(Reference {
            mean,
            second_moment: second,
            grid: Some(Grid {
                lo: lo[..k].to_vec(),
                hi: hi[..k].to_vec(),
                bins: GRID_BINS,
                masses,
            }),
        });
    }
    if d == 1 {
        return Err(Error::UnsupportedValidation("unbounded interval".into()));
    }
    if matches!(target, Target::Uniform) && is_standard_simplex(p) {
        let df = d as f64;
        return Ok(Reference {
            mean: vec![1.0 / (df + 1.0); d],
            second_moment: vec![2.0 / ((df + 1.0) * (df + 2.0)); d],
            grid: None,
        });
    }
    Err(Error::UnsupportedValidation(format!(
        "no reference law for a {} target on this {d}-dimensional polytope",
        target.name()
    )))
}

pub fn sample_moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = samples.first().map_or(0, Vec::len);
    let n = samples.len().max(1) as f64;
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for s in samples {
        for k in 0..d {
            m1[k] += s[k];
            m2[k] += s[k] * s[k];
        }
    }
    m1.iter_mut().for_each(|x| *x /= n);
    m2.iter_mut().for_each(|x| *x /= n);
    (m1, m2)
}

pub fn compare(samples: &[Vec<f64>], reference: &Reference, thresholds: Thresholds) -> ValidationOutcome {
    let (m1, m2) = sample_moments(samples);
    let max_err = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mean_error_max = max_err(&m1, &reference.mean);
    let second_moment_error_max = max_err(&m2, &reference.second_moment);
    let grid_tv = reference.grid.as_ref().map(|g| g.tv(samples));
    let passed = !samples.is_empty()
        && mean_error_max <= thresholds.mean
        && second_moment_error_max <= thresholds.second_moment
        && grid_tv.is_none_or(|tv| tv <= thresholds.grid_tv);
    ValidationOutcome {
        reference_mean: reference.mean.clone(),
        reference_second_moment: reference.second_moment.clone(),
        mean_error_max,
        second_moment_error_max,
        grid_tv,
        thresholds,
        passed,
    }
}
