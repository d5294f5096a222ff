//! Per-step cost across solver backends and acceptance modes.

use std::time::Instant;

use serde::Serialize;

use super::report::csv;
use crate::error::{Error, Result};
use crate::polytope::Polytope;
use crate::solver::Backend;
use crate::target::Target;
use crate::walk::{hyperparams, Chain, Mode, PracticalConstants, Profile};

pub const HEADER: [&str; 15] = [
    "d",
    "m",
    "nnz",
    "backend",
    "mode",
    "gamma",
    "n_samples",
    "steps",
    "accepted",
    "refactorizations",
    "lowrank_updates",
    "solves",
    "refine_iterations",
    "seconds_per_step_mean",
    "seconds_per_step_median",
];

/// Columns excluded from determinism comparisons.
pub const TIMING_COLUMNS: [&str; 2] = ["seconds_per_step_mean", "seconds_per_step_median"];

pub const ALL_CELLS: [(Backend, Mode); 4] = [
    (Backend::ExactRefactor, Mode::Exact),
    (Backend::ExactRefactor, Mode::Estimated),
    (Backend::WoodburyIncremental, Mode::Exact),
    (Backend::WoodburyIncremental, Mode::Estimated),
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub steps: u64,
    pub seed: u64,
    pub consts: PracticalConstants,
    pub cells: Vec<(Backend, Mode)>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            steps: 50,
            seed: 0,
            consts: PracticalConstants::default(),
            cells: ALL_CELLS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub d: usize,
    pub m: usize,
    pub nnz: usize,
    pub backend: Backend,
    pub mode: Mode,
    pub gamma: f64,
    pub n_samples: usize,
    pub steps: u64,
    pub accepted: u64,
    pub refactorizations: u64,
    pub lowrank_updates: u64,
    pub solves: u64,
    pub refine_iterations: u64,
    pub seconds_per_step_mean: f64,
    pub seconds_per_step_median: f64,
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::ExactRefactor => "dense",
        Backend::WoodburyIncremental => "woodbury",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Exact => "exact",
        Mode::Estimated => "estimated",
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every cell of `settings` on one polytope with the uniform target,
/// starting from the witness.
pub fn bench_polytope(p: &Polytope, settings: &BenchSettings) -> Result<Vec<BenchRow>> {
    let target = Target::Uniform;
    let mut rows = Vec::with_capacity(settings.cells.len());
    for &(backend, mode) in &settings.cells {
        let config = hyperparams(
            p.n_constraints(),
            p.dim(),
            p.radius(),
            target.regularity(),
            1.0,
            0.1,
            Profile::Practical(settings.consts),
        )?
        .with_backend(backend)
        .with_mode(mode)
        .with_seed(settings.seed)
        .with_steps(settings.steps);
        let mut chain = Chain::new(p, &target, config.clone(), p.witness())?;
        let started = Instant::now();
        for _ in 0..settings.steps {
            chain.step()?;
        }
        let total = started.elapsed().as_secs_f64();
        let diag = chain.diagnostics();
        let stats = chain.solver_stats();
        let mut times = diag.step_seconds.clone();
        let steps = settings.steps.max(1) as f64;
        rows.push(BenchRow {
            d: p.dim(),
            m: p.n_constraints(),
            nnz: p.a().nnz(),
            backend,
            mode,
            gamma: config.gamma,
            n_samples: config.n_samples,
            steps: settings.steps,
            accepted: diag.accepted,
            refactorizations: stats.refactorizations,
            lowrank_updates: stats.lowrank_updates,
            solves: stats.solves,
            refine_iterations: stats.refine_iterations,
            seconds_per_step_mean: total / steps,
            seconds_per_step_median: median(&mut times),
        });
    }
    Ok(rows)
}

pub fn bench_corpus(corpus: &[Polytope], settings: &BenchSettings) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for p in corpus {
        rows.extend(bench_polytope(p, settings)?);
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let fmt = |x: f64| format!("{x:e}");
    let body: Vec<[String; 15]> = rows
        .iter()
        .map(|r| {
            [
                r.d.to_string(),
                r.m.to_string(),
                r.nnz.to_string(),
                backend_name(r.backend).into(),
                mode_name(r.mode).into(),
                fmt(r.gamma),
                r.n_samples.to_string(),
                r.steps.to_string(),
                r.accepted.to_string(),
                r.refactorizations.to_string(),
                r.lowrank_updates.to_string(),
                r.solves.to_string(),
                r.refine_iterations.to_string(),
                fmt(r.seconds_per_step_mean),
                fmt(r.seconds_per_step_median),
            ]
        })
        .collect();
    csv(HEADER, &body)
}

/// Removes the timing columns from a CSV produced by [`to_csv`].
pub fn strip_timing(text: &str) -> String {
    let keep: Vec<bool> = HEADER.iter().map(|h| !TIMING_COLUMNS.contains(h)).collect();
    text.lines()
        .map(|line| {
            line.split(',')
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(f, _)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Least-squares slope of `log t` against `log d`.
pub fn fit_exponent(ds: &[f64], times: &[f64]) -> Result<f64> {
    if ds.len() != times.len() || ds.len() < 2 {
        return Err(Error::config("bench", "need at least two (d, time) points"));
    }
    if ds.iter().chain(times).any(|x| !(*x > 0.0)) {
        return Err(Error::config("bench", "sizes and times must be positive"));
    }
    let xs: Vec<f64> = ds.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = times.iter().map(|x| x.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::build_sparse_random;

    #[test]
    fn exponent_of_power_law() {
        let ds = [50.0, 100.0, 200.0, 400.0];
        let ts: Vec<f64> = ds.iter().map(|d: &f64| 3e-7 * d.powf(1.7)).collect();
        assert!((fit_exponent(&ds, &ts).unwrap() - 1.7).abs() < 1e-12);
        assert!(fit_exponent(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn empty_corpus_gives_header() {
        let rows = bench_corpus(&[], &BenchSettings::default()).unwrap();
        assert_eq!(to_csv(&rows), format!("{}\n", HEADER.join(",")));
    }

    #[test]
    fn rows_are_deterministic_modulo_timing() {
        let p = build_sparse_random(8, 1).unwrap();
        let s = BenchSettings {
            steps: 10,
            ..Default::default()
        };
        let a = to_csv(&bench_polytope(&p, &s).unwrap());
        let b = to_csv(&bench_polytope(&p, &s).unwrap());
        assert_eq!(a.lines().count(), 5);
        assert_eq!(strip_timing(&a), strip_timing(&b));
    }
}
