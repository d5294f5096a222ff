//! Run orchestration: manifests, output files, validation against reference
//! laws, estimator checks and the per-step benchmark.

pub mod bench;
pub mod estimator_check;
pub mod geometry;
pub mod manifest;
pub mod report;
pub mod validate;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::Backend;
use crate::walk::{run, Mode, RunResult};

pub use manifest::{resolve, Overrides, ProfileName, Resolved, RunManifest};
pub use validate::{Thresholds, ValidationOutcome};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const TIMING_FILE: &str = "timing.json";
pub const BENCH_FILE: &str = "bench.csv";
pub const ESTIMATOR_FILE: &str = "estimator.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrobeniusQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

/// Wall-clock figures, kept apart from the metrics so that metrics files are
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub seconds_per_step_mean: f64,
    pub seconds_per_step_median: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub d: usize,
    pub m: usize,
    pub target: String,
    pub mode: Mode,
    pub backend: Backend,
    pub seed: u64,
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub steps: u64,
    pub n_output: usize,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub out_of_k_rate: f64,
    /// Selector branch counts: taylor, exponential, saturate.
    pub branch_counts: [u64; 3],
    pub frobenius_ratio: Option<FrobeniusQuantiles>,
    pub refactorizations: u64,
    pub lowrank_updates: u64,
    pub solves: u64,
    pub refine_iterations: u64,
    pub fallback_factorizations: u64,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub validation: Option<ValidationOutcome>,
    #[serde(skip)]
    pub timing: TimingReport,
}

impl MetricsReport {
    fn from_run(resolved: &Resolved, result: &RunResult) -> Result<Self> {
        let c = &resolved.config;
        let diag = &result.diagnostics;
        let mut fr = diag.accepted_frobenius.clone();
        fr.sort_by(f64::total_cmp);
        let frobenius_ratio = (!fr.is_empty()).then(|| FrobeniusQuantiles {
            p50: report::quantile(&fr, 0.5).unwrap_or(0.0),
            p90: report::quantile(&fr, 0.9).unwrap_or(0.0),
            p99: report::quantile(&fr, 0.99).unwrap_or(0.0),
            max: fr[fr.len() - 1],
        });
        let mut times = diag.step_seconds.clone();
        let total: f64 = times.iter().sum();
        times.sort_by(f64::total_cmp);
        let (mean, second_moment) = validate::sample_moments(&result.samples);
        let r = Self {
            d: resolved.polytope.dim(),
            m: resolved.polytope.n_constraints(),
            target: resolved.target.name().into(),
            mode: c.mode,
            backend: c.solver.backend,
            seed: c.seed,
            alpha: c.params.alpha,
            eta: c.params.eta,
            gamma: c.gamma,
            n_samples: c.n_samples,
            steps: diag.steps,
            n_output: result.samples.len(),
            accepted: diag.accepted,
            acceptance_rate: diag.acceptance_rate(),
            out_of_k_rate: diag.out_of_k_rate(),
            branch_counts: diag.branch_counts,
            frobenius_ratio,
            refactorizations: result.solver_stats.refactorizations,
            lowrank_updates: result.solver_stats.lowrank_updates,
            solves: result.solver_stats.solves,
            refine_iterations: result.solver_stats.refine_iterations,
            fallback_factorizations: result.solver_stats.fallback_factorizations,
            mean,
            second_moment,
            validation: None,
            timing: TimingReport {
                seconds_per_step_mean: total / (times.len().max(1) as f64),
                seconds_per_step_median: report::quantile(&times, 0.5).unwrap_or(0.0),
                total_seconds: total,
            },
        };
        r.check_finite()?;
        Ok(r)
    }

    fn check_finite(&self) -> Result<()> {
        let mut vals = vec![self.alpha, self.eta, self.gamma, self.acceptance_rate, self.out_of_k_rate];
        vals.extend(&self.mean);
        vals.extend(&self.second_moment);
        if let Some(q) = &self.frobenius_ratio {
            vals.extend([q.p50, q.p90, q.p99, q.max]);
        }
        if vals.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("metrics", "non-finite value in report"))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        report::canonical_json(self, METRICS_FILE)
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub samples: Vec<Vec<f64>>,
    pub metrics: MetricsReport,
}

fn sample_resolved(resolved: &Resolved) -> Result<SampleOutput> {
    let result = run(&resolved.config, &resolved.polytope, &resolved.target, &resolved.theta0)?;
    let metrics = MetricsReport::from_run(resolved, &result)?;
    Ok(SampleOutput {
        samples: result.samples,
        metrics,
    })
}

fn write_outputs(out: &SampleOutput, dir: &Path) -> Result<()> {
    report::write_file(dir, SAMPLES_FILE, &report::samples_jsonl(&out.samples)?)?;
    report::write_file(dir, METRICS_FILE, &out.metrics.to_json()?)?;
    report::write_file(
        dir,
        TIMING_FILE,
        &report::canonical_json(&out.metrics.timing, TIMING_FILE)?,
    )
}

/// Runs the walk described by `manifest`; when `out` is given, writes the
/// samples, metrics and timing files there.
pub fn cmd_sample(manifest: &RunManifest, out: Option<&Path>) -> Result<SampleOutput> {
    let resolved = resolve(manifest)?;
    let output = sample_resolved(&resolved)?;
    if let Some(dir) = out {
        write_outputs(&output, dir)?;
    }
    Ok(output)
}

/// Like [`cmd_sample`], then compares the samples with the reference law.
/// Unsupported (polytope, target) pairs fail before any sampling.
pub fn cmd_validate(
    manifest: &RunManifest,
    thresholds: Thresholds,
    out: Option<&Path>,
) -> Result<SampleOutput> {
    let resolved = resolve(manifest)?;
    let reference = validate::reference_for(&resolved.polytope, &resolved.target)?;
    let mut output = sample_resolved(&resolved)?;
    output.metrics.validation = Some(validate::compare(&output.samples, &reference, thresholds));
    if let Some(dir) = out {
        write_outputs(&output, dir)?;
    }
    Ok(output)
}

/// Estimator checks on the manifest's polytope, from the witness to a nearby
/// point drawn with the manifest's seed.
pub fn cmd_estimator_check(
    manifest: &RunManifest,
    cfg: &estimator_check::EstimatorCheckConfig,
    out: Option<&Path>,
) -> Result<estimator_check::EstimatorReport> {
    let resolved = resolve(manifest)?;
    let p = &resolved.polytope;
    if p.dim() > 6 {
        return Err(Error::UnsupportedDimension { d: p.dim(), max: 6 });
    }
    let params = resolved.config.params;
    let z = estimator_check::pick_pair(p, &params, &resolved.theta0, manifest.seed)?;
    let report = estimator_check::check_pair(p, &params, &resolved.theta0, &z, cfg)?;
    if let Some(dir) = out {
        report::write_file(dir, ESTIMATOR_FILE, &report::canonical_json(&report, ESTIMATOR_FILE)?)?;
    }
    Ok(report)
}

/// Benchmarks each polytope spec of the corpus and writes the CSV.
pub fn cmd_bench(
    corpus: &[String],
    settings: &bench::BenchSettings,
    out: Option<&Path>,
) -> Result<Vec<bench::BenchRow>> {
    let polys = corpus
        .iter()
        .map(|s| manifest::parse_polytope(s))
        .collect::<Result<Vec<_>>>()?;
    let rows = bench::bench_corpus(&polys, settings)?;
    if let Some(dir) = out {
        report::write_file(dir, BENCH_FILE, &bench::to_csv(&rows))?;
    }
    Ok(rows)
}
