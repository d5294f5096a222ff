//! Acceptance gate: runs each criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::Instant;

use dikin_core::barrier::{frobenius_ratio, weights_at, BarrierParams};
use dikin_core::harness::bench::{self, BenchSettings};
use dikin_core::harness::estimator_check::{check_pair, pick_pair, synthetic_factor_check, EstimatorCheckConfig};
use dikin_core::harness::{cmd_bench, cmd_sample, cmd_validate, RunManifest, Thresholds};
use dikin_core::harness::{BENCH_FILE, METRICS_FILE, SAMPLES_FILE};
use dikin_core::logdet_estimator::sigmoid;
use dikin_core::parallel::{set_parallelism, Parallelism};
use dikin_core::polytope::{build_hypercube, build_sparse_random, Polytope};
use dikin_core::solver::{Backend, SolverConfig, SolverState};
use dikin_core::sparsela::DiagWeights;
use dikin_core::target::Target;
use dikin_core::walk::{
    accept_prob_exact_pair, hyperparams, log_proposal_density, Chain, Mode, PracticalConstants, Profile,
};
use dikin_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn practical_params(p: &Polytope, target: &Target) -> BarrierParams {
    hyperparams(
        p.n_constraints(),
        p.dim(),
        p.radius(),
        target.regularity(),
        10.0,
        0.1,
        Profile::Practical(PracticalConstants::default()),
    )
    .unwrap()
    .params
}

/// Uniform law on the square. Exact mode with a smaller step constant: at
/// the default constant the chain does not mix within 2·10⁵ steps.
fn c1_uniform_square() -> Outcome {
    let mut m = RunManifest::new("hypercube:2,1");
    m.seed = 0;
    m.overrides.steps = Some(200_000);
    m.overrides.mode = Some(Mode::Exact);
    m.overrides.alpha_const = Some(0.03);
    let started = Instant::now();
    let out = cmd_validate(&m, Thresholds::default(), None).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let v = out.metrics.validation.unwrap();
    outcome(
        v.passed && secs <= 120.0,
        format!(
            "max |mean| {:.4}, max |E θ² − 1/3| {:.4}, grid TV {:.4}, {secs:.1}s",
            v.mean_error_max,
            v.second_moment_error_max,
            v.grid_tv.unwrap()
        ),
    )
}

/// Tilted interval `f = Lθ`; the quadrature oracle gives `1/L − coth L`.
fn c2_tilted_interval() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for l in [1.0f64, 4.0] {
        let mut m = RunManifest::new("hypercube:1,1");
        m.target = format!("linear:{l}");
        m.seed = 1;
        m.overrides.steps = Some(1_000_000);
        m.overrides.mode = Some(Mode::Exact);
        let started = Instant::now();
        let out = cmd_validate(&m, Thresholds::default(), None).unwrap();
        let secs = started.elapsed().as_secs_f64();
        let v = out.metrics.validation.unwrap();
        let mean = out.metrics.mean[0];
        let err = (mean - v.reference_mean[0]).abs();
        ok &= err <= 0.05 && secs <= 60.0;
        parts.push(format!(
            "L={l}: mean {mean:.4} vs {:.4} (|err| {err:.4}, {secs:.1}s)",
            v.reference_mean[0]
        ));
    }
    outcome(ok, parts.join("; "))
}

fn estimator_instances() -> Vec<(Polytope, BarrierParams, Vec<f64>, Vec<f64>)> {
    (0..10)
        .map(|i| {
            let d = 3 + i % 4;
            let p = build_sparse_random(d, 100 + i as u64).unwrap();
            let params = practical_params(&p, &Target::Uniform);
            let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
            let theta = common::random_interior(&p, p.witness(), &mut rng, 0.8);
            let z = pick_pair(&p, &params, &theta, i as u64).unwrap();
            (p, params, theta, z)
        })
        .collect()
}

fn c3_c4_estimator() -> (Outcome, Outcome) {
    let cfg = EstimatorCheckConfig {
        n_draws: 100_000,
        n_factor_runs: 200,
        gamma: 1e-3,
        seed: 3,
    };
    let (mut mean_ok, mut quad_ok, mut tail_ok) = (true, true, true);
    let (mut worst_se, mut worst_quad) = (0.0f64, 0.0f64);
    let mut worst_tail = [0.0f64; 3];
    for (p, params, theta, z) in estimator_instances() {
        let r = check_pair(&p, &params, &theta, &z, &cfg).unwrap();
        mean_ok &= r.mean_error_in_se <= 4.0;
        let qerr = (r.delta_quadrature - r.delta_exact).abs();
        quad_ok &= qerr <= 1e-6;
        worst_se = worst_se.max(r.mean_error_in_se);
        worst_quad = worst_quad.max(qerr);
        for (k, t) in r.tails.iter().enumerate() {
            tail_ok &= t.passed;
            worst_tail[k] = worst_tail[k].max(t.frequency / t.bound);
        }
    }
    (
        outcome(
            mean_ok && quad_ok,
            format!("10 instances: worst |mean Y − Δ| = {worst_se:.2} SE, worst quadrature error {worst_quad:.1e}"),
        ),
        outcome(
            tail_ok,
            format!(
                "worst frequency/bound at s=8,16,24: {:.3}, {:.3}, {:.3}",
                worst_tail[0], worst_tail[1], worst_tail[2]
            ),
        ),
    )
}

/// Synthetic draws whose spread `1/(8 ln(2/γ))` puts `|Y − Δ| > 1/8` below
/// probability γ under the tail bound.
fn c5_factor_accuracy() -> Outcome {
    let gamma: f64 = 1e-3;
    let noise = 1.0 / (8.0 * (2.0f64 / gamma).ln());
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, delta) in [0.0, 0.3, 1.0, 5.0, 30.0].into_iter().enumerate() {
        let f = synthetic_factor_check(delta, gamma, noise, 1_000_000, 50 + i as u64);
        assert!((f.target - sigmoid(delta / 2.0)).abs() < 1e-15);
        ok &= f.passed;
        parts.push(format!("Δ={delta}: {:.1e} ≤ {:.1e}", f.error, f.bound));
    }
    outcome(ok, parts.join(", "))
}

fn c6_detailed_balance() -> Outcome {
    let corpus = common::small_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..1000 {
        let p = &corpus[i % corpus.len()];
        let d = p.dim();
        let target = if i % 2 == 0 {
            Target::Uniform
        } else {
            Target::Linear(common::gaussian(&mut rng, d))
        };
        let params = BarrierParams::new(rng.random_range(0.2..2.0), rng.random_range(0.2..5.0)).unwrap();
        let theta = common::random_interior(p, p.witness(), &mut rng, 0.9);
        let z = common::random_interior(p, &theta, &mut rng, 0.5);
        let a_tz = accept_prob_exact_pair(p, &params, &target, &theta, &z).unwrap();
        let a_zt = accept_prob_exact_pair(p, &params, &target, &z, &theta).unwrap();
        let lhs = a_tz.ln() + log_proposal_density(p, &params, &theta, &z).unwrap() - target.eval(&theta);
        let rhs = a_zt.ln() + log_proposal_density(p, &params, &z, &theta).unwrap() - target.eval(&z);
        let rel = ((lhs - rhs).exp() - 1.0).abs();
        if !(rel <= 1e-10) {
            failures += 1;
        }
        worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }
    outcome(
        failures == 0,
        format!("1000 pairs, {failures} failures, worst relative gap {worst:.1e}"),
    )
}

/// The bounds exactly as stated: `‖Ψ^{-1/2}(Ψ(z)−Ψ(θ))Ψ^{-1/2}‖_F ≤ r/(1−r)²`
/// and `frobenius_ratio ≤ r/(1−r)²`, with `r = ‖θ−z‖_{Ψ(θ)}`. The provable
/// bound `(1−r)⁻² − 1` is reported alongside.
fn c7_self_concordance() -> Outcome {
    let corpus = common::small_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut v_change, mut v_sandwich, mut v_corrected) = (0, 0, 0);
    let mut n = 0;
    while n < 1000 {
        let p = &corpus[n % corpus.len()];
        let params = BarrierParams::new(rng.random_range(0.05..1.0), rng.random_range(0.1..10.0)).unwrap();
        let c = params.alpha / params.eta;
        let theta = common::random_interior(p, p.witness(), &mut rng, 0.95);
        let psi = common::psi(p, &theta, c);
        let u = common::gaussian(&mut rng, p.dim());
        let r = rng.random_range(0.0..0.99);
        let scale = r / common::local_norm(&psi, &u);
        let z: Vec<f64> = theta.iter().zip(&u).map(|(a, b)| a + scale * b).collect();
        let lhs = common::psi_change(p, &theta, &z, c);
        let ratio = frobenius_ratio(
            &weights_at(p, &params, &theta).unwrap(),
            &weights_at(p, &params, &z).unwrap(),
        )
        .unwrap();
        let stated = r / (1.0 - r).powi(2);
        let corrected = (1.0 - r).powi(-2) - 1.0;
        v_change += usize::from(lhs > stated * (1.0 + 1e-12));
        v_sandwich += usize::from(ratio > stated * (1.0 + 1e-12));
        v_corrected += usize::from(lhs.max(ratio) > corrected * (1.0 + 1e-12) + 1e-15);
        n += 1;
    }
    outcome(
        v_change == 0 && v_sandwich == 0,
        format!(
            "1000 instances: {v_change} violations of the Ψ-change bound, {v_sandwich} of the frobenius_ratio bound; \
             {v_corrected} against (1−r)⁻² − 1"
        ),
    )
}

fn c8_solver_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut lowrank = 0;
    for seq in 0..10 {
        let p = build_sparse_random(3 + seq % 4, 300 + seq as u64).unwrap();
        let aug = p.augmented().clone();
        let n = aug.n_rows();
        let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut s = SolverState::initialize(
            &DiagWeights::new(c.clone()).unwrap(),
            aug.clone(),
            SolverConfig::with_backend(Backend::WoodburyIncremental),
        )
        .unwrap();
        let dense = common::dense_a(&p);
        for _ in 0..50 {
            let dir = common::gaussian(&mut rng, n);
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let size = rng.random_range(0.0..1.0);
            for (ci, di) in c.iter_mut().zip(&dir) {
                *ci *= 1.0 + (size * di / norm).max(-0.9);
            }
            let w = DiagWeights::new(c.clone()).unwrap();
            s.update(&w).unwrap();
            let v = common::gaussian(&mut rng, p.dim());
            let x = s.solve(&v, &w).unwrap();
            let d = p.dim();
            let m = p.n_constraints();
            let cw = DMatrix::from_diagonal(&DVector::from_column_slice(&c[..m]));
            let g = dense.transpose() * cw * &dense
                + DMatrix::from_diagonal(&DVector::from_column_slice(&c[m..]));
            let exact = g.cholesky().unwrap().solve(&DVector::from_column_slice(&v));
            let err = (DVector::from_column_slice(&x) - &exact).norm() / exact.norm();
            worst = worst.max(err);
            assert_eq!(x.len(), d);
        }
        lowrank += s.stats().lowrank_updates;
        let mut stale = c.clone();
        stale[0] *= 1.5;
        let caught = matches!(
            s.solve(&vec![1.0; p.dim()], &DiagWeights::new(stale).unwrap()),
            Err(Error::StaleState { .. })
        );
        if !caught {
            return outcome(false, "stale weights were not detected".into());
        }
    }
    outcome(
        worst <= 1e-8,
        format!("10 sequences × 50 updates: worst relative error {worst:.1e}, {lowrank} low-rank updates, stale use detected"),
    )
}

fn c9_mode_coupling() -> Outcome {
    let p = build_hypercube(2, 1.0).unwrap();
    let target = Target::Uniform;
    let consts = PracticalConstants {
        gamma: 1e-8,
        ..Default::default()
    };
    let cfg = hyperparams(4, 2, p.radius(), target.regularity(), 10.0, 0.1, Profile::Practical(consts))
        .unwrap()
        .with_mode(Mode::Estimated)
        .with_seed(3);
    let mut chain = Chain::new(&p, &target, cfg, &[0.0, 0.0]).unwrap();
    let mut agree = 0;
    for _ in 0..1000 {
        let o = chain.step_inner(true).unwrap();
        let exact = o.exact_probability.is_some_and(|q| o.uniform < q);
        agree += usize::from(exact == o.accepted);
    }
    outcome(agree >= 990, format!("{agree}/1000 decisions agree"))
}

fn c10_scaling() -> Outcome {
    let ds = [50usize, 100, 200, 400];
    let corpus: Vec<String> = ds.iter().map(|d| format!("sparse:{d},1")).collect();
    let settings = BenchSettings {
        steps: 20,
        seed: 10,
        cells: vec![
            (Backend::WoodburyIncremental, Mode::Estimated),
            (Backend::ExactRefactor, Mode::Exact),
        ],
        ..Default::default()
    };
    let rows = cmd_bench(&corpus, &settings, None).unwrap();
    let pick = |b: Backend, m: Mode| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.backend == b && r.mode == m)
            .map(|r| r.seconds_per_step_median)
            .collect()
    };
    let est = pick(Backend::WoodburyIncremental, Mode::Estimated);
    let exact = pick(Backend::ExactRefactor, Mode::Exact);
    let xs: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
    let exponent = bench::fit_exponent(&xs, &est).unwrap();
    let speedup = exact[3] / est[3];
    let fmt = |v: &[f64]| v.iter().map(|t| format!("{:.2}ms", t * 1e3)).collect::<Vec<_>>().join("/");
    outcome(
        exponent < 2.5 && speedup >= 3.0,
        format!(
            "woodbury+estimated {} (exponent {exponent:.2}); dense+exact {}; ratio at d=400 {speedup:.2}",
            fmt(&est),
            fmt(&exact)
        ),
    )
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn c11_determinism() -> Outcome {
    let mut m = RunManifest::new("simplex:3");
    m.target = "linear:1,0.5,-1".into();
    m.seed = 11;
    m.overrides.steps = Some(300);
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    cmd_sample(&m, Some(dirs[0].path())).unwrap();
    cmd_sample(&m, Some(dirs[1].path())).unwrap();
    set_parallelism(Parallelism::Sequential);
    cmd_sample(&m, Some(dirs[2].path())).unwrap();
    set_parallelism(Parallelism::Rayon);
    let mut same = true;
    for f in [SAMPLES_FILE, METRICS_FILE] {
        same &= read(dirs[0].path(), f) == read(dirs[1].path(), f);
        same &= read(dirs[0].path(), f) == read(dirs[2].path(), f);
    }
    let corpus = vec!["sparse:6,1".to_string(), "hypercube:3,1".to_string()];
    let settings = BenchSettings {
        steps: 5,
        ..Default::default()
    };
    for d in &dirs[..2] {
        cmd_bench(&corpus, &settings, Some(d.path())).unwrap();
    }
    let csv = |d: &tempfile::TempDir| bench::strip_timing(&String::from_utf8(read(d.path(), BENCH_FILE)).unwrap());
    same &= csv(&dirs[0]) == csv(&dirs[1]);
    outcome(
        same,
        "samples and metrics byte-identical across runs and thread modes; bench CSV identical outside timing columns".into(),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };
    report(1, "uniform law on the square", c1_uniform_square());
    report(2, "tilted interval mean", c2_tilted_interval());
    let (c3, c4) = c3_c4_estimator();
    report(3, "estimator mean", c3);
    report(4, "estimator tails", c4);
    report(5, "smoothed-factor accuracy", c5_factor_accuracy());
    report(6, "detailed balance", c6_detailed_balance());
    report(7, "self-concordance bounds", c7_self_concordance());
    report(8, "solver fidelity", c8_solver_fidelity());
    report(9, "mode coupling", c9_mode_coupling());
    report(10, "per-step scaling", c10_scaling());
    report(11, "determinism", c11_determinism());
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "{} of {} criteria passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
