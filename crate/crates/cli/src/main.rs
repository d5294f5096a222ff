use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dikin_core::harness::bench::{BenchSettings, ALL_CELLS};
use dikin_core::harness::estimator_check::EstimatorCheckConfig;
use dikin_core::harness::report::canonical_json;
use dikin_core::harness::{
    cmd_bench, cmd_estimator_check, cmd_sample, cmd_validate, ProfileName, RunManifest, Thresholds,
};
use dikin_core::solver::Backend;
use dikin_core::walk::{Mode, PracticalConstants};
use dikin_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dikin", version, about = "Soft-threshold Dikin walk sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the walk and write samples.jsonl, metrics.json and timing.json.
    Sample(RunArgs),
    /// Run the walk and compare against the reference law; exit status 1 on failure.
    Validate(ValidateArgs),
    /// Check the log-determinant estimator on a pair of nearby points.
    EstimatorCheck(EstimatorArgs),
    /// Time the walk across solver backends and acceptance modes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Practical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Estimated,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Dense,
    Woodbury,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Estimated => Mode::Estimated,
        }
    }
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dense => Backend::ExactRefactor,
            BackendArg::Woodbury => Backend::WoodburyIncremental,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Manifest JSON; flags given on the command line override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Polytope file or builder spec (hypercube:d,h | simplex:d | l1ball:d,r | sparse:d,seed).
    #[arg(long)]
    polytope: Option<String>,
    /// uniform | linear:c1,..,cd | quadratic:beta[:mu1,..,mud] | logistic:<file>
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha_const: Option<f64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scales the determinant term; for mutation testing only.
    #[arg(long, hide = true)]
    delta_scale: Option<f64>,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match (&self.manifest, &self.polytope) {
            (Some(path), _) => RunManifest::load(path)?,
            (None, Some(p)) => RunManifest::new(p.clone()),
            (None, None) => return Err(Error::config("polytope", "pass --polytope or --manifest")),
        };
        if let Some(p) = &self.polytope {
            m.polytope = p.clone();
        }
        if let Some(t) = &self.target {
            m.target = t.clone();
        }
        if let Some(p) = self.profile {
            m.profile = match p {
                ProfileArg::Paper => ProfileName::Paper,
                ProfileArg::Practical => ProfileName::Practical,
            };
        }
        if let Some(s) = self.seed {
            m.seed = s;
        }
        let o = &mut m.overrides;
        o.steps = self.steps.or(o.steps);
        o.mode = self.mode.map(Mode::from).or(o.mode);
        o.backend = self.backend.map(Backend::from).or(o.backend);
        o.gamma = self.gamma.or(o.gamma);
        o.alpha = self.alpha.or(o.alpha);
        o.eta = self.eta.or(o.eta);
        o.alpha_const = self.alpha_const.or(o.alpha_const);
        o.burn_in = self.burn_in.or(o.burn_in);
        o.thin = self.thin.or(o.thin);
        o.delta_scale = self.delta_scale.or(o.delta_scale);
        Ok(m)
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 0.05)]
    mean_tol: f64,
    #[arg(long, default_value_t = 0.05)]
    second_moment_tol: f64,
    #[arg(long, default_value_t = 0.1)]
    tv_tol: f64,
}

#[derive(Args)]
struct EstimatorArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of single-draw samples of Y.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    /// Number of full smoothed-factor estimates.
    #[arg(long, default_value_t = 2_000)]
    factor_runs: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Polytope spec; repeat for each corpus entry. An empty corpus writes the header only.
    #[arg(long)]
    polytope: Vec<String>,
    #[arg(long, default_value_t = 50)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gamma: Option<f64>,
    /// Restrict to one backend.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Restrict to one mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DIKIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::config("DIKIN_THREADS", format!("expected a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config("DIKIN_THREADS", e.to_string()))?;
    if n == 1 {
        dikin_core::parallel::set_parallelism(dikin_core::parallel::Parallelism::Sequential);
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T, context: &str) -> Result<()> {
    print!("{}", canonical_json(value, context)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Sample(args) => {
            let out = cmd_sample(&args.manifest()?, args.out.as_deref())?;
            if args.out.is_none() {
                print!("{}", out.metrics.to_json()?);
            }
            Ok(true)
        }
        Command::Validate(args) => {
            let thresholds = Thresholds {
                mean: args.mean_tol,
                second_moment: args.second_moment_tol,
                grid_tv: args.tv_tol,
            };
            let out = cmd_validate(&args.run.manifest()?, thresholds, args.run.out.as_deref())?;
            let v = out.metrics.validation.as_ref().expect("validation outcome");
            print_json(v, "validation")?;
            Ok(v.passed)
        }
        Command::EstimatorCheck(args) => {
            let m = args.run.manifest()?;
            let cfg = EstimatorCheckConfig {
                n_draws: args.draws,
                n_factor_runs: args.factor_runs,
                gamma: args.run.gamma.unwrap_or(PracticalConstants::default().gamma),
                seed: m.seed,
            };
            let report = cmd_estimator_check(&m, &cfg, args.run.out.as_deref())?;
            print_json(&report, "estimator")?;
            Ok(report.passed)
        }
        Command::Bench(args) => {
            let mut consts = PracticalConstants::default();
            if let Some(g) = args.gamma {
                if !(g > 0.0 && g < 1.0) {
                    return Err(Error::config("gamma", format!("must lie in (0, 1), got {g}")));
                }
                consts.gamma = g;
            }
            let cells = ALL_CELLS
                .iter()
                .copied()
                .filter(|(b, m)| {
                    args.backend.is_none_or(|x| Backend::from(x) == *b)
                        && args.mode.is_none_or(|x| Mode::from(x) == *m)
                })
                .collect();
            let settings = BenchSettings {
                steps: args.steps,
                seed: args.seed,
                consts,
                cells,
            };
            let rows = cmd_bench(&args.polytope, &settings, args.out.as_deref())?;
            if args.out.is_none() {
                print!("{}", dikin_core::harness::bench::to_csv(&rows));
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
