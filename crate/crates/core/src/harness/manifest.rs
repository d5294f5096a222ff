use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierParams;
use crate::error::{Error, Result};
use crate::logdet_estimator::default_sample_count;
use crate::polytope::{build_hypercube, build_l1_ball, build_simplex, build_sparse_random, Polytope};
use crate::solver::Backend;
use crate::target::{LogisticData, Target};
use crate::walk::{hyperparams, Mode, PracticalConstants, Profile, WalkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Paper,
    #[default]
    Practical,
}

/// Optional settings layered over the schedule. Every field is checked when
/// the manifest is resolved and errors name the offending field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub steps: Option<u64>,
    pub n_samples: Option<usize>,
    pub mode: Option<Mode>,
    pub backend: Option<Backend>,
    pub k_max: Option<usize>,
    pub eps_lowrank: Option<f64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub alpha_const: Option<f64>,
    pub eta_const: Option<f64>,
    pub steps_const: Option<f64>,
    /// Mutation hook for the validation suite.
    pub delta_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// `hypercube:d,h`, `simplex:d`, `l1ball:d,r`, `sparse:d,seed` or a path
    /// to a polytope JSON file.
    pub polytope: String,
    /// `uniform`, `linear:c1,c2,...`, `quadratic:beta[:mu1,mu2,...]` or
    /// `logistic:<path>`.
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub profile: ProfileName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_warmness")]
    pub warmness: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub overrides: Overrides,
}

fn default_target() -> String {
    "uniform".into()
}

fn default_warmness() -> f64 {
    10.0
}

fn default_delta() -> f64 {
    0.1
}

impl RunManifest {
    pub fn new(polytope: impl Into<String>) -> Self {
        Self {
            polytope: polytope.into(),
            target: default_target(),
            profile: ProfileName::default(),
            seed: 0,
            warmness: default_warmness(),
            delta: default_delta(),
            overrides: Overrides::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub polytope: Polytope,
    pub target: Target,
    pub config: WalkConfig,
    pub theta0: Vec<f64>,
}

fn parse_list<T: std::str::FromStr>(field: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::config(field, format!("cannot parse `{t}`")))
        })
        .collect()
}

fn arity<T: Copy>(field: &str, vals: &[T], n: usize) -> Result<()> {
    if vals.len() != n {
        return Err(Error::config(
            field,
            format!("expected {n} arguments, found {}", vals.len()),
        ));
    }
    Ok(())
}

fn wrap_polytope(r: Result<Polytope>) -> Result<Polytope> {
    r.map_err(|e| match e {
        Error::Config { .. } | Error::Io { .. } | Error::Json { .. } => e,
        other => Error::config("polytope", other.to_string()),
    })
}

pub fn parse_polytope(spec: &str) -> Result<Polytope> {
    let field = "polytope";
    let builder = spec.split_once(':').and_then(|(name, args)| {
        matches!(name, "hypercube" | "simplex" | "l1ball" | "l1_ball" | "sparse").then_some((name, args))
    });
    let Some((name, args)) = builder else {
        let path = Path::new(spec);
        if !path.exists() {
            return Err(Error::config(
                field,
                format!("`{spec}` is neither a builder spec nor an existing file"),
            ));
        }
        return Polytope::load(path);
    };
    let nums: Vec<f64> = parse_list(field, args)?;
    let dim = |x: f64| -> Result<usize> {
        if x >= 1.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Error::config(field, format!("dimension must be a positive integer, got {x}")))
        }
    };
    wrap_polytope(match name {
        "hypercube" => {
            arity(field, &nums, 2)?;
            build_hypercube(dim(nums[0])?, nums[1])
        }
        "simplex" => {
            arity(field, &nums, 1)?;
            build_simplex(dim(nums[0])?)
        }
        "l1ball" | "l1_ball" => {
            arity(field, &nums, 2)?;
            build_l1_ball(dim(nums[0])?, nums[1])
        }
        _ => {
            arity(field, &nums, 2)?;
            if nums[1] < 0.0 || nums[1].fract() != 0.0 {
                return Err(Error::config(field, "seed must be a non-negative integer"));
            }
            build_sparse_random(dim(nums[0])?, nums[1] as u64)
        }
    })
}

pub fn parse_target(spec: &str, d: usize) -> Result<Target> {
    let field = "target";
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let target = match name {
        "uniform" => Target::Uniform,
        "linear" => Target::Linear(parse_list(field, rest)?),
        "quadratic" => {
            let (beta, mu) = rest.split_once(':').unwrap_or((rest, ""));
            let beta: f64 = beta
                .trim()
                .parse()
                .map_err(|_| Error::config("target.beta", format!("cannot parse `{beta}`")))?;
            let mu = if mu.is_empty() {
                vec![0.0; d]
            } else {
                parse_list("target.mu", mu)?
            };
            Target::Quadratic { beta, mu }
        }
        "logistic" => {
            let path = Path::new(rest);
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(rest, e))?;
            let data: LogisticData = serde_json::from_str(&text).map_err(|e| Error::json(rest, e))?;
            Target::Logistic(data)
        }
        other => {
            return Err(Error::config(field, format!("unknown target `{other}`")));
        }
    };
    target.validate(d)?;
    Ok(target)
}

fn positive(field: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => {
            Err(Error::config(field, format!("must be positive, got {x}")))
        }
        other => Ok(other),
    }
}

pub fn resolve(manifest: &RunManifest) -> Result<Resolved> {
    let polytope = parse_polytope(&manifest.polytope)?;
    let d = polytope.dim();
    let target = parse_target(&manifest.target, d)?;
    let o = &manifest.overrides;

    let alpha = positive("overrides.alpha", o.alpha)?;
    let eta = positive("overrides.eta", o.eta)?;
    if let Some(g) = o.gamma {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::config("overrides.gamma", format!("must lie in (0, 1), got {g}")));
        }
    }
    let defaults = PracticalConstants::default();
    let consts = PracticalConstants {
        alpha_const: positive("overrides.alpha_const", o.alpha_const)?.unwrap_or(defaults.alpha_const),
        eta_const: positive("overrides.eta_const", o.eta_const)?.unwrap_or(defaults.eta_const),
        steps_const: positive("overrides.steps_const", o.steps_const)?.unwrap_or(defaults.steps_const),
        gamma: o.gamma.unwrap_or(defaults.gamma),
    };
    let profile = match manifest.profile {
        ProfileName::Paper => Profile::Paper,
        ProfileName::Practical => Profile::Practical(consts),
    };
    let mut config = hyperparams(
        polytope.n_constraints(),
        d,
        polytope.radius(),
        target.regularity(),
        manifest.warmness,
        manifest.delta,
        profile,
    )?;
    if manifest.profile == ProfileName::Paper {
        if let Some(g) = o.gamma {
            config = config.with_gamma(g);
        }
    }
    if alpha.is_some() || eta.is_some() {
        config.params = BarrierParams::new(
            alpha.unwrap_or(config.params.alpha),
            eta.unwrap_or(config.params.eta),
        )?;
    }
    if let Some(n) = o.n_samples {
        if n == 0 {
            return Err(Error::config("overrides.n_samples", "must be at least 1"));
        }
        config.n_samples = n;
    } else {
        config.n_samples = default_sample_count(config.gamma);
    }
    if let Some(s) = o.steps {
        config.steps = s;
    }
    config.mode = o.mode.unwrap_or(Mode::Estimated);
    config.seed = manifest.seed;
    if let Some(b) = o.backend {
        config.solver.backend = b;
    }
    if let Some(k) = o.k_max {
        config.solver.k_max = k;
    }
    if let Some(e) = o.eps_lowrank {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::config("overrides.eps_lowrank", "must be non-negative"));
        }
        config.solver.eps_lowrank = e;
    }
    if let Some(b) = o.burn_in {
        config.burn_in = b;
    }
    if let Some(t) = o.thin {
        if t == 0 {
            return Err(Error::config("overrides.thin", "must be at least 1"));
        }
        config.thin = t;
    }
    if let Some(s) = positive("overrides.delta_scale", o.delta_scale)? {
        config.delta_scale = s;
    }
    config.validate()?;
    Ok(Resolved {
        theta0: polytope.witness().to_vec(),
        polytope,
        target,
        config,
    })
}
