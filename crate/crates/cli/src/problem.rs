//! Turning problem flags into a dataset and a regularizer.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use svmcut::data::{
    lambda_max_group, lambda_max_l1, load_csv, load_svmlight, synth_gaussian, synth_group_gaussian, Dataset,
    GroupStructure, SlopeWeights, SynthConfig,
};

use crate::args::{Model, ProblemArgs};
use crate::config::Config;

pub const DEFAULT_LAMBDA_FRAC: f64 = 0.01;

/// Keys accepted in a config file.
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "data",
    "synth",
    "dim",
    "groups",
    "slope-weights",
    "lambda",
    "lambda-frac",
    "seed",
    "strategy",
    "init",
    "epsilon",
    "init-size",
    "init-rows",
    "init-cap",
    "max-outer",
    "points",
    "ratio",
    "methods",
    "reps",
    "jobs",
];

pub fn load_config(path: Option<&Path>) -> Result<Config> {
    let cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(k) = cfg.keys().find(|k| !CONFIG_KEYS.contains(k)) {
        bail!("unknown config key {k:?}");
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Absolute(f64),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Synth(SynthConfig),
}

#[derive(Debug, Clone)]
pub enum WeightSpec {
    TwoLevel(usize),
    BhLog,
    File(PathBuf),
}

/// Problem flags merged with the config file.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub model: Model,
    pub source: Source,
    pub dim: Option<usize>,
    pub groups: Option<PathBuf>,
    pub weights: Option<WeightSpec>,
    /// `None` only when absolute Slope weights are read from a file.
    pub lambda: Option<LambdaSpec>,
    pub seed: u64,
}

/// Parses `n=..,p=..,k0=..,rho=..[,groups=GxS][,standardize=true|false]`.
pub fn parse_synth(spec: &str, seed: u64) -> Result<SynthConfig> {
    let mut n = None;
    let mut p = None;
    let mut k0 = None;
    let mut rho = 0.1;
    let mut groups = None;
    let mut standardize = true;
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("synth spec item {item:?} is not key=value"))?;
        let bad = |e: &dyn std::fmt::Display| anyhow!("synth spec {key}={value}: {e}");
        match key.trim() {
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "p" => p = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "k0" => k0 = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "rho" => rho = value.parse::<f64>().map_err(|e| bad(&e))?,
            "standardize" => standardize = value.parse::<bool>().map_err(|e| bad(&e))?,
            "groups" => {
                let (g, s) = value
                    .split_once('x')
                    .ok_or_else(|| bad(&"expected GxS, e.g. 200x10"))?;
                groups = Some((g.parse::<usize>().map_err(|e| bad(&e))?, s.parse::<usize>().map_err(|e| bad(&e))?));
            }
            other => bail!("unknown synth spec key {other:?}"),
        }
    }
    let n = n.ok_or_else(|| anyhow!("synth spec needs n"))?;
    let mut cfg = match groups {
        Some((g, s)) => {
            if let Some(p) = p {
                ensure!(p == g * s, "synth spec p={p} does not equal {g}x{s}");
            }
            SynthConfig::grouped(n, g, s, k0.unwrap_or(g.min(10)), rho, seed)
        }
        None => {
            let p = p.ok_or_else(|| anyhow!("synth spec needs p"))?;
            SynthConfig::new(n, p, k0.unwrap_or(p.min(10)), rho, seed)
        }
    };
    cfg.standardize = standardize;
    Ok(cfg)
}

fn parse_weights(spec: &str) -> Result<WeightSpec> {
    if spec == "bh-log" {
        return Ok(WeightSpec::BhLog);
    }
    if let Some(k0) = spec.strip_prefix("two-level:") {
        let k0 = k0.parse::<usize>().with_context(|| format!("bad two-level size {k0:?}"))?;
        return Ok(WeightSpec::TwoLevel(k0));
    }
    Ok(WeightSpec::File(PathBuf::from(spec)))
}

pub fn resolve_problem(args: &ProblemArgs, cfg: &Config) -> Result<ProblemSpec> {
    let model = cfg.pick_or(args.model, "model", Model::L1)?;
    let seed = cfg.pick_or(args.seed, "seed", 0u64)?;
    let (data, synth) = if args.data.is_some() || args.synth.is_some() {
        (args.data.clone(), args.synth.clone())
    } else {
        (cfg.pick::<PathBuf>(None, "data")?, cfg.pick::<String>(None, "synth")?)
    };
    let source = match (data, synth) {
        (Some(_), Some(_)) => bail!("--data and --synth are mutually exclusive"),
        (Some(path), None) => Source::File(path),
        (None, Some(spec)) => Source::Synth(parse_synth(&spec, seed)?),
        (None, None) => bail!("one of --data or --synth is required"),
    };
    let weights = cfg
        .pick(args.slope_weights.clone(), "slope-weights")?
        .map(|s: String| parse_weights(&s))
        .transpose()?;
    let (lambda, frac) = if args.lambda.is_some() || args.lambda_frac.is_some() {
        (args.lambda, args.lambda_frac)
    } else {
        (cfg.pick::<f64>(None, "lambda")?, cfg.pick::<f64>(None, "lambda-frac")?)
    };
    let explicit = match (lambda, frac) {
        (Some(_), Some(_)) => bail!("--lambda and --lambda-frac are mutually exclusive"),
        (Some(l), None) => Some(LambdaSpec::Absolute(l)),
        (None, Some(f)) => Some(LambdaSpec::Fraction(f)),
        (None, None) => None,
    };
    if let Some(LambdaSpec::Absolute(v) | LambdaSpec::Fraction(v)) = explicit {
        ensure!(v.is_finite() && v >= 0.0, "regularization level {v} must be finite and nonnegative");
    }
    let lambda = match (model, &weights) {
        (Model::Slope, None) => bail!("--model slope needs --slope-weights"),
        (Model::Slope, Some(WeightSpec::File(_))) => {
            ensure!(explicit.is_none(), "weights read from a file are absolute; drop --lambda/--lambda-frac");
            None
        }
        _ => Some(explicit.unwrap_or(LambdaSpec::Fraction(DEFAULT_LAMBDA_FRAC))),
    };
    Ok(ProblemSpec {
        model,
        source,
        dim: cfg.pick(args.dim, "dim")?,
        groups: cfg.pick(args.groups.clone(), "groups")?,
        weights,
        lambda,
        seed,
    })
}

/// A loaded instance. Slope weights are either an absolute vector or a
/// shape with smallest entry 1 that is scaled by lambda.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: Model,
    pub data: Dataset,
    pub groups: Option<GroupStructure>,
    pub shape: Option<SlopeWeights>,
    pub absolute_weights: Option<SlopeWeights>,
    pub lambda: f64,
    pub lambda_max: f64,
}

/// Regularizer at one lambda.
#[derive(Debug, Clone)]
pub enum Reg<'a> {
    L1(f64),
    Group(&'a GroupStructure, f64),
    Slope(SlopeWeights),
}

impl Problem {
    pub fn reg_at(&self, lambda: f64) -> Result<Reg<'_>> {
        Ok(match self.model {
            Model::L1 => Reg::L1(lambda),
            Model::Group => Reg::Group(self.groups.as_ref().expect("group model has groups"), lambda),
            Model::Slope => match (&self.absolute_weights, &self.shape) {
                (Some(w), _) => Reg::Slope(w.clone()),
                (None, Some(shape)) => Reg::Slope(shape.scaled(lambda)?),
                (None, None) => unreachable!("slope problem without weights"),
            },
        })
    }

    pub fn reg(&self) -> Result<Reg<'_>> {
        self.reg_at(self.lambda)
    }

    pub fn scalable(&self) -> bool {
        self.absolute_weights.is_none()
    }
}

fn load_data(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let d = if csv {
        ensure!(dim.is_none(), "--dim applies to svmlight input only");
        load_csv(path)
    } else {
        load_svmlight(path, dim)
    };
    d.with_context(|| format!("loading {}", path.display()))
}

/// Loads the instance; `seed` replaces the spec's seed for synthetic data.
pub fn load_problem(spec: &ProblemSpec, seed: u64) -> Result<Problem> {
    let (data, synth_groups) = match &spec.source {
        Source::File(path) => (load_data(path, spec.dim)?, None),
        Source::Synth(cfg) => {
            let cfg = SynthConfig { seed, ..cfg.clone() };
            if cfg.groups.is_some() {
                let (d, g) = synth_group_gaussian(&cfg)?;
                (d, Some(g))
            } else {
                (synth_gaussian(&cfg)?, None)
            }
        }
    };
    data.check_both_classes()?;
    let p = data.p();
    let groups = match (&spec.groups, synth_groups) {
        (Some(path), _) => Some(
            GroupStructure::load(path, p).with_context(|| format!("loading groups {}", path.display()))?,
        ),
        (None, g) => g,
    };
    if spec.model == Model::Group {
        ensure!(groups.is_some(), "--model group needs --groups or a grouped --synth spec");
    }
    let lambda_max = match spec.model {
        Model::Group => lambda_max_group(&data, groups.as_ref().expect("checked")),
        _ => lambda_max_l1(&data),
    };
    let (mut shape, mut absolute_weights) = (None, None);
    if spec.model == Model::Slope {
        match spec.weights.as_ref().expect("checked when resolving") {
            WeightSpec::File(path) => {
                let w = SlopeWeights::load(path).with_context(|| format!("loading weights {}", path.display()))?;
                ensure!(w.len() == p, "weight file has {} entries, expected {p}", w.len());
                absolute_weights = Some(w);
            }
            WeightSpec::TwoLevel(k0) => {
                ensure!(*k0 <= p, "two-level size {k0} exceeds p={p}");
                shape = Some(SlopeWeights::two_level(p, *k0, 1.0)?);
            }
            WeightSpec::BhLog => {
                let w = SlopeWeights::bh_log(p, 1.0)?;
                shape = Some(w.scaled(1.0 / w.min())?);
            }
        }
    }
    let lambda = match spec.lambda {
        Some(LambdaSpec::Absolute(l)) => l,
        Some(LambdaSpec::Fraction(f)) => f * lambda_max,
        None => absolute_weights.as_ref().map_or(0.0, SlopeWeights::min),
    };
    Ok(Problem {
        model: spec.model,
        data,
        groups,
        shape,
        absolute_weights,
        lambda,
        lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_parsing() {
        let c = parse_synth("n=100,p=2000,k0=10,rho=0.1", 4).unwrap();
        assert_eq!((c.n, c.p, c.k0, c.rho, c.seed, c.groups), (100, 2000, 10, 0.1, 4, None));
        assert!(c.standardize);
        let g = parse_synth("n=50, groups=20x5, k0=2, standardize=false", 0).unwrap();
        assert_eq!((g.p, g.groups, g.standardize), (100, Some((20, 5)), false));
        assert!(parse_synth("n=50,groups=20x5,p=99", 0).is_err());
        assert!(parse_synth("p=5", 0).is_err());
        assert!(parse_synth("n=5", 0).is_err());
        assert!(parse_synth("n=5,p=3,q=1", 0).is_err());
        assert!(parse_synth("n=5,p=x", 0).is_err());
    }

    #[test]
    fn lambda_and_weight_resolution() {
        let base = ProblemArgs {
            synth: Some("n=10,p=4".into()),
            ..Default::default()
        };
        let cfg = Config::default();
        let spec = resolve_problem(&base, &cfg).unwrap();
        assert_eq!(spec.lambda, Some(LambdaSpec::Fraction(DEFAULT_LAMBDA_FRAC)));
        let slope = ProblemArgs {
            model: Some(Model::Slope),
            ..base.clone()
        };
        assert!(resolve_problem(&slope, &cfg).is_err());
        let from_cfg = Config::parse("lambda=0.5\nlambda-frac=0.1").unwrap();
        assert!(resolve_problem(&base, &from_cfg).is_err());
        let cli_wins = ProblemArgs {
            lambda: Some(2.0),
            ..base.clone()
        };
        assert_eq!(resolve_problem(&cli_wins, &from_cfg).unwrap().lambda, Some(LambdaSpec::Absolute(2.0)));
        let file_weights = ProblemArgs {
            slope_weights: Some("w.txt".into()),
            lambda: Some(1.0),
            ..slope
        };
        assert!(resolve_problem(&file_weights, &cfg).is_err());
    }
}
