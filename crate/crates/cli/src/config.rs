//! Run configuration: JSON file values overridden by command-line flags.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use critscale_core::analysis::SweepConfig;
use critscale_core::entanglement::ZeroModeTreatment;
use critscale_core::models::DEFAULT_MAX_SITES;
use critscale_core::solver::SolverConfig;
use critscale_core::{Boundary, ChainSpec, Execution};

pub const MAX_SITES_ENV: &str = "CRITSCALE_MAX_SITES";
pub const DEFAULT_BLOCKS: usize = 10;
pub const DEFAULT_GRID: &str = "4..256:x2";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// harmonic or xy
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fermion momentum quantization: periodic or antiperiodic
    #[arg(long)]
    pub boundary: Option<String>,
    /// Number of blocks N
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Block sizes: comma list and/or ranges such as 4..256:x2
    #[arg(long)]
    pub ell: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// Critical zero-mode treatment: project or subtract
    #[arg(long = "zero-mode")]
    pub zero_mode: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum EllField {
    List(Vec<usize>),
    Single(usize),
    Expr(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
    boundary: Option<String>,
    blocks: Option<usize>,
    ell: Option<EllField>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    damping: Option<f64>,
    zero_mode: Option<String>,
    workers: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ChainSpec,
    pub n_blocks: usize,
    pub ells: Vec<usize>,
    pub sweep: SweepConfig,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses `4,8,16`, `4..256:x2` (geometric), `2..6` and `2..10:+2`, or any
/// comma-separated mix. The result must be strictly increasing.
pub fn parse_ell_list(text: &str) -> Result<Vec<usize>, ConfigError> {
    let err = |m: String| ConfigError::new("ell", m);
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(err(format!("empty entry in {text:?}")));
        }
        let Some((start, rest)) = item.split_once("..") else {
            out.push(item.parse().map_err(|_| err(format!("{item:?} is not a block size")))?);
            continue;
        };
        let (end, step) = match rest.split_once(':') {
            Some((e, s)) => (e, Some(s)),
            None => (rest, None),
        };
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| err(format!("bad range {item:?}")));
        let (a, b) = (parse(start)?, parse(end)?);
        if a == 0 || a > b {
            return Err(err(format!("bad range {item:?}")));
        }
        match step {
            None => out.extend(a..=b),
            Some(s) if s.starts_with('x') => {
                let f = parse(&s[1..])?;
                if f < 2 {
                    return Err(err(format!("geometric factor must be at least 2 in {item:?}")));
                }
                let mut v = a;
                while v <= b {
                    out.push(v);
                    v = v.checked_mul(f).ok_or_else(|| err("range overflows".into()))?;
                }
            }
            Some(s) if s.starts_with('+') => {
                let d = parse(&s[1..])?;
                if d == 0 {
                    return Err(err(format!("step must be positive in {item:?}")));
                }
                out.extend((a..=b).step_by(d));
            }
            Some(_) => return Err(err(format!("step in {item:?} must be xK or +K"))),
        }
    }
    if out.contains(&0) {
        return Err(err("block sizes must be positive".into()));
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(err(format!("{text:?} is not strictly increasing")));
    }
    Ok(out)
}

fn parse_boundary(s: &str) -> Result<Boundary, ConfigError> {
    match s {
        "periodic" => Ok(Boundary::Periodic),
        "antiperiodic" => Ok(Boundary::Antiperiodic),
        other => Err(ConfigError::new("boundary", format!("{other:?} is not periodic or antiperiodic"))),
    }
}

fn parse_zero_mode(s: &str) -> Result<ZeroModeTreatment, ConfigError> {
    match s {
        "project" => Ok(ZeroModeTreatment::Project),
        "subtract" => Ok(ZeroModeTreatment::Subtract),
        other => Err(ConfigError::new("zero-mode", format!("{other:?} is not project or subtract"))),
    }
}

pub fn max_sites_from_env() -> Result<usize, ConfigError> {
    match std::env::var(MAX_SITES_ENV) {
        Err(_) => Ok(DEFAULT_MAX_SITES),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ConfigError::new(MAX_SITES_ENV, format!("{v:?} is not a positive integer"))),
        },
    }
}

fn load_file(path: &PathBuf) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))
}

fn core_error(e: critscale_core::Error) -> ConfigError {
    match e {
        critscale_core::Error::InvalidParameter { field, message } => ConfigError::new(field, message),
        other => ConfigError::new("config", other.to_string()),
    }
}

impl RunConfig {
    /// Merges file and flags. `default_grid` applies when no ℓ is given.
    pub fn resolve(args: &RunArgs, default_grid: Option<&str>) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let model = args
            .model
            .clone()
            .or(file.model)
            .ok_or_else(|| ConfigError::new("model", "missing (harmonic or xy)"))?;
        let alpha = args.alpha.or(file.alpha);
        let gamma = args.gamma.or(file.gamma);
        let lambda = args.lambda.or(file.lambda);
        let boundary = args.boundary.clone().or(file.boundary);
        let spec = match model.as_str() {
            "harmonic" => {
                for (name, v) in [("gamma", gamma.is_some()), ("lambda", lambda.is_some()), ("boundary", boundary.is_some())] {
                    if v {
                        return Err(ConfigError::new(name, "not a parameter of the harmonic model"));
                    }
                }
                let alpha = alpha.ok_or_else(|| ConfigError::new("alpha", "required for the harmonic model"))?;
                ChainSpec::harmonic(alpha).map_err(core_error)?
            }
            "xy" => {
                if alpha.is_some() {
                    return Err(ConfigError::new("alpha", "not a parameter of the xy model"));
                }
                let gamma = gamma.ok_or_else(|| ConfigError::new("gamma", "required for the xy model"))?;
                let lambda = lambda.ok_or_else(|| ConfigError::new("lambda", "required for the xy model"))?;
                let boundary = boundary.as_deref().map(parse_boundary).transpose()?.unwrap_or_default();
                ChainSpec::xy(gamma, lambda, boundary).map_err(core_error)?
            }
            other => return Err(ConfigError::new("model", format!("{other:?} is not harmonic or xy"))),
        };

        let n_blocks = args.blocks.or(file.blocks).unwrap_or(DEFAULT_BLOCKS);
        if n_blocks == 0 {
            return Err(ConfigError::new("blocks", "must be at least 1"));
        }
        let ells = match (&args.ell, file.ell) {
            (Some(text), _) => parse_ell_list(text)?,
            (None, Some(EllField::Expr(text))) => parse_ell_list(&text)?,
            (None, Some(EllField::Single(l))) => parse_ell_list(&l.to_string())?,
            (None, Some(EllField::List(list))) => {
                let text: Vec<String> = list.iter().map(usize::to_string).collect();
                parse_ell_list(&text.join(","))?
            }
            (None, None) => match default_grid {
                Some(g) => parse_ell_list(g)?,
                None => return Err(ConfigError::new("ell", "missing")),
            },
        };

        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            max_iterations: args.max_iter.or(file.max_iter).unwrap_or(defaults.max_iterations),
            residual_tolerance: args.tol.or(file.tol).unwrap_or(defaults.residual_tolerance),
            damping: args.damping.or(file.damping).unwrap_or(defaults.damping),
            execution: Execution::Parallel,
            ..defaults
        };
        if solver.max_iterations == 0 {
            return Err(ConfigError::new("max-iter", "must be at least 1"));
        }
        if !(solver.residual_tolerance > 0.0 && solver.residual_tolerance.is_finite()) {
            return Err(ConfigError::new("tol", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&solver.damping) {
            return Err(ConfigError::new("damping", "must lie in [0, 1)"));
        }
        let zero_mode = args
            .zero_mode
            .clone()
            .or(file.zero_mode)
            .as_deref()
            .map(parse_zero_mode)
            .transpose()?
            .unwrap_or_default();
        let workers = args.workers.or(file.workers);
        if workers == Some(0) {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        let max_sites = max_sites_from_env()?;
        critscale_core::analysis::validate_grid(n_blocks, &ells, max_sites).map_err(core_error)?;
        Ok(Self {
            spec,
            n_blocks,
            ells,
            sweep: SweepConfig {
                solver,
                max_sites,
                zero_mode,
            },
            workers,
            out: args.out.clone().or(file.out),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ell_expressions() {
        assert_eq!(parse_ell_list("4..256:x2").unwrap(), vec![4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(parse_ell_list("4,8,16").unwrap(), vec![4, 8, 16]);
        assert_eq!(parse_ell_list("3..100:x3").unwrap(), vec![3, 9, 27, 81]);
        assert_eq!(parse_ell_list("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_ell_list("2..9:+3,16").unwrap(), vec![2, 5, 8, 16]);
        assert_eq!(parse_ell_list("32").unwrap(), vec![32]);
        for bad in ["", "4,,8", "8,4", "0", "a", "4..2", "4..8:x1", "4..8:y2", "4..8:+0", "4,4"] {
            assert!(parse_ell_list(bad).is_err(), "{bad:?}");
        }
    }

    fn args(model: &str) -> RunArgs {
        RunArgs {
            model: Some(model.into()),
            ..RunArgs::default()
        }
    }

    #[test]
    fn flags_build_a_run() {
        let mut a = args("xy");
        a.gamma = Some(1.0);
        a.lambda = Some(1.0);
        a.boundary = Some("antiperiodic".into());
        a.ell = Some("8".into());
        a.blocks = Some(4);
        let cfg = RunConfig::resolve(&a, None).unwrap();
        assert_eq!(cfg.spec, ChainSpec::xy(1.0, 1.0, Boundary::Antiperiodic).unwrap());
        assert_eq!(cfg.ells, vec![8]);
        assert_eq!(cfg.n_blocks, 4);
    }

    #[test]
    fn default_grid_applies_only_when_given() {
        let mut a = args("harmonic");
        a.alpha = Some(0.5);
        assert_eq!(RunConfig::resolve(&a, Some(DEFAULT_GRID)).unwrap().ells.len(), 7);
        assert_eq!(RunConfig::resolve(&a, None).unwrap_err().field, "ell");
    }

    #[test]
    fn bad_combinations_name_the_field() {
        let mut a = args("harmonic");
        a.alpha = Some(0.5);
        a.gamma = Some(1.0);
        assert_eq!(RunConfig::resolve(&a, Some("4")).unwrap_err().field, "gamma");

        let mut a = args("harmonic");
        a.alpha = Some(1.5);
        assert_eq!(RunConfig::resolve(&a, Some("4")).unwrap_err().field, "alpha");

        let mut a = args("xy");
        a.gamma = Some(1.0);
        assert_eq!(RunConfig::resolve(&a, Some("4")).unwrap_err().field, "lambda");

        assert_eq!(RunConfig::resolve(&args("ising"), Some("4")).unwrap_err().field, "model");

        let mut a = args("harmonic");
        a.alpha = Some(0.5);
        a.tol = Some(-1.0);
        assert_eq!(RunConfig::resolve(&a, Some("4")).unwrap_err().field, "tol");
    }
}
