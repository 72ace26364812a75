//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ellshape::geometry::Mode;
use ellshape::inference::OptimizerConfig;
use ellshape::landmark_io::parse_matrix;
use ellshape::models::GeneratorSpec;
use ellshape::{IsotropicKind, SeriesControl};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gaussian,
    Kotz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Reflection,
    NoReflection,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Reflection => Mode::Reflection,
            ModeArg::NoReflection => Mode::NoReflection,
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the same key in the
/// `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file; keys match the long flag names with `_` for `-`
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Elliptical generator
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelKind>,

    /// Kotz shape parameter T
    #[arg(long = "kotz-T", global = true, value_name = "T")]
    pub kotz_t: Option<f64>,

    /// Kotz rate parameter R
    #[arg(long = "kotz-R", global = true, value_name = "R")]
    pub kotz_r: Option<f64>,

    /// Isotropic landmark variance σ²
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,

    /// K×K column covariance Θ (whitespace rows); identity when absent
    #[arg(long, global = true, value_name = "FILE")]
    pub theta: Option<PathBuf>,

    /// Whether reflections are part of the shape equivalence
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,

    /// Highest zonal series degree
    #[arg(long, global = true)]
    pub max_degree: Option<usize>,

    /// Relative truncation tolerance of the zonal series
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Seed for optimizer starts and Monte Carlo
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of optimizer starts
    #[arg(long, global = true)]
    pub starts: Option<usize>,

    /// Objective evaluations allowed per optimizer start
    #[arg(long, global = true)]
    pub max_evals: Option<usize>,

    /// Write JSON here instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub kotz_t: f64,
    pub kotz_r: f64,
    pub sigma2: f64,
    pub theta: Option<PathBuf>,
    #[serde(serialize_with = "mode_str")]
    pub mode: Mode,
    pub max_degree: usize,
    pub tol: f64,
    pub seed: u64,
    pub starts: usize,
    pub max_evals: usize,
    pub out: Option<PathBuf>,
}

fn mode_str<S: serde::Serializer>(m: &Mode, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_string())
}

const KEYS: [&str; 12] = [
    "model",
    "kotz_T",
    "kotz_R",
    "sigma2",
    "theta",
    "mode",
    "max_degree",
    "tol",
    "seed",
    "starts",
    "max_evals",
    "out",
];

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Input(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| {
            v.parse::<T>().map_err(|_| CliError::Input(format!("config key {key}: invalid value '{v}'")))
        })
        .transpose()
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => parse_config_file(&read_text(path)?)?,
            None => BTreeMap::new(),
        };
        let model = match args.model {
            Some(m) => m,
            None => match file.get("model").map(String::as_str) {
                None | Some("gaussian") => ModelKind::Gaussian,
                Some("kotz") => ModelKind::Kotz,
                Some(other) => {
                    return Err(CliError::Input(format!("config key model: unknown model '{other}'")))
                }
            },
        };
        let mode = match args.mode {
            Some(m) => m.into(),
            None => match file.get("mode") {
                Some(v) => v.parse::<Mode>().map_err(|e| CliError::Input(format!("config key mode: {e}")))?,
                None => Mode::Reflection,
            },
        };
        let cfg = Self {
            model,
            kotz_t: args.kotz_t.or(from_file(&file, "kotz_T")?).unwrap_or(2.0),
            kotz_r: args.kotz_r.or(from_file(&file, "kotz_R")?).unwrap_or(0.5),
            sigma2: args.sigma2.or(from_file(&file, "sigma2")?).unwrap_or(1.0),
            theta: args.theta.clone().or(from_file(&file, "theta")?),
            mode,
            max_degree: args.max_degree.or(from_file(&file, "max_degree")?).unwrap_or(60),
            tol: args.tol.or(from_file(&file, "tol")?).unwrap_or(1e-12),
            seed: args.seed.or(from_file(&file, "seed")?).unwrap_or(0),
            starts: args.starts.or(from_file(&file, "starts")?).unwrap_or(8),
            max_evals: args
                .max_evals
                .or(from_file(&file, "max_evals")?)
                .unwrap_or(OptimizerConfig::default().max_evaluations),
            out: args.out.clone().or(from_file(&file, "out")?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(CliError::Input(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.starts == 0 || self.max_evals == 0 {
            return Err(CliError::Input("starts and max_evals must be at least 1".into()));
        }
        self.series().validate().map_err(|e| CliError::Input(e.to_string()))?;
        if self.model == ModelKind::Kotz {
            GeneratorSpec::kotz(self.kotz_t, self.kotz_r, 1).map_err(|e| CliError::Input(e.to_string()))?;
        }
        Ok(())
    }

    pub fn series(&self) -> SeriesControl {
        SeriesControl { max_degree: self.max_degree, rel_tol: self.tol, ..Default::default() }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            starts: self.starts,
            seed: self.seed,
            max_evaluations: self.max_evals,
            ..Default::default()
        }
    }

    pub fn generator(&self, m_total: usize) -> Result<GeneratorSpec, CliError> {
        match self.model {
            ModelKind::Gaussian => Ok(GeneratorSpec::gaussian(m_total)),
            ModelKind::Kotz => GeneratorSpec::kotz(self.kotz_t, self.kotz_r, m_total)
                .map_err(|e| CliError::Input(e.to_string())),
        }
    }

    /// Likelihood kernel for `fit` and `test`, which cover the Gaussian and
    /// the Kotz models with `T ∈ {2, 3}`, `R = ½`.
    pub fn isotropic_kind(&self) -> Result<IsotropicKind, CliError> {
        match self.model {
            ModelKind::Gaussian => Ok(IsotropicKind::Gaussian),
            ModelKind::Kotz if self.kotz_r != 0.5 => {
                Err(CliError::Input("fitting supports the Kotz rate R = 0.5 only".into()))
            }
            ModelKind::Kotz if self.kotz_t == 2.0 => Ok(IsotropicKind::KotzT2),
            ModelKind::Kotz if self.kotz_t == 3.0 => Ok(IsotropicKind::KotzT3),
            ModelKind::Kotz => {
                Err(CliError::Input(format!("fitting supports Kotz T = 2 or 3, got {}", self.kotz_t)))
            }
        }
    }

    pub fn theta_matrix(&self, k: usize) -> Result<DMatrix<f64>, CliError> {
        let Some(path) = &self.theta else {
            return Ok(DMatrix::identity(k, k));
        };
        let theta = parse_matrix(&read_text(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if theta.nrows() != k {
            let n = theta.nrows();
            return Err(CliError::Input(format!(
                "{}: Θ is {n}×{n} but the landmarks have K = {k}",
                path.display()
            )));
        }
        Ok(theta)
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
