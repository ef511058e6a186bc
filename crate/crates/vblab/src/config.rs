//! Experiment configuration: JSON file values overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize, Serializer};
use vblab_core::models::{
    generic_gaussian_convolution, generic_scalar_gaussian, GaussianConvolution, PoissonCounts,
    ScalarGaussian,
};
use vblab_core::{ExpFamily, Hyperparams};

use crate::cli::CommonArgs;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    A,
    B,
    C,
    /// Gauss–Hermite configuration of model B.
    Generic,
    /// Gauss–Hermite configuration of model A.
    GenericA,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ModelKind::A),
            "B" | "b" => Ok(ModelKind::B),
            "C" | "c" => Ok(ModelKind::C),
            "generic" | "generic-B" => Ok(ModelKind::Generic),
            "generic-A" => Ok(ModelKind::GenericA),
            other => Err(CliError::config(
                "model",
                format!("unknown model `{other}`; expected A, B, C, generic or generic-A"),
            )),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::A => "A",
            ModelKind::B => "B",
            ModelKind::C => "C",
            ModelKind::Generic => "generic",
            ModelKind::GenericA => "generic-A",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ModelKind::A | ModelKind::GenericA => 2,
            _ => 1,
        }
    }

    pub fn build(self) -> Box<dyn ExpFamily> {
        match self {
            ModelKind::A => Box::new(GaussianConvolution),
            ModelKind::B => Box::new(ScalarGaussian),
            ModelKind::C => Box::new(PoissonCounts),
            ModelKind::Generic => Box::new(generic_scalar_gaussian()),
            ModelKind::GenericA => Box::new(generic_gaussian_convolution()),
        }
    }

    /// Observations are counts.
    pub fn integer_data(self) -> bool {
        self == ModelKind::C
    }

    /// The identified combination of parameters is `θ₁ + θ₂`.
    pub fn sum_identified(self) -> bool {
        matches!(self, ModelKind::A | ModelKind::GenericA)
    }

    /// Spectral norm of `DΦₙ` in closed form.
    pub fn closed_form_spectral_norm(self, n: usize, alpha0: f64) -> Option<f64> {
        let n = n as f64;
        match self {
            ModelKind::A | ModelKind::GenericA => Some(n / (n + alpha0)),
            ModelKind::B | ModelKind::Generic => Some(0.5 * n / (n + alpha0)),
            ModelKind::C => Some(0.0),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ModelKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitChoice {
    Default,
    Vector(Vec<f64>),
}

impl Serialize for InitChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InitChoice::Default => s.serialize_str("default"),
            InitChoice::Vector(v) => v.serialize(s),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: String,
    pub model: Option<String>,
    pub theta_star: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    pub alpha0: Option<f64>,
    pub beta0: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub init: Option<serde_json::Value>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: ConfigFile = serde_json::from_str(&text).map_err(|e| CliError::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.schema_version.split('.').next() != SCHEMA_VERSION.split('.').next() {
            return Err(CliError::config(
                "schema_version",
                format!(
                    "unsupported version `{}`; expected {SCHEMA_VERSION}",
                    file.schema_version
                ),
            ));
        }
        Ok(file)
    }
}

/// Fully resolved configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: &'static str,
    pub model: ModelKind,
    pub theta_star: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub alpha0: f64,
    pub beta0: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitChoice,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let model_name = args
            .model
            .clone()
            .or(file.model)
            .ok_or_else(|| CliError::config("model", "required"))?;
        let model = ModelKind::parse(&model_name)?;
        let dim = model.dim();

        let (n, n_grid) = match (&args.n, file.n, file.n_grid) {
            (Some(v), _, _) if v.len() == 1 => (Some(v[0]), None),
            (Some(v), _, _) if v.is_empty() => return Err(CliError::config("n", "empty list")),
            (Some(v), _, _) => (None, Some(v.clone())),
            (None, n, grid) => (n, grid),
        };
        let seeds = args.seeds.clone().or(file.seeds).unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(CliError::config("seeds", "must be non-empty"));
        }
        let theta_star = args.theta_star.clone().or(file.theta_star);
        if let Some(t) = &theta_star {
            check_len("theta_star", t, dim)?;
            if !model.build().in_domain(t) {
                return Err(CliError::config(
                    "theta_star",
                    "outside the parameter domain",
                ));
            }
        }
        let alpha0 = args.alpha0.or(file.alpha0).unwrap_or(1.0);
        let default_beta = if model == ModelKind::C { 1.0 } else { 0.0 };
        let beta0 = args
            .beta0
            .clone()
            .or(file.beta0)
            .unwrap_or_else(|| vec![default_beta; dim]);
        check_len("beta0", &beta0, dim)?;
        let tol = args.tol.or(file.tol).unwrap_or(vblab_core::vb::DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::config("tol", "must be positive and finite"));
        }
        let max_iter = args
            .max_iter
            .or(file.max_iter)
            .unwrap_or(vblab_core::vb::DEFAULT_MAX_ITER);
        if max_iter == 0 {
            return Err(CliError::config("max_iter", "must be at least 1"));
        }
        let init = match (&args.init, file.init) {
            (Some(s), _) => parse_init_flag(s)?,
            (None, Some(v)) => parse_init_value(&v)?,
            (None, None) => InitChoice::Default,
        };
        if let InitChoice::Vector(v) = &init {
            check_len("init", v, dim)?;
        }
        let cfg = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            model,
            theta_star,
            n,
            n_grid,
            seeds,
            alpha0,
            beta0,
            tol,
            max_iter,
            init,
            output_dir: args
                .out
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.prior()?;
        Ok(cfg)
    }

    pub fn prior(&self) -> Result<Hyperparams> {
        let hp = Hyperparams::new(self.alpha0, self.beta0.clone())
            .map_err(|e| CliError::config("alpha0", e.to_string()))?;
        hp.validate(self.model.build().as_ref())
            .map_err(|e| CliError::config("beta0", format!("prior is not proper: {e}")))?;
        Ok(hp)
    }

    pub fn theta_star(&self) -> Result<&[f64]> {
        self.theta_star
            .as_deref()
            .ok_or_else(|| CliError::config("theta_star", "required"))
    }

    /// `n` for single-size commands.
    pub fn single_n(&self) -> Result<usize> {
        match (self.n, &self.n_grid) {
            (Some(n), _) => Ok(n),
            (None, Some(g)) if g.len() == 1 => Ok(g[0]),
            (None, Some(_)) => Err(CliError::config("n", "expected a single value")),
            (None, None) => Err(CliError::config("n", "required")),
        }
    }

    /// Increasing grid of positive sizes.
    pub fn grid(&self, min_len: usize) -> Result<Vec<usize>> {
        let g = match (&self.n_grid, self.n) {
            (Some(g), _) => g.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => return Err(CliError::config("n_grid", "required")),
        };
        if g.len() < min_len {
            return Err(CliError::config(
                "n_grid",
                format!("needs at least {min_len} values"),
            ));
        }
        if g.contains(&0) {
            return Err(CliError::config("n_grid", "values must be positive"));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("n_grid", "must be strictly increasing"));
        }
        Ok(g)
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn ensure_output_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| CliError::io(&self.output_dir, e))
    }
}

fn check_len(field: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(CliError::config(
            field,
            format!("expected {dim} values for this model, got {}", v.len()),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::config(field, "values must be finite"));
    }
    Ok(())
}

fn parse_init_flag(s: &str) -> Result<InitChoice> {
    if s == "default" {
        return Ok(InitChoice::Default);
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config("init", format!("`{p}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()
        .map(InitChoice::Vector)
}

fn parse_init_value(v: &serde_json::Value) -> Result<InitChoice> {
    match v {
        serde_json::Value::String(s) if s == "default" => Ok(InitChoice::Default),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| CliError::config("init", "array entries must be numbers"))
            })
            .collect::<Result<Vec<_>>>()
            .map(InitChoice::Vector),
        _ => Err(CliError::config(
            "init",
            "expected an array of numbers or \"default\"",
        )),
    }
}
