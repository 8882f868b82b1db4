//! TOML configuration files.
//!
//! Coefficients sit in `[lower]` and `[upper]` tables (`d`, `a`, `b`), the
//! regimes taken when the previous count is at most, or above, `threshold`.
//! Unknown keys are rejected so a misspelled field is reported by name.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use setpar::estimation::{FitConfig, LambdaInit, ModelKind};
use setpar::mc_study::McDesign;
use setpar::{RegimeParams, SetparParams};

use crate::error::{invalid, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeBlock {
    pub d: f64,
    pub a: f64,
    pub b: f64,
}

impl RegimeBlock {
    fn resolve(&self, name: &str) -> CliResult<RegimeParams> {
        RegimeParams::new(self.d, self.a, self.b).map_err(invalid(name))
    }
}

impl From<RegimeParams> for RegimeBlock {
    fn from(p: RegimeParams) -> Self {
        Self { d: p.d, a: p.a, b: p.b }
    }
}

fn params(threshold: u64, lower: &RegimeBlock, upper: &RegimeBlock) -> CliResult<SetparParams> {
    SetparParams::new(threshold, lower.resolve("lower")?, upper.resolve("upper")?).map_err(invalid("parameters"))
}

/// `"mean"`, `"first"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaInitSpec(pub LambdaInit);

impl FromStr for LambdaInitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mean" => Ok(Self(LambdaInit::SampleMean)),
            "first" => Ok(Self(LambdaInit::FirstObservation)),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(Self(LambdaInit::Fixed(v))),
                _ => Err(format!("lambda_init must be \"mean\", \"first\" or a positive number, got `{other}`")),
            },
        }
    }
}

impl fmt::Display for LambdaInitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            LambdaInit::SampleMean => f.write_str("mean"),
            LambdaInit::FirstObservation => f.write_str("first"),
            LambdaInit::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for LambdaInitSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            LambdaInit::Fixed(v) => s.serialize_f64(v),
            _ => s.collect_str(self),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaInitSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Name(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Number(v) => v.to_string(),
            Raw::Name(s) => s,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub threshold: u64,
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Starting intensity before burn-in; defaults to a reachable state.
    pub lambda_init: Option<f64>,
    pub lower: RegimeBlock,
    pub upper: RegimeBlock,
}

fn default_burn_in() -> usize {
    500
}

impl SimulateConfig {
    pub fn validate(&self) -> CliResult<SetparParams> {
        if self.n == 0 {
            return Err(CliError::input("n: must be at least 1"));
        }
        if let Some(v) = self.lambda_init {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::input(format!("lambda_init: must be positive, got {v}")));
            }
        }
        params(self.threshold, &self.lower, &self.upper)
    }
}

/// Estimation options shared by `fit` and the `[fit]` table of a study.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub thresholds: Option<Vec<u64>>,
    pub lambda_init: Option<LambdaInitSpec>,
    pub slack: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl FitOptions {
    /// Fields set in `over` take precedence.
    pub fn overlay(&self, over: &FitOptions) -> FitOptions {
        FitOptions {
            alpha1: over.alpha1.or(self.alpha1),
            alpha2: over.alpha2.or(self.alpha2),
            thresholds: over.thresholds.clone().or_else(|| self.thresholds.clone()),
            lambda_init: over.lambda_init.or(self.lambda_init),
            slack: over.slack.or(self.slack),
            tol: over.tol.or(self.tol),
            max_iter: over.max_iter.or(self.max_iter),
        }
    }

    pub fn resolve(&self) -> CliResult<FitConfig> {
        let d = FitConfig::default();
        let cfg = FitConfig {
            alpha1: self.alpha1.unwrap_or(d.alpha1),
            alpha2: self.alpha2.unwrap_or(d.alpha2),
            thresholds: self.thresholds.clone(),
            lambda_init: self.lambda_init.map_or(d.lambda_init, |s| s.0),
            slack: self.slack.unwrap_or(d.slack),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            warm_start: d.warm_start,
        };
        cfg.validate().map_err(invalid("fit options"))?;
        if matches!(&cfg.thresholds, Some(t) if t.is_empty()) {
            return Err(CliError::input("thresholds: list is empty"));
        }
        Ok(cfg)
    }
}

/// A `fit` configuration file: the model plus [`FitOptions`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub model: Option<ModelKind>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub thresholds: Option<Vec<u64>>,
    pub lambda_init: Option<LambdaInitSpec>,
    pub slack: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl FitFile {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            thresholds: self.thresholds.clone(),
            lambda_init: self.lambda_init,
            slack: self.slack,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub threshold: u64,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub lower: RegimeBlock,
    pub upper: RegimeBlock,
    #[serde(default)]
    pub fit: FitOptions,
}

impl McConfig {
    pub fn design(&self) -> CliResult<McDesign> {
        let design = McDesign {
            truth: params(self.threshold, &self.lower, &self.upper)?,
            sample_sizes: self.sample_sizes.clone(),
            replications: self.replications,
            seed: self.seed,
            burn_in: self.burn_in,
            fit: self.fit.resolve()?,
        };
        design.validate().map_err(invalid("design"))?;
        Ok(design)
    }
}
