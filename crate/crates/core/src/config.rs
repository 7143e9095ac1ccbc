//! Plain-text experiment configuration: sectioned `key = value` lines,
//! diffable and seedable. One experiment per invocation.
//!
//! ```text
//! [experiment]
//! command = counterexample-demo
//! seed = 42
//!
//! [presentation]
//! factors = [1, 1]
//! labels = a b
//!
//! [metrics]
//! m1 = standard
//! m2 = sqrt:standard
//!
//! [knobs]
//! radius = 5
//! nmax = 64
//! tau = 1
//! eta = 0
//! samples = 100
//!
//! [overrides]
//! C = 0
//! ```

use std::sync::Arc;

use num_rational::Rational64;
use num_traits::Zero;

use crate::error::ConfigError;
use crate::group::FreeProductPresentation;
use crate::metrics::LeftInvariantMetric;
use crate::rational::parse_rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyProjections,
    FindGoodElement,
    VerifyPeriodicity,
    MlsExperiment,
    CounterexampleDemo,
    RigidityCheck,
    ConstantsReport,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        match s {
            "verify-projections" => Some(Command::VerifyProjections),
            "find-good-element" => Some(Command::FindGoodElement),
            "verify-periodicity" => Some(Command::VerifyPeriodicity),
            "mls-experiment" => Some(Command::MlsExperiment),
            "counterexample-demo" => Some(Command::CounterexampleDemo),
            "rigidity-check" => Some(Command::RigidityCheck),
            "constants-report" => Some(Command::ConstantsReport),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::VerifyProjections => "verify-projections",
            Command::FindGoodElement => "find-good-element",
            Command::VerifyPeriodicity => "verify-periodicity",
            Command::MlsExperiment => "mls-experiment",
            Command::CounterexampleDemo => "counterexample-demo",
            Command::RigidityCheck => "rigidity-check",
            Command::ConstantsReport => "constants-report",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub c: Option<Rational64>,
    pub l: Option<Rational64>,
    /// Override for the geodesic-class approach radius `R(1, 0)`.
    pub r: Option<Rational64>,
    pub kappa_bar: Option<f64>,
}

impl Overrides {
    /// Parse the `--override` flag value: `C=..,L=..,R=..,kappa_bar=..`.
    pub fn parse(s: &str) -> Result<Overrides, ConfigError> {
        let mut out = Overrides::default();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, value) = part.split_once('=').ok_or_else(|| ConfigError::Invalid {
                key: part.to_string(),
                message: "expected `name=value`".into(),
            })?;
            out.set(key.trim(), value.trim())?;
        }
        Ok(out)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let rational = |v: &str| {
            parse_rational(v).ok_or_else(|| ConfigError::Invalid {
                key: key.to_string(),
                message: format!("`{v}` is not a rational"),
            })
        };
        match key {
            "C" => self.c = Some(rational(value)?),
            "L" => self.l = Some(rational(value)?),
            "R" => self.r = Some(rational(value)?),
            "kappa_bar" => {
                self.kappa_bar = Some(value.parse().map_err(|_| ConfigError::Invalid {
                    key: key.into(),
                    message: format!("`{value}` is not a number"),
                })?)
            }
            other => {
                return Err(ConfigError::Invalid {
                    key: other.to_string(),
                    message: "unknown override (expected C, L, R or kappa_bar)".into(),
                })
            }
        }
        // constants are distances; negative values are rejected up front
        let neg_rat = [self.c, self.l, self.r]
            .iter()
            .any(|o| matches!(o, Some(v) if *v < Rational64::zero()));
        if neg_rat || matches!(self.kappa_bar, Some(v) if v < 0.0) {
            return Err(ConfigError::Invalid {
                key: key.to_string(),
                message: "override must be nonnegative".into(),
            });
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub factors: Vec<usize>,
    pub labels: Option<Vec<String>>,
    /// Presentation file path; wins over `factors`/`labels` when set.
    pub presentation_file: Option<String>,
    pub metric1: String,
    pub metric2: Option<String>,
    pub radius: u32,
    pub n_max: u32,
    pub tau: Rational64,
    pub eta: Rational64,
    /// Quasi-geodesic paths per instance.
    pub paths_per_instance: u32,
    /// Elements per sample (spectrum experiments) or per sphere
    /// (good-element experiments).
    pub sample_count: u32,
    pub sphere_lo: Option<u32>,
    pub sphere_hi: Option<u32>,
    pub geodesic_cap: usize,
    pub visibility_pairs: usize,
    pub overrides: Overrides,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            seed: None,
            factors: vec![1, 1],
            labels: None,
            presentation_file: None,
            metric1: "standard".into(),
            metric2: None,
            radius: 4,
            n_max: 64,
            tau: Rational64::from_integer(1),
            eta: Rational64::zero(),
            paths_per_instance: 4,
            sample_count: 100,
            sphere_lo: None,
            sphere_hi: None,
            geodesic_cap: 10_000,
            visibility_pairs: 60,
            overrides: Overrides::default(),
        }
    }

    /// Parse a config file. The `[experiment]` section must name a command;
    /// everything else has defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut command: Option<Command> = None;
        let mut draft = ExperimentConfig::new(Command::ConstantsReport);
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| ConfigError::Parse {
                line: line_no,
                message,
            };
            match (section.as_str(), key) {
                ("experiment", "command") => {
                    command = Some(
                        Command::parse(value)
                            .ok_or_else(|| bad(format!("unknown command `{value}`")))?,
                    );
                }
                ("experiment", "seed") => {
                    draft.seed =
                        Some(value.parse().map_err(|_| bad(format!("bad seed `{value}`")))?);
                }
                ("presentation", "factors") => {
                    let inner = value
                        .strip_prefix('[')
                        .and_then(|s| s.strip_suffix(']'))
                        .ok_or_else(|| bad("factors must be `[n1, n2, ...]`".to_string()))?;
                    let parsed: Result<Vec<usize>, _> =
                        inner.split(',').map(|s| s.trim().parse()).collect();
                    draft.factors = parsed.map_err(|_| bad("bad factor rank".into()))?;
                }
                ("presentation", "labels") => {
                    draft.labels = Some(value.split_whitespace().map(String::from).collect());
                }
                ("presentation", "file") => {
                    draft.presentation_file = Some(value.to_string());
                }
                ("metrics", "m1") => draft.metric1 = value.to_string(),
                ("metrics", "m2") => draft.metric2 = Some(value.to_string()),
                ("knobs", "radius") => {
                    draft.radius = value.parse().map_err(|_| bad("bad radius".into()))?;
                }
                ("knobs", "nmax") => {
                    draft.n_max = value.parse().map_err(|_| bad("bad nmax".into()))?;
                }
                ("knobs", "tau") => {
                    draft.tau =
                        parse_rational(value).ok_or_else(|| bad("bad tau".into()))?;
                }
                ("knobs", "eta") => {
                    draft.eta =
                        parse_rational(value).ok_or_else(|| bad("bad eta".into()))?;
                }
                ("knobs", "samples") => {
                    draft.sample_count = value.parse().map_err(|_| bad("bad samples".into()))?;
                }
                ("knobs", "paths") => {
                    draft.paths_per_instance =
                        value.parse().map_err(|_| bad("bad paths".into()))?;
                }
                ("knobs", "sphere_lo") => {
                    draft.sphere_lo =
                        Some(value.parse().map_err(|_| bad("bad sphere_lo".into()))?);
                }
                ("knobs", "sphere_hi") => {
                    draft.sphere_hi =
                        Some(value.parse().map_err(|_| bad("bad sphere_hi".into()))?);
                }
                ("knobs", "geodesic_cap") => {
                    draft.geodesic_cap =
                        value.parse().map_err(|_| bad("bad geodesic_cap".into()))?;
                }
                ("knobs", "visibility_pairs") => {
                    draft.visibility_pairs =
                        value.parse().map_err(|_| bad("bad visibility_pairs".into()))?;
                }
                ("overrides", k) => {
                    draft.overrides.set(k, value).map_err(|e| bad(e.to_string()))?;
                }
                (sec, k) => {
                    return Err(bad(format!("unknown key `{k}` in section `[{sec}]`")));
                }
            }
        }
        draft.command = command.ok_or(ConfigError::Missing("command"))?;
        draft.validate()?;
        Ok(draft)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.radius == 0 {
            return Err(ConfigError::Invalid {
                key: "radius".into(),
                message: "must be positive".into(),
            });
        }
        if self.n_max == 0 {
            return Err(ConfigError::Invalid {
                key: "nmax".into(),
                message: "must be positive".into(),
            });
        }
        if self.geodesic_cap == 0 {
            return Err(ConfigError::Invalid {
                key: "geodesic_cap".into(),
                message: "must be positive".into(),
            });
        }
        if self.tau < Rational64::from_integer(1) {
            return Err(ConfigError::Invalid {
                key: "tau".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.eta < Rational64::zero() {
            return Err(ConfigError::Invalid {
                key: "eta".into(),
                message: "must be nonnegative".into(),
            });
        }
        Ok(())
    }

    /// Reproducibility requires an explicit seed.
    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::Missing("seed"))
    }

    pub fn presentation(&self) -> Result<Arc<FreeProductPresentation>, ConfigError> {
        if let Some(path) = &self.presentation_file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid {
                key: "file".into(),
                message: format!("cannot read presentation file `{path}`: {e}"),
            })?;
            return Ok(FreeProductPresentation::parse(&text)?);
        }
        let pres = match &self.labels {
            Some(labels) => FreeProductPresentation::new(self.factors.clone(), labels.clone())?,
            None => FreeProductPresentation::from_ranks(&self.factors)?,
        };
        Ok(pres)
    }

    pub fn metric(
        &self,
        pres: &Arc<FreeProductPresentation>,
        spec: &str,
    ) -> Result<LeftInvariantMetric<f64>, ConfigError> {
        LeftInvariantMetric::parse_spec(pres, spec).map_err(|e| ConfigError::Invalid {
            key: "metric".into(),
            message: e.to_string(),
        })
    }
}
