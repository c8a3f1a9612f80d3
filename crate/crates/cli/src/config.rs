//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! [problem]
//! n = 2
//! budget = 5
//! measurement.noise_variance = 5   # dotted keys work anywhere
//! ```
//!
//! Every key except `problem.n` and `experiment.seed` has a default. Unknown
//! keys and malformed values are rejected with an error naming the key.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use semimyopic_core::{
    ConstraintFamily, Dependency, EstimatorSettings, ExecutionMode, InstanceSpec, KnownItem,
    MeasurementModel, UtilityFn,
};
use thiserror::Error;

use crate::harness::{GridSpec, SweepSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}` is set more than once")]
    Duplicate { key: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    Parse {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Every recognised key with its default (`None` = required).
const KEYS: &[(&str, Option<&str>)] = &[
    ("problem.n", None),
    ("problem.budget", Some("5")),
    ("problem.known_item_index", Some("0")),
    ("problem.known_item_value", Some("1")),
    ("problem.prior_mean", Some("0")),
    ("problem.prior_variance", Some("1")),
    ("problem.dependency_kind", Some("none")),
    ("problem.drift_variance", Some("1")),
    ("measurement.noise_variance", Some("5")),
    ("measurement.cost", Some("0.00144")),
    ("utility.kind", Some("step")),
    ("utility.threshold", Some("1")),
    ("utility.low", Some("0")),
    ("utility.mid", Some("0.5")),
    ("utility.high", Some("1")),
    ("utility.scale", Some("1")),
    ("utility.shift", Some("0")),
    ("utility.knots", Some("")),
    ("scheme.family", Some("myopic,blinkered")),
    ("scheme.execution_mode", Some("single_step")),
    ("scheme.bisection", Some("false")),
    ("estimator.quadrature_tolerance", Some("1e-8")),
    ("estimator.mc_samples", Some("10000")),
    ("estimator.enumeration_limit", Some("2000000")),
    ("experiment.sigma_o2_list", Some("3,4,5,6")),
    ("experiment.cost_list", Some("0.0005,0.001,0.0015,0.002")),
    ("experiment.ratio_list", Some("0,0.1,0.25,0.5,1,2,4")),
    ("experiment.replicates", Some("100")),
    ("experiment.seed", None),
    ("output.directory", Some("out")),
    ("output.formats", Some("csv")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependencyKind {
    None,
    RandomWalk,
    Coupled,
}

impl DependencyKind {
    fn name(self) -> &'static str {
        match self {
            DependencyKind::None => "none",
            DependencyKind::RandomWalk => "random_walk",
            DependencyKind::Coupled => "coupled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    Step,
    Tanh,
    PiecewiseLinear,
}

impl UtilityKind {
    fn name(self) -> &'static str {
        match self {
            UtilityKind::Step => "step",
            UtilityKind::Tanh => "tanh",
            UtilityKind::PiecewiseLinear => "piecewise_linear",
        }
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub n: usize,
    pub budget: u32,
    pub known_item: Option<usize>,
    pub known_item_value: f64,
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub dependency: DependencyKind,
    pub drift_variance: f64,
    pub noise_variance: f64,
    pub cost: f64,
    pub utility_kind: UtilityKind,
    pub threshold: f64,
    pub low: f64,
    pub mid: f64,
    pub high: f64,
    pub scale: f64,
    pub shift: f64,
    pub knots: Vec<(f64, f64)>,
    pub families: Vec<ConstraintFamily>,
    pub mode: ExecutionMode,
    pub bisection: bool,
    pub quadrature_tolerance: f64,
    pub mc_samples: usize,
    pub enumeration_limit: u64,
    pub sigma_o2_list: Vec<f64>,
    pub cost_list: Vec<f64>,
    pub ratio_list: Vec<f64>,
    pub replicates: u32,
    pub seed: u64,
    pub directory: String,
    pub formats: Vec<String>,
}

/// Raw key/value pairs as read from a file, before defaults and typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            let full = if key.contains('.') || section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if !KEYS.iter().any(|(k, _)| *k == full) {
                return Err(ConfigError::UnknownKey { key: full });
            }
            if values
                .insert(full.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::Duplicate { key: full });
            }
        }
        Ok(Self { values })
    }

    /// Sets `key`, replacing any value from the file (command-line flags).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
            });
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    fn get(&self, key: &str) -> Result<&str> {
        if let Some(v) = self.values.get(key) {
            return Ok(v);
        }
        match KEYS.iter().find(|(k, _)| *k == key) {
            Some((_, Some(default))) => Ok(default),
            _ => Err(ConfigError::Missing {
                key: key.to_string(),
            }),
        }
    }

    fn typed<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| ConfigError::Parse {
            key: key.to_string(),
            value: raw.to_string(),
            expected,
        })
    }

    fn real(&self, key: &str) -> Result<f64> {
        let v: f64 = self.typed(key, "a real number")?;
        if !v.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
        Ok(v)
    }

    fn real_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.get(key)?;
        split_list(raw)
            .map(|item| {
                item.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ConfigError::Parse {
                        key: key.to_string(),
                        value: raw.to_string(),
                        expected: "a comma-separated list of real numbers",
                    })
            })
            .collect()
    }

    fn boolean(&self, key: &str) -> Result<bool> {
        match self.get(key)?.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(ConfigError::Parse {
                key: key.to_string(),
                value: other.to_string(),
                expected: "a boolean",
            }),
        }
    }

    pub fn resolve(&self) -> Result<Config> {
        let n: usize = self.typed("problem.n", "a positive integer")?;
        if n == 0 {
            return Err(invalid("problem.n", "must be at least 1"));
        }
        let known_raw = self.get("problem.known_item_index")?;
        let known_item = if known_raw.eq_ignore_ascii_case("none") {
            None
        } else {
            let idx: usize = self.typed("problem.known_item_index", "an item index or `none`")?;
            if idx >= n {
                return Err(invalid(
                    "problem.known_item_index",
                    "must be below problem.n",
                ));
            }
            Some(idx)
        };
        let dependency = match self
            .get("problem.dependency_kind")?
            .to_ascii_lowercase()
            .as_str()
        {
            "none" | "independent" => DependencyKind::None,
            "random_walk" | "chain" => DependencyKind::RandomWalk,
            "coupled" => DependencyKind::Coupled,
            other => {
                return Err(ConfigError::Parse {
                    key: "problem.dependency_kind".into(),
                    value: other.into(),
                    expected: "one of none, random_walk, coupled",
                })
            }
        };
        let utility_kind = match self.get("utility.kind")?.to_ascii_lowercase().as_str() {
            "step" => UtilityKind::Step,
            "tanh" => UtilityKind::Tanh,
            "piecewise_linear" | "pwl" => UtilityKind::PiecewiseLinear,
            other => {
                return Err(ConfigError::Parse {
                    key: "utility.kind".into(),
                    value: other.into(),
                    expected: "one of step, tanh, piecewise_linear",
                })
            }
        };
        let knots_raw = self.get("utility.knots")?;
        let knots = split_list(knots_raw)
            .map(|pair| {
                let parsed = pair
                    .split_once(':')
                    .and_then(|(x, y)| Some((x.trim().parse().ok()?, y.trim().parse().ok()?)));
                parsed.ok_or_else(|| ConfigError::Parse {
                    key: "utility.knots".into(),
                    value: knots_raw.to_string(),
                    expected: "a comma-separated list of x:y pairs",
                })
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let families = split_list(self.get("scheme.family")?)
            .map(|name| {
                name.parse::<ConstraintFamily>()
                    .map_err(|_| ConfigError::Parse {
                        key: "scheme.family".into(),
                        value: name.to_string(),
                        expected: "myopic, blinkered, omni_myopic or exhaustive",
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if families.is_empty() {
            return Err(invalid("scheme.family", "needs at least one scheme"));
        }
        let mode = self
            .get("scheme.execution_mode")?
            .parse::<ExecutionMode>()
            .map_err(|_| ConfigError::Parse {
                key: "scheme.execution_mode".into(),
                value: self
                    .get("scheme.execution_mode")
                    .unwrap_or_default()
                    .to_string(),
                expected: "single_step or whole_batch",
            })?;
        let formats: Vec<String> = split_list(self.get("output.formats")?)
            .map(str::to_ascii_lowercase)
            .collect();
        if let Some(bad) = formats.iter().find(|f| f.as_str() != "csv") {
            return Err(ConfigError::Parse {
                key: "output.formats".into(),
                value: bad.clone(),
                expected: "csv",
            });
        }
        let cfg = Config {
            n,
            budget: self.typed("problem.budget", "a non-negative integer")?,
            known_item,
            known_item_value: self.real("problem.known_item_value")?,
            prior_mean: self.real("problem.prior_mean")?,
            prior_variance: self.real("problem.prior_variance")?,
            dependency,
            drift_variance: self.real("problem.drift_variance")?,
            noise_variance: self.real("measurement.noise_variance")?,
            cost: self.real("measurement.cost")?,
            utility_kind,
            threshold: self.real("utility.threshold")?,
            low: self.real("utility.low")?,
            mid: self.real("utility.mid")?,
            high: self.real("utility.high")?,
            scale: self.real("utility.scale")?,
            shift: self.real("utility.shift")?,
            knots,
            families,
            mode,
            bisection: self.boolean("scheme.bisection")?,
            quadrature_tolerance: self.real("estimator.quadrature_tolerance")?,
            mc_samples: self.typed("estimator.mc_samples", "a positive integer")?,
            enumeration_limit: self.typed("estimator.enumeration_limit", "a positive integer")?,
            sigma_o2_list: self.real_list("experiment.sigma_o2_list")?,
            cost_list: self.real_list("experiment.cost_list")?,
            ratio_list: self.real_list("experiment.ratio_list")?,
            replicates: self.typed("experiment.replicates", "a positive integer")?,
            seed: self.typed("experiment.seed", "an unsigned 64-bit integer")?,
            directory: self.get("output.directory")?.to_string(),
            formats,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        RawConfig::parse(text)?.resolve()
    }

    fn validate(&self) -> Result<()> {
        if !(self.prior_variance > 0.0) {
            return Err(invalid("problem.prior_variance", "must be > 0"));
        }
        if !(self.drift_variance > 0.0) {
            return Err(invalid("problem.drift_variance", "must be > 0"));
        }
        if self.dependency != DependencyKind::None && self.known_item.is_some() {
            return Err(invalid(
                "problem.known_item_index",
                "must be `none` when problem.dependency_kind is a chain",
            ));
        }
        if !(self.noise_variance > 0.0) {
            return Err(invalid("measurement.noise_variance", "must be > 0"));
        }
        if self.cost < 0.0 {
            return Err(invalid("measurement.cost", "must be >= 0"));
        }
        if !(self.quadrature_tolerance > 0.0) {
            return Err(invalid("estimator.quadrature_tolerance", "must be > 0"));
        }
        if self.mc_samples < 2 {
            return Err(invalid("estimator.mc_samples", "must be at least 2"));
        }
        if self.replicates == 0 {
            return Err(invalid("experiment.replicates", "must be at least 1"));
        }
        if self.sigma_o2_list.iter().any(|&s| !(s > 0.0)) {
            return Err(invalid("experiment.sigma_o2_list", "entries must be > 0"));
        }
        if self.cost_list.iter().any(|&c| c < 0.0) {
            return Err(invalid("experiment.cost_list", "entries must be >= 0"));
        }
        if self.ratio_list.iter().any(|&r| r < 0.0) {
            return Err(invalid("experiment.ratio_list", "entries must be >= 0"));
        }
        self.utility().map(|_| ())
    }

    pub fn utility(&self) -> Result<UtilityFn> {
        let built = match self.utility_kind {
            UtilityKind::Step => UtilityFn::step(self.threshold, self.low, self.mid, self.high),
            UtilityKind::Tanh => UtilityFn::tanh(self.scale, self.shift),
            UtilityKind::PiecewiseLinear => UtilityFn::piecewise_linear(self.knots.clone()),
        };
        built.map_err(|e| invalid("utility.kind", &e.to_string()))
    }

    pub fn model(&self) -> MeasurementModel {
        MeasurementModel {
            noise_variance: self.noise_variance,
            cost: self.cost,
        }
    }

    pub fn settings(&self) -> EstimatorSettings {
        EstimatorSettings {
            quadrature_tolerance: self.quadrature_tolerance,
            mc_samples: self.mc_samples,
            seed: 0,
            bisection: self.bisection,
            enumeration_limit: self.enumeration_limit,
        }
    }

    pub fn instance_spec(&self) -> Result<InstanceSpec> {
        let dependency = match self.dependency {
            DependencyKind::None => Dependency::None,
            DependencyKind::RandomWalk => Dependency::RandomWalk {
                drift_variance: self.drift_variance,
            },
            DependencyKind::Coupled => Dependency::Coupled {
                drift_variance: self.drift_variance,
            },
        };
        Ok(InstanceSpec {
            n: self.n,
            known_item: self.known_item.map(|index| KnownItem {
                index,
                value: self.known_item_value,
            }),
            prior_mean: self.prior_mean,
            prior_variance: self.prior_variance,
            dependency,
            utility: self.utility()?,
        })
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        if self.sigma_o2_list.is_empty() || self.cost_list.is_empty() {
            return Err(invalid(
                "experiment.sigma_o2_list",
                "grid needs observation variances and costs",
            ));
        }
        Ok(GridSpec {
            sigma_o2: self.sigma_o2_list.clone(),
            costs: self.cost_list.clone(),
            instance: self.instance_spec()?,
            budget: self.budget,
            replicates: self.replicates,
            schemes: self.families.clone(),
            mode: self.mode,
            master_seed: self.seed,
            settings: self.settings(),
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        if self.dependency == DependencyKind::None {
            return Err(invalid(
                "problem.dependency_kind",
                "the dependency sweep needs a chain",
            ));
        }
        if self.ratio_list.is_empty() {
            return Err(invalid("experiment.ratio_list", "needs at least one ratio"));
        }
        Ok(SweepSpec {
            ratios: self.ratio_list.clone(),
            instance: self.instance_spec()?,
            noise_variance: self.noise_variance,
            cost: self.cost,
            budget: self.budget,
            replicates: self.replicates,
            schemes: self.families.clone(),
            mode: self.mode,
            master_seed: self.seed,
            settings: self.settings(),
        })
    }

    /// Every key with its resolved value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let known = self
            .known_item
            .map_or_else(|| "none".to_string(), |i| i.to_string());
        let knots: Vec<String> = self.knots.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        let families: Vec<&str> = self.families.iter().map(|f| f.name()).collect();
        let sections: [(&str, Vec<(&str, String)>); 7] = [
            (
                "problem",
                vec![
                    ("n", self.n.to_string()),
                    ("budget", self.budget.to_string()),
                    ("known_item_index", known),
                    ("known_item_value", self.known_item_value.to_string()),
                    ("prior_mean", self.prior_mean.to_string()),
                    ("prior_variance", self.prior_variance.to_string()),
                    ("dependency_kind", self.dependency.name().to_string()),
                    ("drift_variance", self.drift_variance.to_string()),
                ],
            ),
            (
                "measurement",
                vec![
                    ("noise_variance", self.noise_variance.to_string()),
                    ("cost", self.cost.to_string()),
                ],
            ),
            (
                "utility",
                vec![
                    ("kind", self.utility_kind.name().to_string()),
                    ("threshold", self.threshold.to_string()),
                    ("low", self.low.to_string()),
                    ("mid", self.mid.to_string()),
                    ("high", self.high.to_string()),
                    ("scale", self.scale.to_string()),
                    ("shift", self.shift.to_string()),
                    ("knots", knots.join(",")),
                ],
            ),
            (
                "scheme",
                vec![
                    ("family", families.join(",")),
                    ("execution_mode", self.mode.name().to_string()),
                    ("bisection", self.bisection.to_string()),
                ],
            ),
            (
                "estimator",
                vec![
                    (
                        "quadrature_tolerance",
                        self.quadrature_tolerance.to_string(),
                    ),
                    ("mc_samples", self.mc_samples.to_string()),
                    ("enumeration_limit", self.enumeration_limit.to_string()),
                ],
            ),
            (
                "experiment",
                vec![
                    ("sigma_o2_list", join(&self.sigma_o2_list)),
                    ("cost_list", join(&self.cost_list)),
                    ("ratio_list", join(&self.ratio_list)),
                    ("replicates", self.replicates.to_string()),
                    ("seed", self.seed.to_string()),
                ],
            ),
            (
                "output",
                vec![
                    ("directory", self.directory.clone()),
                    ("formats", self.formats.join(",")),
                ],
            ),
        ];
        let mut out = String::new();
        for (i, (name, entries)) in sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (key, value) in entries {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }
}
