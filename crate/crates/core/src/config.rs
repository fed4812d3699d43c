//! Experiment configuration in TOML.
//!
//! See `configs/geometric.toml` for a commented example.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::FieldSpec;
use crate::convergence::MonteCarloConfig;
use crate::davie::{DEFAULT_K2, DEFAULT_M};
use crate::error::{Error, Result};
use crate::integrate::{ReferenceScheme, DEFAULT_SUBSTEPS};
use crate::roughlift::DEFAULT_PAIR_BUDGET;

/// Environment variable naming the default parent directory for run outputs.
pub const OUT_DIR_ENV: &str = "WZLAB_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub field: FieldSpec,
    #[serde(default)]
    pub davie: DavieSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub d_list: Vec<u32>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<f64>,
    /// Defaults to `max(d_list) + 3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ref: Option<u32>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "one_usize")]
    pub workers: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_reference")]
    pub reference: ReferenceScheme,
    /// Scheme for the localized SDE `X^n` and the diagram reference.
    #[serde(default = "default_localized")]
    pub localized_scheme: ReferenceScheme,
    #[serde(default = "default_budget")]
    pub pair_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DavieSection {
    pub m: f64,
    pub k2: f64,
    pub probe_radius: f64,
    pub probe_samples: usize,
    /// Sampled ω for the bound-domination check.
    pub bound_samples: usize,
    /// Level of the driver in the bound-domination check.
    pub bound_level: u32,
    /// First horizon tried by the bound-domination check.
    pub start_horizon: f64,
}

impl Default for DavieSection {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            k2: DEFAULT_K2,
            probe_radius: 10.0,
            probe_samples: 500,
            bound_samples: 100,
            bound_level: 8,
            start_horizon: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Number of paths to export.
    pub count: usize,
    /// Finest generated level; defaults to `d_ref`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    pub binary: bool,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            count: 1,
            level: None,
            binary: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    /// Index of the Monte-Carlo sample whose ω is used.
    #[serde(default)]
    pub sample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub probe_radius: f64,
    pub samples: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            probe_radius: 100.0,
            samples: 1000,
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_n_list() -> Vec<f64> {
    vec![4.0, 16.0, 64.0, 256.0]
}
fn default_samples() -> usize {
    2000
}
fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}
fn default_alpha() -> f64 {
    0.4
}
fn default_reference() -> ReferenceScheme {
    ReferenceScheme::FineWongZakai
}
fn default_localized() -> ReferenceScheme {
    ReferenceScheme::Heun
}
fn default_budget() -> usize {
    DEFAULT_PAIR_BUDGET
}

/// Dotted `section.key` name of the TOML entry containing byte `offset`.
fn key_at(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            if !trimmed.starts_with('#') {
                key = k.trim().to_string();
            }
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| key_at(text, s.start))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if !(e.alpha > 1.0 / 3.0 && e.alpha < 0.5) {
            return Err(Error::config("experiment.alpha", format!("{} is outside (1/3, 1/2)", e.alpha)));
        }
        if !(e.horizon > 0.0 && e.horizon.is_finite()) {
            return Err(Error::config("experiment.horizon", "must be positive and finite"));
        }
        if e.samples < 2 {
            return Err(Error::config("experiment.samples", "must be at least 2"));
        }
        if e.substeps == 0 {
            return Err(Error::config("experiment.substeps", "must be at least 1"));
        }
        if e.workers == 0 {
            return Err(Error::config("experiment.workers", "must be at least 1"));
        }
        if e.d_list.is_empty() || e.d_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("experiment.d_list", "must be non-empty and strictly increasing"));
        }
        if e.d_list[0] == 0 {
            return Err(Error::config("experiment.d_list", "levels start at 1"));
        }
        let d_ref = self.d_ref();
        if d_ref < *e.d_list.last().unwrap() || d_ref > 24 {
            return Err(Error::config(
                "experiment.d_ref",
                format!("{d_ref} must be at least max(d_list) and at most 24"),
            ));
        }
        if e.n_list.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return Err(Error::config("experiment.n_list", "entries must be positive and finite"));
        }
        if e.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("experiment.x0", "entries must be finite"));
        }
        let field = self
            .field
            .build()
            .map_err(|err| Error::config("field", err.to_string()))?;
        if field.state_dim() != e.x0.len() {
            return Err(Error::config(
                "experiment.x0",
                format!("has {} entries but the field has dimension {}", e.x0.len(), field.state_dim()),
            ));
        }
        let d = &self.davie;
        if !(d.m > 0.0 && d.m < 1.0 / 3.0) {
            return Err(Error::config("davie.m", "must lie in (0, 1/3)"));
        }
        if !(d.k2 > 0.0 && d.k2 < 1.0) {
            return Err(Error::config("davie.k2", "must lie in (0, 1)"));
        }
        if !(d.probe_radius > 0.0) || d.probe_samples == 0 {
            return Err(Error::config("davie.probe_radius", "probe box must be non-empty"));
        }
        if d.bound_level == 0 || d.bound_level > 16 {
            return Err(Error::config("davie.bound_level", "must lie in 1..=16"));
        }
        if !(d.start_horizon > 0.0) {
            return Err(Error::config("davie.start_horizon", "must be positive"));
        }
        if let Some(level) = self.paths.level {
            if level == 0 || level > 24 {
                return Err(Error::config("paths.level", "must lie in 1..=24"));
            }
        }
        if self.solve.sample >= e.samples {
            return Err(Error::config("solve.sample", "must be below experiment.samples"));
        }
        if !(self.verify.probe_radius > 0.0) || self.verify.samples == 0 {
            return Err(Error::config("verify", "probe box must be non-empty"));
        }
        Ok(())
    }

    pub fn d_ref(&self) -> u32 {
        self.experiment
            .d_ref
            .unwrap_or_else(|| self.experiment.d_list.last().copied().unwrap_or(0) + 3)
    }

    pub fn monte_carlo(&self) -> MonteCarloConfig {
        let e = &self.experiment;
        MonteCarloConfig {
            horizon: e.horizon,
            samples: e.samples,
            seed: e.seed,
            substeps: e.substeps,
            workers: e.workers,
            blowup_tolerance: 0.01,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../configs/geometric.toml");

    #[test]
    fn shipped_example_parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(cfg.d_ref(), 14);
    }

    fn with(edit: &str) -> Result<ExperimentConfig> {
        let base = "[experiment]\nseed = 1\nx0 = [1.0]\nd_list = [4, 5, 6]\n";
        ExperimentConfig::from_toml_str(&format!("{base}{edit}\n[field]\nkind = \"geometric\"\na = 0.1\nc = 0.5\n"))
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = with("").unwrap();
        assert_eq!(cfg.d_ref(), 9);
        assert_eq!(cfg.experiment.samples, 2000);
        assert_eq!(cfg.davie.m, DEFAULT_M);
    }

    #[test]
    fn validation_names_the_field() {
        let field_of = |r: Result<ExperimentConfig>| match r {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(field_of(with("alpha = 0.5")), "experiment.alpha");
        assert_eq!(field_of(with("samples = 1")), "experiment.samples");
        assert_eq!(field_of(with("horizon = -1.0")), "experiment.horizon");
        assert_eq!(field_of(with("d_ref = 5")), "experiment.d_ref");
        assert_eq!(field_of(with("x0 = [1.0, 2.0]")), "experiment.x0");
        assert_eq!(field_of(with("samples = \"many\"")), "experiment.samples");
        assert!(matches!(with("unknown_key = 3"), Err(Error::Config { .. })));
    }

    #[test]
    fn unsorted_levels_are_rejected() {
        let cfg = "[experiment]\nseed = 1\nx0 = [1.0]\nd_list = [5, 4]\n[field]\nkind = \"quadratic\"\nc = 1.0\n";
        assert!(ExperimentConfig::from_toml_str(cfg).is_err());
    }
}
