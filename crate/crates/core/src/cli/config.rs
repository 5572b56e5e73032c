//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::design::{Assignment, DesignKind, DesignSpec, Fractions, MatchMode};
use crate::estimate::{Estimator, Weighting};
use crate::extrapolate::SynthSpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub world: Option<WorldConfig>,
    pub design: Option<DesignConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Upper bound on worker threads.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    Movie,
    Figure2,
    AppendixD,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub kind: WorldKind,
    pub seed: u64,
    pub n: Option<usize>,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default = "default_lift")]
    pub lift: f64,
    #[serde(default = "default_target")]
    pub target_mean: f64,
    /// Shape-sum numerator for preference draws.
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    #[serde(default = "yes")]
    pub personalized: bool,
    pub variant: Option<Variant>,
    /// Synthetic curve parameters.
    #[serde(default)]
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub personalization_asymptote: f64,
    pub personalization_rate: f64,
    pub learning_asymptote: f64,
    pub learning_rate: f64,
    pub direct: f64,
    pub noise_sd: f64,
    pub horizon: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let s = SynthSpec::default();
        Self {
            personalization_asymptote: s.personalization_asymptote,
            personalization_rate: s.personalization_rate,
            learning_asymptote: s.learning_asymptote,
            learning_rate: s.learning_rate,
            direct: s.direct,
            noise_sd: s.noise_sd,
            horizon: s.horizon,
        }
    }
}

impl SyntheticConfig {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            horizon: self.horizon,
            personalization_asymptote: self.personalization_asymptote,
            personalization_rate: self.personalization_rate,
            learning_asymptote: self.learning_asymptote,
            learning_rate: self.learning_rate,
            direct: self.direct,
            noise_sd: self.noise_sd,
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub kind: DesignKind,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub fractions: Fractions,
    pub cdt_per_day: Option<usize>,
    pub cdt_rate: Option<f64>,
    pub cluster_count: Option<usize>,
    #[serde(default)]
    pub leave_one_out: bool,
    #[serde(default)]
    pub matching: MatchMode,
    /// Cluster source for clustered designs and within-cluster matching;
    /// defaults to the population clusters for movie worlds and to k-means
    /// otherwise.
    pub cluster_source: Option<ClusterSource>,
    #[serde(default = "yes")]
    pub personalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSource {
    /// k-means on burn-in features.
    Centroid,
    /// The world's own population clusters.
    Population,
    /// Uniformly random equal-size clusters.
    Random,
}

impl DesignConfig {
    pub fn spec(&self, n: usize) -> Result<DesignSpec, String> {
        let assignment = match (self.cdt_per_day, self.cdt_rate) {
            (Some(k), None) => Assignment::Complete { cdt_per_day: k },
            (None, Some(r)) => Assignment::Bernoulli { cdt_rate: r },
            (None, None) if self.kind == DesignKind::Ab => Assignment::Complete { cdt_per_day: 0 },
            (None, None) => return Err("design.cdt_per_day or design.cdt_rate is required".into()),
            (Some(_), Some(_)) => return Err("design.cdt_per_day and design.cdt_rate are exclusive".into()),
        };
        Ok(DesignSpec {
            kind: self.kind,
            n,
            horizon: self.horizon,
            fractions: self.fractions,
            assignment,
            cluster_count: self.cluster_count,
            leave_one_out: self.leave_one_out,
            burn_in: self.burn_in,
            matching: self.matching,
            personalized: self.personalized,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Estimator names; empty means every estimator.
    pub estimators: Vec<String>,
    pub weighting: Weighting,
    /// Horizon of the long-run personalization reference.
    pub oracle_horizon: usize,
    /// Periods at which fitted curves are extrapolated.
    pub extrapolate_to: Vec<usize>,
    pub horizons: Vec<usize>,
    pub replicates: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            estimators: Vec::new(),
            weighting: Weighting::HorvitzThompson,
            oracle_horizon: 200,
            extrapolate_to: vec![100, 300],
            horizons: (1..=9).map(|k| 5 * k).collect(),
            replicates: 300,
        }
    }
}

impl AnalysisConfig {
    pub fn estimators(&self) -> Result<Vec<Estimator>, String> {
        if self.estimators.is_empty() {
            return Ok(Estimator::ALL.to_vec());
        }
        self.estimators
            .iter()
            .map(|name| Estimator::parse(name).ok_or_else(|| format!("analysis.estimators: unknown estimator `{name}`")))
            .collect()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Also write served personalization vectors.
    pub features: bool,
}

fn default_clusters() -> usize {
    4
}
fn default_lift() -> f64 {
    0.5
}
fn default_target() -> f64 {
    0.25
}
fn default_concentration() -> f64 {
    100.0
}
fn yes() -> bool {
    true
}

/// A configuration problem, reported with the line it refers to when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let at = e.span().map(|s| format!(":{}", line_of(text, s.start))).unwrap_or_default();
        ConfigError(format!("{}{at}: {}", origin.display(), e.message()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_config(&text, path)
}

impl RunConfig {
    pub fn world(&self) -> Result<&WorldConfig, ConfigError> {
        self.world.as_ref().ok_or_else(|| ConfigError("missing section `world`".into()))
    }

    pub fn design(&self) -> Result<&DesignConfig, ConfigError> {
        self.design.as_ref().ok_or_else(|| ConfigError("missing section `design`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_key_is_named_with_its_line() {
        let text = "[world]\nkind = \"movie\"\nseed = 1\n\n[design]\nhorizon = 2\nseed = 1\n";
        let err = parse_config(text, Path::new("run.toml")).unwrap_err();
        assert!(err.0.contains("kind"), "{}", err.0);
        assert!(err.0.starts_with("run.toml:5"), "{}", err.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("workers = 2\ncolour = 1\n", Path::new("c.toml")).unwrap_err();
        assert!(err.0.contains("colour"), "{}", err.0);
    }

    #[test]
    fn defaults_fill_analysis() {
        let cfg = parse_config("[world]\nkind = \"figure2\"\nseed = 0\nn = 4\n", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.analysis.replicates, 300);
        assert_eq!(cfg.analysis.estimators().unwrap().len(), Estimator::ALL.len());
        assert!(cfg.design().is_err());
    }
}
