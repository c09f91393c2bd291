//! File-backed configuration for the command-line tool. A TOML file mirrors
//! the library configuration types; command-line flags override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{DetectorConfig, ReportFormat};
use crate::error::{Error, Result};
use crate::features::{CategoryLexicon, Lexicons, SentimentLexicon};
use crate::mixture::SweepConfig;
use crate::sampler::SamplerConfig;

/// Optional lexicon files replacing the bundled dictionaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconPaths {
    /// Tab-separated token and valence.
    pub sentiment: Option<PathBuf>,
    pub boosters: Option<PathBuf>,
    pub negators: Option<PathBuf>,
    /// Tab-separated pattern and category.
    pub categories: Option<PathBuf>,
}

impl LexiconPaths {
    pub fn load(&self) -> Result<Lexicons> {
        let sentiment = match &self.sentiment {
            Some(v) => SentimentLexicon::from_files(v, self.boosters.as_deref(), self.negators.as_deref())?,
            None if self.boosters.is_some() || self.negators.is_some() => {
                return Err(Error::Config(
                    "booster and negator lists need a sentiment valence file".into(),
                ))
            }
            None => SentimentLexicon::vader(),
        };
        let category = match &self.categories {
            Some(p) => CategoryLexicon::from_file(p)?,
            None => CategoryLexicon::open_verbs(),
        };
        Ok(Lexicons { sentiment, category })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub detector: DetectorConfig,
    pub sampler: SamplerConfig,
    pub lexicons: LexiconPaths,
    pub mixture: SweepConfig,
    pub seed: u64,
    pub format: ReportFormat,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            detector: DetectorConfig::default(),
            sampler: SamplerConfig::default(),
            lexicons: LexiconPaths::default(),
            mixture: SweepConfig::default(),
            seed: 0,
            format: ReportFormat::Text,
        }
    }
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Loads the file when given, else the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        path.map(Self::from_file).transpose().map(Option::unwrap_or_default)
    }

    /// Applies global flags. `alpha` and `seed` reach every section that
    /// uses them.
    pub fn apply_overrides(&mut self, alpha: Option<f64>, seed: Option<u64>, format: Option<ReportFormat>) {
        if let Some(a) = alpha {
            self.detector.alpha = a;
            self.mixture.alpha = a;
        }
        if let Some(s) = seed {
            self.seed = s;
            self.mixture.seed = s;
        }
        if let Some(f) = format {
            self.format = f;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.sampler.validate()?;
        crate::stats::check_alpha(self.mixture.alpha)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_overrides() {
        let mut c = CliConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(CliConfig::from_toml(&text).unwrap(), c);
        c.apply_overrides(Some(0.01), Some(7), Some(ReportFormat::Json));
        assert_eq!((c.detector.alpha, c.mixture.alpha, c.seed, c.mixture.seed), (0.01, 0.01, 7, 7));
        assert_eq!(c.format, ReportFormat::Json);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = CliConfig::from_toml("seed = 3\n[sampler]\nmode = \"chat\"\n[detector]\nalpha = 0.1\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.sampler.effective_top_p(), 0.95);
        assert_eq!(c.sampler.temperature, 1.0);
        assert_eq!(c.detector.alpha, 0.1);
        assert_eq!(c.detector.features.len(), 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(CliConfig::from_toml("sed = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn boosters_without_valence_is_an_error() {
        let l = LexiconPaths {
            boosters: Some("b.tsv".into()),
            ..Default::default()
        };
        assert!(l.load().is_err());
        assert!(LexiconPaths::default().load().is_ok());
    }
}
