//! Synthetic feature sources: corpora whose per-item feature values are
//! drawn from configured distributions instead of computed from text. They
//! let the detector and the mixture sweep run without any model access.

use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TextItem};
use crate::error::{Error, Result};

/// A univariate distribution for one synthetic feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum Dist {
    Normal { mean: f64, sd: f64 },
    /// Beta distribution on [lo, hi] matched to the given mean and standard
    /// deviation.
    ScaledBeta { mean: f64, sd: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Constant { value: f64 },
}

/// Beta shape parameters (a, b) with the given mean and standard deviation
/// on [lo, hi], by the method of moments.
pub fn beta_shape(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let width = hi - lo;
    if !(width > 0.0) || !(sd > 0.0) {
        return Err(Error::Config(format!("scaled beta needs lo < hi and sd > 0, got [{lo}, {hi}], sd {sd}")));
    }
    let m = (mean - lo) / width;
    let v = (sd / width).powi(2);
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Config(format!("scaled beta mean {mean} is outside ({lo}, {hi})")));
    }
    let common = m * (1.0 - m) / v - 1.0;
    if common <= 0.0 {
        return Err(Error::Config(format!(
            "scaled beta sd {sd} is too large for mean {mean} on [{lo}, {hi}]"
        )));
    }
    Ok((m * common, (1.0 - m) * common))
}

enum Sampler {
    Normal(Normal<f64>),
    Beta(Beta<f64>, f64, f64),
    Uniform(Uniform<f64>),
    LogNormal(LogNormal<f64>),
    Constant(f64),
}

impl Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Beta(d, lo, width) => lo + width * d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
            Sampler::LogNormal(d) => d.sample(rng),
            Sampler::Constant(v) => *v,
        }
    }
}

impl Dist {
    fn sampler(&self) -> Result<Sampler> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("invalid distribution {self:?}: {e}"));
        Ok(match *self {
            Dist::Normal { mean, sd } => Sampler::Normal(Normal::new(mean, sd).map_err(|e| bad(&e))?),
            Dist::ScaledBeta { mean, sd, lo, hi } => {
                let (a, b) = beta_shape(mean, sd, lo, hi)?;
                Sampler::Beta(Beta::new(a, b).map_err(|e| bad(&e))?, lo, hi - lo)
            }
            Dist::Uniform { lo, hi } => Sampler::Uniform(Uniform::new(lo, hi).map_err(|e| bad(&e))?),
            Dist::LogNormal { mu, sigma } => Sampler::LogNormal(LogNormal::new(mu, sigma).map_err(|e| bad(&e))?),
            Dist::Constant { value } => Sampler::Constant(value),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub dist: Dist,
}

/// A named generator of feature-only items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub name: String,
    pub features: Vec<FeatureSpec>,
}

impl SyntheticSource {
    pub fn new(name: impl Into<String>) -> Self {
        SyntheticSource {
            name: name.into(),
            features: Vec::new(),
        }
    }

    pub fn with(mut self, feature: impl Into<String>, dist: Dist) -> Self {
        self.features.push(FeatureSpec {
            name: feature.into(),
            dist,
        });
        self
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Draws `n` items. Values are sampled item by item in feature order from
    /// a ChaCha8 stream seeded with `seed`, so output is reproducible.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Corpus> {
        let samplers = self
            .features
            .iter()
            .map(|f| f.dist.sampler())
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items = (0..n)
            .map(|i| {
                let mut item = TextItem::new(format!("{}-{i:06}", self.name), format!("synthetic item {i}"));
                item.source_label = self.name.clone();
                for (spec, s) in self.features.iter().zip(&samplers) {
                    item.set_feature(&spec.name, Some(s.sample(&mut rng)));
                }
                item
            })
            .collect();
        let mut corpus = Corpus::new(items).with_name(self.name.clone());
        corpus
            .meta
            .insert("synthetic".into(), serde_json::json!({ "seed": seed, "source": self }));
        Ok(corpus)
    }
}

/// The eleven features of the bundled calibrated pair.
pub const CALIBRATED_FEATURES: [&str; 11] = [
    "Analytic",
    "Authentic",
    "Clout",
    "Sixltr",
    "Tone",
    "WC",
    "compound",
    "flesch",
    "maas",
    "mtld",
    "verb",
];

fn normal(mean: f64, sd: f64) -> Dist {
    Dist::Normal { mean, sd }
}

fn unit_beta(mean: f64, sd: f64) -> Dist {
    Dist::ScaledBeta {
        mean,
        sd,
        lo: -1.0,
        hi: 1.0,
    }
}

fn pct_beta(mean: f64, sd: f64) -> Dist {
    Dist::ScaledBeta {
        mean,
        sd,
        lo: 0.0,
        hi: 100.0,
    }
}

/// A pair of sources over eleven features with graded separations: word
/// count differs most, then sentiment, then lexical diversity, with several
/// features nearly or exactly identical. Values are continuous, so ties do
/// not occur.
pub fn calibrated_pair() -> (SyntheticSource, SyntheticSource) {
    let a = SyntheticSource::new("source-a")
        .with("Analytic", pct_beta(60.0, 20.0))
        .with("Authentic", pct_beta(30.0, 18.0))
        .with("Clout", pct_beta(55.0, 15.0))
        .with("Sixltr", normal(22.0, 5.0))
        .with("Tone", pct_beta(70.0, 22.0))
        .with("WC", normal(260.0, 50.0))
        .with("compound", unit_beta(0.55, 0.45))
        .with("flesch", normal(55.0, 15.0))
        .with("maas", normal(0.060, 0.010))
        .with("mtld", normal(80.0, 20.0))
        .with("verb", normal(15.0, 3.0));
    let b = SyntheticSource::new("source-b")
        .with("Analytic", pct_beta(60.0, 20.0))
        .with("Authentic", pct_beta(36.5, 18.0))
        .with("Clout", pct_beta(55.0, 15.0))
        .with("Sixltr", normal(22.0, 5.0))
        .with("Tone", pct_beta(79.0, 18.0))
        .with("WC", normal(408.0, 50.0))
        .with("compound", unit_beta(0.88, 0.15))
        .with("flesch", normal(55.5, 15.0))
        .with("maas", normal(0.0612, 0.010))
        .with("mtld", normal(104.0, 20.0))
        .with("verb", normal(16.75, 3.0));
    (a, b)
}
