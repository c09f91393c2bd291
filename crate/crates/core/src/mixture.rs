//! Mixture sensitivity: series of corpora in which a growing, nested set of
//! items from source A is replaced by items from source B, and the accuracy
//! with which K-S tests tell adjacent members of the series apart.
//!
//! Series are index-based: a step is a list of references into the two
//! source corpora, so building one never copies item text.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TextItem};
use crate::detect::default_fisher_features;
use crate::error::{Error, Result};
use crate::stats::{check_alpha, ecdf_distance, fisher_combine, floor_p, ks_p_asymptotic};

/// Replacement fractions used when none are given.
pub const DEFAULT_DELTAS: [f64; 6] = [0.10, 0.05, 0.04, 0.03, 0.02, 0.01];
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// Fraction of the corpus replaced per step.
    pub delta: f64,
    /// Items per corpus.
    pub n: usize,
    pub seed: u64,
}

impl MixtureSpec {
    /// Items replaced between adjacent steps, round(δ·n).
    pub fn step_size(&self) -> usize {
        (self.delta * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("mixture corpora need n >= 2, got {}", self.n)));
        }
        if self.step_size() == 0 {
            return Err(Error::InvalidArgument(format!(
                "delta {} replaces no items at n = {}",
                self.delta, self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemRef {
    pub source: Source,
    pub index: usize,
}

/// A δ-replacement series. Step i holds `replaced[i]` items from B and the
/// rest from A. The k-th replacement always swaps out `a_pick[order[k]]`
/// for `b_pick[k]`, so replaced sets are nested across steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSeries {
    pub spec: MixtureSpec,
    a_pick: Vec<usize>,
    b_pick: Vec<usize>,
    order: Vec<usize>,
    replaced: Vec<usize>,
}

impl MixtureSeries {
    /// Builds a series over sources with `a_len` and `b_len` items.
    pub fn build(a_len: usize, b_len: usize, spec: MixtureSpec) -> Result<Self> {
        spec.validate()?;
        for (len, name) in [(a_len, "A"), (b_len, "B")] {
            if len < spec.n {
                return Err(Error::InsufficientData {
                    feature: "*".into(),
                    corpus: format!("source {name}"),
                    have: len,
                    need: spec.n,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let a_pick = index::sample(&mut rng, a_len, spec.n).into_vec();
        let b_pick = index::sample(&mut rng, b_len, spec.n).into_vec();
        let mut order: Vec<usize> = (0..spec.n).collect();
        order.shuffle(&mut rng);

        let m = spec.step_size();
        let mut replaced = vec![0];
        while *replaced.last().unwrap() < spec.n {
            replaced.push((replaced.last().unwrap() + m).min(spec.n));
        }
        Ok(MixtureSeries {
            spec,
            a_pick,
            b_pick,
            order,
            replaced,
        })
    }

    pub fn len(&self) -> usize {
        self.replaced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replaced.is_empty()
    }

    /// Number of B items at step `i`.
    pub fn replaced_count(&self, i: usize) -> usize {
        self.replaced[i]
    }

    /// Whether steps `i` and `i + 1` differ by exactly round(δ·n) items. Only
    /// the last pair can fall short, when δ·n does not divide n.
    pub fn is_full_pair(&self, i: usize) -> bool {
        self.replaced[i + 1] - self.replaced[i] == self.spec.step_size()
    }

    /// Item references of step `i`: the B items first, then the A items.
    pub fn step(&self, i: usize) -> Vec<ItemRef> {
        let r = self.replaced[i];
        let mut kept: Vec<usize> = self.order[r..].iter().map(|&p| self.a_pick[p]).collect();
        kept.sort_unstable();
        self.b_pick[..r]
            .iter()
            .map(|&index| ItemRef { source: Source::B, index })
            .chain(kept.into_iter().map(|index| ItemRef { source: Source::A, index }))
            .collect()
    }

    /// Materializes step `i` as a corpus, labelling each item with its source.
    pub fn step_corpus(&self, i: usize, a: &Corpus, b: &Corpus) -> Corpus {
        let items = self
            .step(i)
            .into_iter()
            .map(|r| {
                let mut item: TextItem = match r.source {
                    Source::A => a.items[r.index].clone(),
                    Source::B => b.items[r.index].clone(),
                };
                item.source_label = format!("{:?}", r.source);
                item
            })
            .collect();
        let name = format!("mixture step {i} ({} of {} replaced)", self.replaced[i], self.spec.n);
        Corpus::new(items).with_name(name)
    }
}

/// Builds a series from two corpora.
pub fn build_series(a: &Corpus, b: &Corpus, spec: MixtureSpec) -> Result<MixtureSeries> {
    MixtureSeries::build(a.len(), b.len(), spec)
}

/// Seed for trial `t`: trial 0 uses the series seed itself.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Per-item values of one feature, `None` where undefined.
fn column(c: &Corpus, feature: &str) -> Vec<Option<f64>> {
    c.items.iter().map(|it| it.feature(feature)).collect()
}

fn step_values(series: &MixtureSeries, i: usize, a: &[Option<f64>], b: &[Option<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = series
        .step(i)
        .into_iter()
        .filter_map(|r| match r.source {
            Source::A => a[r.index],
            Source::B => b[r.index],
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn pair_p(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidArgument(
            "a mixture step has fewer than two values for a feature".into(),
        ));
    }
    let d = ecdf_distance(x, y)?;
    Ok(floor_p(ks_p_asymptotic(d, x.len(), y.len())).0)
}

/// p-values for every full adjacent pair of one series, one row per pair and
/// one column per feature.
fn series_p_values(
    series: &MixtureSeries,
    columns: &[(Vec<Option<f64>>, Vec<Option<f64>>)],
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<usize> = (0..series.len() - 1).filter(|&i| series.is_full_pair(i)).collect();
    let mut out = vec![Vec::with_capacity(columns.len()); pairs.len()];
    for (a_col, b_col) in columns {
        let mut prev: Option<(usize, Vec<f64>)> = None;
        for (row, &i) in pairs.iter().enumerate() {
            let x = match prev.take() {
                Some((j, v)) if j == i => v,
                _ => step_values(series, i, a_col, b_col),
            };
            let y = step_values(series, i + 1, a_col, b_col);
            out[row].push(pair_p(&x, &y)?);
            prev = Some((i + 1, y));
        }
    }
    Ok(out)
}

/// Rejection percentage for each full adjacent pair of `series`, over
/// `trials` replacement draws (trial t rebuilds the series with
/// [`trial_seed`]).
pub fn adjacent_pair_tests(
    a: &Corpus,
    b: &Corpus,
    series: &MixtureSeries,
    feature: &str,
    alpha: f64,
    trials: usize,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if series.len() < 2 {
        return Err(Error::InvalidArgument("series needs at least two steps".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let columns = vec![(column(a, feature), column(b, feature))];
    let per_trial: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = if t == 0 {
                series.clone()
            } else {
                MixtureSeries::build(
                    a.len(),
                    b.len(),
                    MixtureSpec {
                        seed: trial_seed(series.spec.seed, t),
                        ..series.spec
                    },
                )?
            };
            Ok(series_p_values(&s, &columns)?.into_iter().map(|row| row[0] < alpha).collect())
        })
        .collect::<Result<_>>()?;
    let pairs = per_trial[0].len();
    Ok((0..pairs)
        .map(|p| 100.0 * per_trial.iter().filter(|t| t[p]).count() as f64 / trials as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub features: Vec<String>,
    pub sizes: Vec<usize>,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub fisher_features: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            deltas: DEFAULT_DELTAS.to_vec(),
            features: Vec::new(),
            sizes: vec![11_000],
            alpha: 0.05,
            trials: DEFAULT_TRIALS,
            seed: 0,
            fisher_features: default_fisher_features(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub sample_size: usize,
    pub feature: String,
    /// Accuracy percent per δ, in the table's δ order.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub deltas: Vec<f64>,
    pub alpha: f64,
    pub trials: usize,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityTable {
    pub fn row(&self, sample_size: usize, feature: &str) -> Option<&SensitivityRow> {
        self.rows
            .iter()
            .find(|r| r.sample_size == sample_size && r.feature == feature)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Sample Size".to_string(), "Feature".to_string()];
        header.extend(self.deltas.iter().map(|d| format!("delta={}%", fmt_pct(*d))));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.sample_size.to_string(), r.feature.clone()];
            rec.extend(r.accuracy.iter().map(|a| a.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn fmt_pct(delta: f64) -> String {
    let pct = (delta * 100.0 * 1e6).round() / 1e6;
    pct.to_string()
}

pub fn bonferroni_row_label() -> String {
    "Bonferroni(features)".into()
}

pub fn fisher_row_label(features: &[String]) -> String {
    format!("Fisher({})", features.join(", "))
}

/// Runs the full sweep. Rows are ordered by sample size, then feature name;
/// the Bonferroni row (over all requested features, present when there are
/// at least two) and the Fisher row (present when every Fisher feature was
/// requested) follow the feature rows of each size.
///
/// Each cell is the rejection percentage over all full adjacent pairs of the
/// series and all trials.
pub fn run_sensitivity_sweep(a: &Corpus, b: &Corpus, cfg: &SweepConfig) -> Result<SensitivityTable> {
    check_alpha(cfg.alpha)?;
    if cfg.deltas.is_empty() || cfg.features.is_empty() || cfg.sizes.is_empty() {
        return Err(Error::InvalidArgument("sweep needs deltas, features and sizes".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let features: Vec<String> = cfg.features.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let fisher_idx: Option<Vec<usize>> = cfg
        .fisher_features
        .iter()
        .map(|f| features.iter().position(|g| g == f))
        .collect::<Option<Vec<_>>>()
        .filter(|v| !v.is_empty());
    let columns: Vec<(Vec<Option<f64>>, Vec<Option<f64>>)> =
        features.iter().map(|f| (column(a, f), column(b, f))).collect();
    let k = features.len();
    let corrected = cfg.alpha / k as f64;

    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();

    let mut rows = Vec::new();
    for &n in &sizes {
        // hits[delta][feature, bonferroni, fisher]
        let mut cells = vec![vec![0.0; k + 2]; cfg.deltas.len()];
        for (di, &delta) in cfg.deltas.iter().enumerate() {
            let base = MixtureSpec {
                delta,
                n,
                seed: cfg.seed,
            };
            base.validate()?;
            let trial_hits: Vec<(Vec<usize>, usize)> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let spec = MixtureSpec {
                        seed: trial_seed(cfg.seed ^ delta.to_bits() ^ n as u64, t),
                        ..base
                    };
                    let s = MixtureSeries::build(a.len(), b.len(), spec)?;
                    let ps = series_p_values(&s, &columns)?;
                    let mut hits = vec![0usize; k + 2];
                    for row in &ps {
                        for (j, p) in row.iter().enumerate() {
                            if *p < cfg.alpha {
                                hits[j] += 1;
                            }
                        }
                        if row.iter().any(|p| *p < corrected) {
                            hits[k] += 1;
                        }
                        if let Some(idx) = &fisher_idx {
                            let fp: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
                            if fisher_combine(&fp)?.p_value < cfg.alpha {
                                hits[k + 1] += 1;
                            }
                        }
                    }
                    Ok((hits, ps.len()))
                })
                .collect::<Result<_>>()?;
            let tests: usize = trial_hits.iter().map(|(_, n)| n).sum();
            for j in 0..k + 2 {
                let h: usize = trial_hits.iter().map(|(hits, _)| hits[j]).sum();
                cells[di][j] = if tests == 0 { 0.0 } else { 100.0 * h as f64 / tests as f64 };
            }
        }
        let row_for = |j: usize, label: String| SensitivityRow {
            sample_size: n,
            feature: label,
            accuracy: cells.iter().map(|c| c[j]).collect(),
        };
        for (j, f) in features.iter().enumerate() {
            rows.push(row_for(j, f.clone()));
        }
        if k >= 2 {
            rows.push(row_for(k, bonferroni_row_label()));
        }
        if fisher_idx.is_some() {
            rows.push(row_for(k + 1, fisher_row_label(&cfg.fisher_features)));
        }
    }
    Ok(SensitivityTable {
        deltas: cfg.deltas.clone(),
        alpha: cfg.alpha,
        trials: cfg.trials,
        rows,
    })
}
