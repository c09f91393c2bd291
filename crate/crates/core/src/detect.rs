//! Corpus-level change detection: per-feature K-S tests combined into one
//! verdict, plus report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_halves, Corpus, DistributionSummary};
use crate::error::{Error, Result};
use crate::features::Feature;
use crate::stats::{bonferroni_family, fisher_combine, format_p, two_sample_ks, FamilyVerdict, FisherResult, KsResult};

/// Below this many items per side the report warns about low power.
pub const LOW_POWER_N: usize = 30;

/// Minimum corpus size for a split-half sanity check.
pub const MIN_SANITY_ITEMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateMode {
    /// Decide on a single feature's test at α.
    PerFeature,
    /// Reject if any feature's p is below α/k.
    Bonferroni,
    /// Reject if Fisher's combined p over the Fisher features is below α.
    Fisher,
}

impl std::str::FromStr for AggregateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-feature" => Ok(AggregateMode::PerFeature),
            "bonferroni" => Ok(AggregateMode::Bonferroni),
            "fisher" => Ok(AggregateMode::Fisher),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregate mode {other:?} (expected per-feature, bonferroni or fisher)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Same,
    Changed,
}

/// The Fisher feature triple used by default.
pub fn default_fisher_features() -> Vec<String> {
    vec!["WC".into(), "compound".into(), "mtld".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub alpha: f64,
    pub features: Vec<String>,
    /// Mode that determines the verdict.
    pub decision: AggregateMode,
    /// Additional aggregates to compute and report.
    pub aggregate_modes: Vec<AggregateMode>,
    pub fisher_features: Vec<String>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            alpha: 0.05,
            features: Feature::names().into_iter().map(String::from).collect(),
            decision: AggregateMode::Bonferroni,
            aggregate_modes: vec![AggregateMode::Bonferroni],
            fisher_features: default_fisher_features(),
        }
    }
}

impl DetectorConfig {
    pub fn with_features<S: Into<String>>(mut self, features: impl IntoIterator<Item = S>) -> Self {
        self.features = features.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_decision(mut self, mode: AggregateMode) -> Self {
        self.decision = mode;
        self
    }

    fn uses(&self, mode: AggregateMode) -> bool {
        self.decision == mode || self.aggregate_modes.contains(&mode)
    }

    pub fn validate(&self) -> Result<()> {
        crate::stats::check_alpha(self.alpha)?;
        if self.features.is_empty() {
            return Err(Error::Config("feature list is empty".into()));
        }
        if self.decision == AggregateMode::PerFeature && self.features.len() != 1 {
            return Err(Error::Config(format!(
                "per-feature decision needs exactly one feature, got {}",
                self.features.len()
            )));
        }
        if self.uses(AggregateMode::Fisher) {
            if self.fisher_features.is_empty() {
                return Err(Error::Config("Fisher feature list is empty".into()));
            }
            if let Some(f) = self.fisher_features.iter().find(|f| !self.features.contains(f)) {
                return Err(Error::Config(format!(
                    "Fisher feature {f:?} is not among the configured features"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPair {
    pub feature: String,
    pub a: DistributionSummary,
    pub b: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFeature {
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    /// Free-form title, e.g. which corpora were compared.
    pub title: String,
    /// Names of the compared corpora.
    pub corpus_a: String,
    pub corpus_b: String,
    pub alpha: f64,
    pub decision: AggregateMode,
    pub per_feature: Vec<KsResult>,
    pub summaries: Vec<SummaryPair>,
    pub skipped: Vec<SkippedFeature>,
    pub bonferroni: Option<FamilyVerdict>,
    pub fisher: Option<FisherResult>,
    pub fisher_features: Vec<String>,
    pub verdict: Verdict,
    pub excluded_counts: BTreeMap<String, (usize, usize)>,
    pub warnings: Vec<String>,
}

impl DecisionReport {
    pub fn result(&self, feature: &str) -> Option<&KsResult> {
        self.per_feature.iter().find(|r| r.feature == feature)
    }

    fn summary(&self, feature: &str) -> Option<&SummaryPair> {
        self.summaries.iter().find(|s| s.feature == feature)
    }
}

fn dedup(names: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(names.len());
    for n in names {
        if !out.contains(n) {
            out.push(n.clone());
        }
    }
    out
}

/// Tests every configured feature and combines the results per the
/// configured decision mode. Features that cannot be tested (absent, or
/// fewer than two values on a side) are listed as skipped with a reason.
pub fn compare_corpora(a: &Corpus, b: &Corpus, cfg: &DetectorConfig) -> Result<DecisionReport> {
    cfg.validate()?;
    let features = dedup(&cfg.features);

    let outcomes: Vec<Result<KsResult>> = features
        .par_iter()
        .map(|f| two_sample_ks(a, b, f, cfg.alpha))
        .collect();

    let mut per_feature = Vec::new();
    let mut skipped = Vec::new();
    let mut summaries = Vec::new();
    let mut excluded_counts = BTreeMap::new();
    for (f, outcome) in features.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                excluded_counts.insert(f.clone(), r.excluded);
                let (xs, _) = a.feature_values(f);
                let (ys, _) = b.feature_values(f);
                if let (Some(sa), Some(sb)) = (
                    DistributionSummary::from_values(f, &xs),
                    DistributionSummary::from_values(f, &ys),
                ) {
                    summaries.push(SummaryPair {
                        feature: f.clone(),
                        a: sa,
                        b: sb,
                    });
                }
                per_feature.push(r);
            }
            Err(e) if e.is_insufficient_data() => skipped.push(SkippedFeature {
                feature: f.clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if per_feature.is_empty() {
        return Err(Error::NoTestableFeatures {
            reasons: skipped.iter().map(|s| s.reason.clone()).collect(),
        });
    }

    let bonferroni = if cfg.uses(AggregateMode::Bonferroni) {
        let ps: Vec<(String, f64)> = per_feature.iter().map(|r| (r.feature.clone(), r.p_value)).collect();
        Some(bonferroni_family(&ps, cfg.alpha)?)
    } else {
        None
    };

    let fisher_features = dedup(&cfg.fisher_features);
    let fisher = if cfg.uses(AggregateMode::Fisher) {
        let missing: Vec<String> = skipped
            .iter()
            .filter(|s| fisher_features.contains(&s.feature))
            .map(|s| s.reason.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::NoTestableFeatures { reasons: missing });
        }
        let ps: Vec<f64> = fisher_features
            .iter()
            .filter_map(|f| per_feature.iter().find(|r| &r.feature == f))
            .map(|r| r.p_value)
            .collect();
        Some(fisher_combine(&ps)?)
    } else {
        None
    };

    let changed = match cfg.decision {
        AggregateMode::PerFeature => per_feature[0].reject,
        AggregateMode::Bonferroni => bonferroni.as_ref().is_some_and(|v| v.reject_any),
        AggregateMode::Fisher => fisher.as_ref().is_some_and(|r| r.p_value < cfg.alpha),
    };

    let mut warnings = Vec::new();
    for r in &per_feature {
        let n = r.n1.min(r.n2);
        if n < LOW_POWER_N {
            warnings.push(format!(
                "low power: feature {} has only {n} items on one side (fewer than {LOW_POWER_N})",
                r.feature
            ));
        }
    }

    Ok(DecisionReport {
        title: format!("{} vs {}", a.display_name(), b.display_name()),
        corpus_a: a.display_name(),
        corpus_b: b.display_name(),
        alpha: cfg.alpha,
        decision: cfg.decision,
        per_feature,
        summaries,
        skipped,
        bonferroni,
        fisher,
        fisher_features,
        verdict: if changed { Verdict::Changed } else { Verdict::Same },
        excluded_counts,
        warnings,
    })
}

/// Compares two seeded random halves of one corpus; a calibrated detector
/// should report no change.
pub fn split_sanity_check(c: &Corpus, cfg: &DetectorConfig, seed: u64) -> Result<DecisionReport> {
    if c.len() < MIN_SANITY_ITEMS {
        return Err(Error::InsufficientData {
            feature: "*".into(),
            corpus: c.display_name(),
            have: c.len(),
            need: MIN_SANITY_ITEMS,
        });
    }
    let (first, second) = split_halves(c, seed)?;
    let name = c.display_name();
    let first = first.with_name(format!("{name} half 1"));
    let second = second.with_name(format!("{name} half 2"));
    let mut report = compare_corpora(&first, &second, cfg)?;
    report.title = format!("sanity check: split halves of {} (seed {seed})", c.display_name());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

/// Header of the per-feature CSV table.
pub const CSV_HEADER: [&str; 17] = [
    "Sample Size",
    "Model 1",
    "Model 2",
    "Feature",
    "K-S Statistic",
    "p-value",
    "surprisal",
    "Reject H0",
    "n1",
    "n2",
    "excluded_a",
    "excluded_b",
    "mu_a",
    "sigma_a",
    "mu_b",
    "sigma_b",
    "underflow",
];

fn truth(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}

fn bonferroni_label(k: usize) -> String {
    format!("Bonferroni({k} features)")
}

fn fisher_label(features: &[String]) -> String {
    format!("Fisher({})", features.join(","))
}

/// Bonferroni-adjusted family p-value, min(k·min p, 1).
fn bonferroni_p(r: &DecisionReport, v: &FamilyVerdict) -> f64 {
    let min_p = r.per_feature.iter().map(|x| x.p_value).fold(1.0, f64::min);
    (min_p * v.k as f64).min(1.0)
}

pub fn render_report(r: &DecisionReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(r).expect("report serializes"),
        ReportFormat::Csv => render_csv(r),
        ReportFormat::Text => render_text(r),
    }
}

fn render_csv(r: &DecisionReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for k in &r.per_feature {
        let s = r.summary(&k.feature);
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            (k.n1 + k.n2).to_string(),
            r.corpus_a.clone(),
            r.corpus_b.clone(),
            Feature::report_label(&k.feature).to_owned(),
            k.d_stat.to_string(),
            k.p_value.to_string(),
            k.surprisal.to_string(),
            truth(k.reject).to_owned(),
            k.n1.to_string(),
            k.n2.to_string(),
            k.excluded.0.to_string(),
            k.excluded.1.to_string(),
            num(s.map(|s| s.a.mu)),
            num(s.map(|s| s.a.sigma)),
            num(s.map(|s| s.b.mu)),
            num(s.map(|s| s.b.sigma)),
            truth(k.underflow).to_owned(),
        ])
        .expect("in-memory write");
    }
    let blank = String::new;
    if let Some(v) = &r.bonferroni {
        let p = bonferroni_p(r, v);
        w.write_record([
            blank(),
            r.corpus_a.clone(),
            r.corpus_b.clone(),
            bonferroni_label(v.k),
            blank(),
            p.to_string(),
            (0.0 - p.log2()).to_string(),
            truth(v.reject_any).to_owned(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
        ])
        .expect("in-memory write");
    }
    if let Some(f) = &r.fisher {
        w.write_record([
            blank(),
            r.corpus_a.clone(),
            r.corpus_b.clone(),
            fisher_label(&r.fisher_features),
            blank(),
            f.p_value.to_string(),
            f.surprisal.to_string(),
            truth(f.p_value < r.alpha).to_owned(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            truth(f.underflow).to_owned(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn render_text(r: &DecisionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", r.title);
    let _ = writeln!(out, "alpha = {}, decision mode = {:?}", r.alpha, r.decision);
    let _ = writeln!(out);

    let header = [
        "Sample Size",
        "Feature",
        "K-S Statistic",
        "p-value",
        "surprisal",
        "Reject H0",
        "n1",
        "n2",
        "excluded",
        "mu/sigma A",
        "mu/sigma B",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for k in &r.per_feature {
        let ms = |pick: fn(&SummaryPair) -> &DistributionSummary| {
            r.summary(&k.feature)
                .map(|s| {
                    let d = pick(s);
                    format!("{:.3}/{:.3}", d.mu, d.sigma)
                })
                .unwrap_or_else(|| "-".into())
        };
        rows.push(vec![
            (k.n1 + k.n2).to_string(),
            Feature::report_label(&k.feature).to_owned(),
            format!("{:.4}", k.d_stat),
            format_p(k.p_value, k.underflow),
            format!("{:.3}", k.surprisal),
            truth(k.reject).to_owned(),
            k.n1.to_string(),
            k.n2.to_string(),
            format!("{}/{}", k.excluded.0, k.excluded.1),
            ms(|s| &s.a),
            ms(|s| &s.b),
        ]);
    }
    out.push_str(&aligned(&rows));

    if let Some(v) = &r.bonferroni {
        let _ = writeln!(
            out,
            "\n{}: corrected alpha = {:.4e}, adjusted p = {}, Reject H0 = {}{}",
            bonferroni_label(v.k),
            v.corrected_alpha,
            format_p(bonferroni_p(r, v), false),
            truth(v.reject_any),
            if v.rejecting_features.is_empty() {
                String::new()
            } else {
                format!(" ({})", v.rejecting_features.join(", "))
            }
        );
    }
    if let Some(f) = &r.fisher {
        let _ = writeln!(
            out,
            "{}: psi = {:.4}, dof = {}, p = {}, Reject H0 = {}",
            fisher_label(&r.fisher_features),
            f.psi,
            f.dof,
            format_p(f.p_value, f.underflow),
            truth(f.p_value < r.alpha)
        );
    }
    for s in &r.skipped {
        let _ = writeln!(out, "skipped {}: {}", s.feature, s.reason);
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(
        out,
        "\nverdict: {}",
        match r.verdict {
            Verdict::Same => "same",
            Verdict::Changed => "changed",
        }
    );
    out
}

/// Left-aligned columns separated by two spaces.
fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|row| row.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// One single-feature test between two labelled corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub label_a: String,
    pub label_b: String,
    pub result: KsResult,
    pub a: DistributionSummary,
    pub b: DistributionSummary,
}

/// Tests one feature across each labelled pair, e.g. the three pairings of
/// the prompt-injection variants.
pub fn pairwise_tests(pairs: &[((&str, &Corpus), (&str, &Corpus))], feature: &str, alpha: f64) -> Result<Vec<PairwiseRow>> {
    pairs
        .iter()
        .map(|&((la, a), (lb, b))| {
            let result = two_sample_ks(a, b, feature, alpha)?;
            let summary = |c: &Corpus| {
                let (v, _) = c.feature_values(feature);
                DistributionSummary::from_values(feature, &v).expect("tested side has values")
            };
            Ok(PairwiseRow {
                label_a: la.to_owned(),
                label_b: lb.to_owned(),
                a: summary(a),
                b: summary(b),
                result,
            })
        })
        .collect()
}

pub const PAIRWISE_HEADER: [&str; 10] = [
    "Pair",
    "Feature",
    "K-S Statistic",
    "p-value",
    "surprisal",
    "Reject H0",
    "mu_a",
    "sigma_a",
    "mu_b",
    "sigma_b",
];

pub fn render_pairwise(rows: &[PairwiseRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(PAIRWISE_HEADER).expect("in-memory write");
            for r in rows {
                let k = &r.result;
                w.write_record([
                    format!("{}/{}", r.label_a, r.label_b),
                    k.feature.clone(),
                    k.d_stat.to_string(),
                    k.p_value.to_string(),
                    k.surprisal.to_string(),
                    truth(k.reject).to_owned(),
                    r.a.mu.to_string(),
                    r.a.sigma.to_string(),
                    r.b.mu.to_string(),
                    r.b.sigma.to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
        }
        ReportFormat::Text => {
            let mut table: Vec<Vec<String>> = vec![PAIRWISE_HEADER.iter().map(|s| s.to_string()).collect()];
            for r in rows {
                let k = &r.result;
                table.push(vec![
                    format!("{}/{}", r.label_a, r.label_b),
                    k.feature.clone(),
                    format!("{:.4}", k.d_stat),
                    format_p(k.p_value, k.underflow),
                    format!("{:.3}", k.surprisal),
                    truth(k.reject).to_owned(),
                    format!("{:.3}", r.a.mu),
                    format!("{:.3}", r.a.sigma),
                    format!("{:.3}", r.b.mu),
                    format!("{:.3}", r.b.sigma),
                ]);
            }
            aligned(&table)
        }
    }
}
