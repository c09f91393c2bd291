//! Generated-text corpora: the item model, JSON Lines persistence, external
//! annotation merging, and the descriptive summaries used in reports.
//!
//! A corpus file holds one JSON object per line. Corpus-level metadata (the
//! endpoint, model, request parameters and run ids) lives next to it in a
//! `<file>.meta.json` sidecar so that items can be appended one line at a time
//! while sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Review,
    News,
    Tweet,
    Chat,
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptKind::Review => "review",
            PromptKind::News => "news",
            PromptKind::Tweet => "tweet",
            PromptKind::Chat => "chat",
        })
    }
}

/// One generated text plus its provenance and feature annotations.
///
/// A feature is either a finite value in `annotations` or listed in
/// `undefined` when the extractor could not compute it for this text (for
/// example MTLD on a very short text). Items without a value for a feature
/// are excluded from tests on that feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextItem {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_kind: Option<PromptKind>,
    #[serde(default)]
    pub topic: String,
    #[serde(default)]
    pub source_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub annotations: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub undefined: BTreeSet<String>,
    /// Fields this crate does not interpret, carried through save/load.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, Value>,
}

impl TextItem {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        TextItem {
            id: id.into(),
            text: text.into(),
            prompt_kind: None,
            topic: String::new(),
            source_label: String::new(),
            created_at: None,
            annotations: BTreeMap::new(),
            undefined: BTreeSet::new(),
            extra: serde_json::Map::new(),
        }
    }

    /// Records a feature value. `None` and non-finite values mark the
    /// feature undefined for this item.
    pub fn set_feature(&mut self, name: &str, value: Option<f64>) {
        match value.filter(|v| v.is_finite()) {
            Some(v) => {
                self.undefined.remove(name);
                self.annotations.insert(name.to_owned(), v);
            }
            None => {
                self.annotations.remove(name);
                self.undefined.insert(name.to_owned());
            }
        }
    }

    pub fn feature(&self, name: &str) -> Option<f64> {
        self.annotations.get(name).copied()
    }

    /// True when the item carries either a value or an undefined marker.
    pub fn has_feature_entry(&self, name: &str) -> bool {
        self.annotations.contains_key(name) || self.undefined.contains(name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub items: Vec<TextItem>,
    pub meta: BTreeMap<String, Value>,
}

impl Corpus {
    pub fn new(items: Vec<TextItem>) -> Self {
        Corpus {
            items,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Values of `feature` over the items that carry it, in item order,
    /// together with the number of items excluded for lacking it.
    pub fn feature_values(&self, feature: &str) -> (Vec<f64>, usize) {
        let values: Vec<f64> = self.items.iter().filter_map(|it| it.feature(feature)).collect();
        let excluded = self.items.len() - values.len();
        (values, excluded)
    }

    /// All annotation keys present on at least one item.
    pub fn annotation_keys(&self) -> BTreeSet<String> {
        self.items
            .iter()
            .flat_map(|it| it.annotations.keys().chain(it.undefined.iter()).cloned())
            .collect()
    }

    /// Keys that appear (as a value or undefined marker) on some items but
    /// not on all of them.
    pub fn partial_annotation_keys(&self) -> Vec<String> {
        self.annotation_keys()
            .into_iter()
            .filter(|k| !self.items.iter().all(|it| it.has_feature_entry(k)))
            .collect()
    }

    /// A short name for error messages: the `name` meta entry if present.
    pub fn display_name(&self) -> String {
        match self.meta.get("name") {
            Some(Value::String(s)) => s.clone(),
            _ => format!("<{} items>", self.items.len()),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.meta.insert("name".into(), Value::String(name.into()));
        self
    }
}

pub fn meta_sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Reads a JSON Lines corpus. Blank lines are skipped; line numbers in errors
/// are 1-based and count blank lines.
pub fn load_corpus(path: impl AsRef<Path>, allow_empty_text: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut items = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: TextItem = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_owned(),
            line: lineno,
            message: e.to_string(),
        })?;
        if let Some(&first) = seen.get(&item.id) {
            return Err(Error::DuplicateId {
                path: path.to_owned(),
                id: item.id,
                first,
                second: lineno,
            });
        }
        if item.text.is_empty() && !allow_empty_text {
            return Err(Error::EmptyText {
                path: path.to_owned(),
                line: lineno,
                id: item.id,
            });
        }
        seen.insert(item.id.clone(), lineno);
        items.push(item);
    }

    let meta_path = meta_sidecar_path(path);
    let meta = if meta_path.exists() {
        let raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::MalformedLine {
            path: meta_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        BTreeMap::new()
    };

    Ok(Corpus { items, meta })
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in &corpus.items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let meta_path = meta_sidecar_path(path);
    if corpus.meta.is_empty() {
        if meta_path.exists() {
            fs::remove_file(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        }
    } else {
        let raw = serde_json::to_string_pretty(&corpus.meta)?;
        fs::write(&meta_path, raw).map_err(|e| Error::io(&meta_path, e))?;
    }
    Ok(())
}

/// Outcome counts of [`merge_external_annotations`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub columns: Vec<String>,
    /// CSV rows whose key matched an item.
    pub matched_rows: usize,
    /// CSV rows whose key matched no item.
    pub unmatched_rows: usize,
    /// Corpus items that no CSV row matched.
    pub missing_items: usize,
}

/// Attaches precomputed per-item values (perplexity, LIWC summary variables,
/// ...) from a CSV table keyed by item id. Every non-key column is numeric;
/// empty cells leave the item without that feature.
pub fn merge_external_annotations(
    corpus: &Corpus,
    table: impl AsRef<Path>,
    key_column: &str,
) -> Result<(Corpus, MergeReport)> {
    let path = table.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_owned(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let key_idx = headers
        .iter()
        .position(|h| h == key_column)
        .ok_or_else(|| Error::Csv {
            path: path.to_owned(),
            message: format!("key column {key_column:?} not found in header"),
        })?;
    let columns: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != key_idx)
        .map(|(i, h)| (i, h.to_owned()))
        .collect();

    let index: HashMap<&str, usize> = corpus
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.id.as_str(), i))
        .collect();

    let mut out = corpus.clone();
    let mut report = MergeReport {
        columns: columns.iter().map(|(_, c)| c.clone()).collect(),
        ..Default::default()
    };
    let mut touched = vec![false; corpus.items.len()];

    for (row_idx, record) in reader.records().enumerate() {
        // header is row 1
        let row = row_idx + 2;
        let record = record.map_err(csv_err)?;
        let key = record.get(key_idx).unwrap_or_default();

        let mut values = Vec::with_capacity(columns.len());
        for (col_idx, col) in &columns {
            let cell = record.get(*col_idx).unwrap_or_default();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                path: path.to_owned(),
                row,
                column: col.clone(),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    path: path.to_owned(),
                    row,
                    column: col.clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push((col, v));
        }

        match index.get(key) {
            Some(&i) => {
                report.matched_rows += 1;
                touched[i] = true;
                for (col, v) in values {
                    out.items[i].set_feature(col, Some(v));
                }
            }
            None => report.unmatched_rows += 1,
        }
    }
    report.missing_items = touched.iter().filter(|t| !**t).count();
    Ok((out, report))
}

/// Splits a corpus into two seeded random halves. Sizes differ by at most one
/// (the first half gets the extra item) and each half keeps the original
/// relative item order.
pub fn split_halves(corpus: &Corpus, seed: u64) -> Result<(Corpus, Corpus)> {
    let n = corpus.items.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "split_halves needs at least 2 items, corpus has {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let first_len = n.div_ceil(2);
    let (first, second) = order.split_at_mut(first_len);
    first.sort_unstable();
    second.sort_unstable();

    let build = |idx: &[usize], half: &str| {
        let mut meta = corpus.meta.clone();
        meta.insert(
            "split".into(),
            serde_json::json!({ "seed": seed, "half": half }),
        );
        Corpus {
            items: idx.iter().map(|&i| corpus.items[i].clone()).collect(),
            meta,
        }
    };
    Ok((build(first, "first"), build(second, "second")))
}

/// Descriptive statistics of one feature over the items that carry it.
/// `sigma` is the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub feature: String,
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub min: f64,
    pub max: f64,
}

impl DistributionSummary {
    pub fn from_values(feature: &str, values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(DistributionSummary {
            feature: feature.to_owned(),
            n: values.len(),
            // rounding can push the mean a hair outside [min, max]
            mu: mu.clamp(min, max),
            sigma: var.sqrt(),
            min,
            max,
        })
    }
}

pub fn summarize_feature(corpus: &Corpus, feature: &str) -> Result<DistributionSummary> {
    let (values, _) = corpus.feature_values(feature);
    DistributionSummary::from_values(feature, &values).ok_or_else(|| Error::FeatureAbsent {
        feature: feature.to_owned(),
    })
}
