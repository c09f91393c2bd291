//! Locally computable text features and corpus annotation.
//!
//! Perplexity and the LIWC summary variables (Analytic, Clout, Authentic,
//! Tone) are not computed here; they arrive through
//! [`crate::corpus::merge_external_annotations`] and are then treated like
//! any other annotation.

mod diversity;
mod lexicon;
mod sentiment;
mod surface;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use diversity::{maas_index, mtld, MTLD_MIN_WORDS, MTLD_THRESHOLD};
pub use lexicon::{CategoryLexicon, SentimentLexicon};
pub use sentiment::sentiment_compound;
pub use surface::{count_syllables, flesch_reading_ease, sixltr_proportion, word_count};
pub use tokenize::{tokenize, TokenStream};

/// Percentage of words matching `category` in the lexicon. Tokens are
/// case-folded before matching.
pub fn category_rate(ts: &TokenStream, lex: &CategoryLexicon, category: &str) -> Result<Option<f64>> {
    lex.check_category(category)?;
    if ts.words.is_empty() {
        return Ok(None);
    }
    let hits = ts
        .words
        .iter()
        .filter(|w| lex.matches(&w.to_lowercase(), category))
        .count();
    Ok(Some(100.0 * hits as f64 / ts.words.len() as f64))
}

/// A feature this crate extracts from raw text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    #[serde(rename = "WC")]
    WordCount,
    #[serde(rename = "Sixltr")]
    Sixltr,
    #[serde(rename = "verb")]
    Verb,
    #[serde(rename = "mtld")]
    Mtld,
    #[serde(rename = "maas")]
    Maas,
    #[serde(rename = "compound")]
    Compound,
    #[serde(rename = "flesch")]
    Flesch,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::WordCount,
        Feature::Sixltr,
        Feature::Verb,
        Feature::Mtld,
        Feature::Maas,
        Feature::Compound,
        Feature::Flesch,
    ];

    /// Annotation key.
    pub fn name(self) -> &'static str {
        match self {
            Feature::WordCount => "WC",
            Feature::Sixltr => "Sixltr",
            Feature::Verb => "verb",
            Feature::Mtld => "mtld",
            Feature::Maas => "maas",
            Feature::Compound => "compound",
            Feature::Flesch => "flesch",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Feature::ALL.iter().map(|f| f.name()).collect()
    }

    /// Column label for reports. The verb rate comes from an open word list,
    /// so it is labelled to avoid implying LIWC equivalence.
    pub fn report_label(name: &str) -> &str {
        if name == Feature::Verb.name() {
            "verb(open-lexicon)"
        } else {
            name
        }
    }

    pub fn compute(self, text: &str, ts: &TokenStream, lex: &Lexicons) -> Option<f64> {
        match self {
            Feature::WordCount => Some(word_count(ts)),
            Feature::Sixltr => sixltr_proportion(ts),
            Feature::Verb => category_rate(ts, &lex.category, "verb").ok().flatten(),
            Feature::Mtld => mtld(ts, MTLD_THRESHOLD),
            Feature::Maas => maas_index(ts),
            Feature::Compound => Some(sentiment_compound(text, &lex.sentiment)),
            Feature::Flesch => flesch_reading_ease(ts),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFeature {
                name: s.to_owned(),
                known: Feature::names().into_iter().map(String::from).collect(),
            })
    }
}

/// Dictionaries used by the dictionary-based features.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub sentiment: SentimentLexicon,
    pub category: CategoryLexicon,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            sentiment: SentimentLexicon::vader(),
            category: CategoryLexicon::open_verbs(),
        }
    }
}

/// Annotates every item with the requested features.
///
/// Names of built-in extractors are computed from the text; any other name
/// must already be present as an annotation on some item (external values
/// such as perplexity) and is left untouched. Items where a feature is
/// undefined get an explicit undefined marker instead of a value. Output is
/// deterministic and in input order.
pub fn annotate_corpus(corpus: &Corpus, feature_set: &[String], lex: &Lexicons) -> Result<Corpus> {
    let present = corpus.annotation_keys();
    let mut computed = Vec::new();
    for name in feature_set {
        match name.parse::<Feature>() {
            Ok(f) => {
                if !computed.contains(&f) {
                    computed.push(f);
                }
            }
            Err(_) if present.contains(name) => {}
            Err(_) => {
                let mut known: Vec<String> = Feature::names().into_iter().map(String::from).collect();
                known.extend(present.iter().filter(|k| !known.contains(k)).cloned().collect::<Vec<_>>());
                return Err(Error::UnknownFeature {
                    name: name.clone(),
                    known,
                });
            }
        }
    }

    let items = corpus
        .items
        .par_iter()
        .map(|item| {
            let mut item = item.clone();
            let ts = tokenize(&item.text);
            for f in &computed {
                let value = f.compute(&item.text, &ts, lex);
                item.set_feature(f.name(), value);
            }
            item
        })
        .collect();
    Ok(Corpus {
        items,
        meta: corpus.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TextItem;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn category_rate_prefix_rule() {
        let mut lex = CategoryLexicon::default();
        lex.add("run*", "verb").unwrap();
        let v = category_rate(&tokenize("running runs rust"), &lex, "verb").unwrap().unwrap();
        assert!((v - 200.0 / 3.0).abs() < 1e-9);
        let empty = CategoryLexicon::default();
        assert_eq!(category_rate(&tokenize("anything here"), &empty, "verb").unwrap(), Some(0.0));
        assert_eq!(category_rate(&tokenize("no match"), &lex, "verb").unwrap(), Some(0.0));
        assert!(matches!(
            category_rate(&tokenize("x"), &lex, "noun"),
            Err(Error::UnknownCategory { .. })
        ));
    }

    #[test]
    fn feature_names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
        }
        assert!("bogus".parse::<Feature>().is_err());
        assert_eq!(Feature::report_label("verb"), "verb(open-lexicon)");
    }

    fn corpus() -> Corpus {
        Corpus::new(vec![
            TextItem::new("a", "The cat sat on the mat. It was good."),
            TextItem::new("b", "Extraordinary circumstances demanded extraordinary measures!"),
            TextItem::new("c", "one two"),
        ])
    }

    #[test]
    fn annotate_adds_requested_keys() {
        let lex = Lexicons::default();
        let out = annotate_corpus(&corpus(), &names(&["WC", "Sixltr"]), &lex).unwrap();
        for it in &out.items {
            assert!(it.feature("WC").is_some());
            assert!(it.feature("Sixltr").is_some());
        }
        assert_eq!(out.items[0].feature("WC"), Some(9.0));
    }

    #[test]
    fn empty_text_is_marked_undefined() {
        let lex = Lexicons::default();
        let c = Corpus::new(vec![TextItem::new("e", "")]);
        let out = annotate_corpus(&c, &names(&["Sixltr", "WC"]), &lex).unwrap();
        assert!(out.items[0].undefined.contains("Sixltr"));
        assert_eq!(out.items[0].feature("WC"), Some(0.0));
    }

    #[test]
    fn annotate_is_idempotent_and_deterministic() {
        let lex = Lexicons::default();
        let all: Vec<String> = Feature::names().into_iter().map(String::from).collect();
        let once = annotate_corpus(&corpus(), &all, &lex).unwrap();
        let twice = annotate_corpus(&once, &all, &lex).unwrap();
        assert_eq!(once, twice);
        let again = annotate_corpus(&corpus(), &all, &lex).unwrap();
        assert_eq!(
            serde_json::to_string(&once).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn unknown_feature_lists_known() {
        let lex = Lexicons::default();
        match annotate_corpus(&corpus(), &names(&["bogus"]), &lex) {
            Err(Error::UnknownFeature { name, known }) => {
                assert_eq!(name, "bogus");
                assert!(known.contains(&"mtld".to_string()));
            }
            other => panic!("expected unknown feature, got {other:?}"),
        }
    }

    #[test]
    fn external_features_pass_through() {
        let lex = Lexicons::default();
        let mut c = corpus();
        c.items[0].set_feature("ppl", Some(7.5));
        let out = annotate_corpus(&c, &names(&["ppl", "WC"]), &lex).unwrap();
        assert_eq!(out.items[0].feature("ppl"), Some(7.5));
        assert_eq!(out.items[1].feature("ppl"), None);
    }
}
