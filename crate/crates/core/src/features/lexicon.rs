//! Word lists backing the dictionary features.
//!
//! Text formats:
//! - valence: `token<TAB>valence` (extra columns ignored)
//! - boosters: `token<TAB>increment`, or a bare token meaning +0.293
//! - negators: one token per line
//! - categories: `pattern<TAB>category`, a trailing `*` marks a prefix pattern
//!
//! Blank lines and lines starting with `#` are skipped everywhere.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_BOOST: f64 = 0.293;

static VADER_LEXICON: &str = include_str!("../../assets/vader_lexicon.tsv");
static VADER_BOOSTERS: &str = include_str!("../../assets/vader_boosters.tsv");
static VADER_NEGATORS: &str = include_str!("../../assets/vader_negators.txt");
static OPEN_VERBS: &str = include_str!("../../assets/verb_lexicon.tsv");

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_number(line: usize, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Lexicon {
        line,
        message: format!("not a number: {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Lexicon {
            line,
            message: format!("non-finite value {field:?}"),
        });
    }
    Ok(v)
}

fn check_token(line: usize, token: &str) -> Result<String> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(Error::Lexicon {
            line,
            message: format!("token {token:?} is empty or contains whitespace"),
        });
    }
    Ok(token.to_lowercase())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Valence dictionary with booster and negator lists for rule-based
/// sentiment scoring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    pub entries: HashMap<String, f64>,
    pub boosters: HashMap<String, f64>,
    pub negators: HashSet<String>,
}

impl SentimentLexicon {
    /// The bundled VADER word list (MIT licensed, see `assets/VADER-LICENSE.txt`).
    pub fn vader() -> Self {
        Self::parse(VADER_LEXICON, VADER_BOOSTERS, VADER_NEGATORS)
            .expect("bundled sentiment lexicon is well-formed")
    }

    pub fn parse(valence: &str, boosters: &str, negators: &str) -> Result<Self> {
        let mut lex = SentimentLexicon::default();
        for (line, l) in content_lines(valence) {
            let mut fields = l.split('\t');
            let token = check_token(line, fields.next().unwrap_or_default())?;
            let value = fields.next().ok_or_else(|| Error::Lexicon {
                line,
                message: "missing valence column".into(),
            })?;
            lex.entries.insert(token, parse_number(line, value)?);
        }
        for (line, l) in content_lines(boosters) {
            let mut fields = l.split('\t');
            let token = check_token(line, fields.next().unwrap_or_default())?;
            let inc = match fields.next() {
                Some(v) => parse_number(line, v)?,
                None => DEFAULT_BOOST,
            };
            lex.boosters.insert(token, inc);
        }
        for (line, l) in content_lines(negators) {
            lex.negators.insert(check_token(line, l.trim())?);
        }
        Ok(lex)
    }

    pub fn from_files(valence: &Path, boosters: Option<&Path>, negators: Option<&Path>) -> Result<Self> {
        let valence = read(valence)?;
        let boosters = boosters.map(read).transpose()?;
        let negators = negators.map(read).transpose()?;
        Self::parse(
            &valence,
            boosters.as_deref().unwrap_or(VADER_BOOSTERS),
            negators.as_deref().unwrap_or(VADER_NEGATORS),
        )
    }

    /// A copy with every valence sign flipped.
    pub fn negated(&self) -> Self {
        SentimentLexicon {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Pattern {
    Word(String),
    Prefix(String),
}

/// Word and stem patterns grouped into categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryLexicon {
    declared: BTreeSet<String>,
    patterns: Vec<(Pattern, String)>,
}

impl Default for CategoryLexicon {
    fn default() -> Self {
        CategoryLexicon::new(["verb"])
    }
}

impl CategoryLexicon {
    /// An empty lexicon accepting the given category names.
    pub fn new<I, S>(declared: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CategoryLexicon {
            declared: declared.into_iter().map(Into::into).collect(),
            patterns: Vec::new(),
        }
    }

    /// The bundled open verb list (not LIWC's dictionary).
    pub fn open_verbs() -> Self {
        let mut lex = CategoryLexicon::default();
        lex.extend_from_tsv(OPEN_VERBS)
            .expect("bundled verb lexicon is well-formed");
        lex
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut lex = CategoryLexicon::default();
        lex.extend_from_tsv(&read(path)?)?;
        Ok(lex)
    }

    pub fn declared(&self) -> impl Iterator<Item = &str> {
        self.declared.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn add(&mut self, pattern: &str, category: &str) -> Result<()> {
        self.add_at(0, pattern, category)
    }

    fn add_at(&mut self, line: usize, pattern: &str, category: &str) -> Result<()> {
        if !self.declared.contains(category) {
            return Err(Error::UnknownCategory {
                category: category.to_owned(),
                declared: self.declared.iter().cloned().collect(),
            });
        }
        let p = check_token(line, pattern)?;
        let pat = match p.strip_suffix('*') {
            Some("") => {
                return Err(Error::Lexicon {
                    line,
                    message: "bare wildcard pattern".into(),
                })
            }
            Some(stem) => Pattern::Prefix(stem.to_owned()),
            None => Pattern::Word(p),
        };
        self.patterns.push((pat, category.to_owned()));
        Ok(())
    }

    pub fn extend_from_tsv(&mut self, text: &str) -> Result<()> {
        for (line, l) in content_lines(text) {
            let (pattern, category) = l.split_once('\t').ok_or_else(|| Error::Lexicon {
                line,
                message: "expected pattern<TAB>category".into(),
            })?;
            self.add_at(line, pattern.trim(), category.trim())?;
        }
        Ok(())
    }

    /// Errors if `category` was not declared.
    pub fn check_category(&self, category: &str) -> Result<()> {
        if self.declared.contains(category) {
            Ok(())
        } else {
            Err(Error::UnknownCategory {
                category: category.to_owned(),
                declared: self.declared.iter().cloned().collect(),
            })
        }
    }

    /// Whether a case-folded token matches any pattern of `category`.
    pub fn matches(&self, folded_token: &str, category: &str) -> bool {
        self.patterns.iter().any(|(p, c)| {
            c == category
                && match p {
                    Pattern::Word(w) => w == folded_token,
                    Pattern::Prefix(s) => folded_token.starts_with(s.as_str()),
                }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicons_load() {
        let s = SentimentLexicon::vader();
        assert_eq!(s.entries.get("good"), Some(&1.9));
        assert!(s.negators.contains("not"));
        assert_eq!(s.boosters.get("barely"), Some(&-0.293));
        assert!(s.entries.keys().all(|k| !k.contains(char::is_whitespace)));
        let v = CategoryLexicon::open_verbs();
        assert!(v.matches("running", "verb"));
        assert!(v.matches("believed", "verb"));
        assert!(!v.matches("table", "verb"));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            SentimentLexicon::parse("good\tx", "", ""),
            Err(Error::Lexicon { line: 1, .. })
        ));
        assert!(SentimentLexicon::parse("good", "", "").is_err());
        assert!(SentimentLexicon::parse("# c\n\ngood\t1.9\n", "very", "not").is_ok());
        let mut c = CategoryLexicon::default();
        assert!(matches!(
            c.extend_from_tsv("run*\tnoun"),
            Err(Error::UnknownCategory { .. })
        ));
        assert!(c.extend_from_tsv("*\tverb").is_err());
    }

    #[test]
    fn bare_booster_gets_default_increment() {
        let s = SentimentLexicon::parse("", "very\nbarely\t-0.293", "").unwrap();
        assert_eq!(s.boosters["very"], 0.293);
        assert_eq!(s.boosters["barely"], -0.293);
    }
}
