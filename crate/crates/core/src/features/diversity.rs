//! Lexical diversity: MTLD and the Maas index. Types are compared after
//! simple Unicode lowercasing.

use std::collections::HashSet;

use super::tokenize::TokenStream;

pub const MTLD_THRESHOLD: f64 = 0.72;
pub const MTLD_MIN_WORDS: usize = 10;

/// Factor count of one MTLD pass: a factor closes whenever the running
/// type-token ratio falls below `threshold`; the leftover segment contributes
/// the partial factor (1 − TTR)/(1 − threshold).
fn mtld_factors<'a>(tokens: impl Iterator<Item = &'a str>, threshold: f64) -> f64 {
    let mut types: HashSet<&str> = HashSet::new();
    let mut count = 0usize;
    let mut ttr = 1.0;
    let mut factors = 0.0;
    for t in tokens {
        count += 1;
        types.insert(t);
        ttr = types.len() as f64 / count as f64;
        if ttr < threshold {
            factors += 1.0;
            types.clear();
            count = 0;
            ttr = 1.0;
        }
    }
    if count > 0 {
        factors += (1.0 - ttr) / (1.0 - threshold);
    }
    factors
}

/// Bidirectional MTLD: the mean of the forward and backward passes, each
/// being word count divided by factor count.
///
/// `None` below [`MTLD_MIN_WORDS`] words or when no factor accrues (every
/// token distinct).
pub fn mtld(ts: &TokenStream, threshold: f64) -> Option<f64> {
    let n = ts.word_count();
    if n < MTLD_MIN_WORDS {
        return None;
    }
    let folded = ts.folded();
    let forward = mtld_factors(folded.iter().map(String::as_str), threshold);
    let backward = mtld_factors(folded.iter().rev().map(String::as_str), threshold);
    if forward == 0.0 || backward == 0.0 {
        return None;
    }
    let n = n as f64;
    Some((n / forward + n / backward) / 2.0)
}

/// Maas a² = (ln N − ln V)/(ln N)² for N tokens and V types.
pub fn maas_index(ts: &TokenStream) -> Option<f64> {
    let n = ts.word_count();
    if n < 2 {
        return None;
    }
    let v = ts.folded().into_iter().collect::<HashSet<_>>().len();
    let ln_n = (n as f64).ln();
    Some((ln_n - (v as f64).ln()) / (ln_n * ln_n))
}
