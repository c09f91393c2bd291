//! VADER-style compound sentiment.
//!
//! Rules, applied per token found in the valence dictionary:
//! - emphasis: an all-caps token in mixed-case text adds ±0.733;
//! - boosters up to three tokens back add their increment (sign follows the
//!   valence), damped by 1.0, 0.95 and 0.9 with distance;
//! - each negator up to three tokens back multiplies by −0.74;
//! - the first lone "but" halves earlier token scores and scales later ones
//!   by 1.5.
//!
//! The summed score gains min(#'!', 3)·0.292 in its own direction and is
//! normalized with s/√(s² + 15).

use super::lexicon::SentimentLexicon;

const CAPS_INCREMENT: f64 = 0.733;
const NEGATION_SCALAR: f64 = -0.74;
const BOOSTER_DAMPING: [f64; 3] = [1.0, 0.95, 0.9];
const BEFORE_BUT: f64 = 0.5;
const AFTER_BUT: f64 = 1.5;
const EXCLAMATION_STEP: f64 = 0.292;
const EXCLAMATION_CAP: usize = 3;
const NORMALIZATION_ALPHA: f64 = 15.0;

/// Whitespace tokens with surrounding ASCII punctuation removed, unless the
/// stripped form would be two characters or fewer (emoticons like ":)" and
/// short words with attached punctuation stay as written).
fn sentiment_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|tok| {
            let stripped = tok.trim_matches(|c: char| c.is_ascii_punctuation());
            if stripped.chars().count() <= 2 {
                tok
            } else {
                stripped
            }
        })
        .collect()
}

/// At least one cased character and no lowercase ones.
fn is_all_caps(token: &str) -> bool {
    token.chars().any(char::is_uppercase) && !token.chars().any(char::is_lowercase)
}

fn is_negator(lex: &SentimentLexicon, folded: &str) -> bool {
    lex.negators.contains(folded) || folded.contains("n't")
}

/// Compound score in [−1, 1]; 0 for text without dictionary hits.
pub fn sentiment_compound(text: &str, lex: &SentimentLexicon) -> f64 {
    let tokens = sentiment_tokens(text);
    let folded: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let caps = tokens.iter().filter(|t| is_all_caps(t)).count();
    let cap_differential = caps > 0 && caps < tokens.len();

    let mut scores = Vec::with_capacity(tokens.len());
    for (i, word) in folded.iter().enumerate() {
        let kind_of = word == "kind" && folded.get(i + 1).is_some_and(|n| n == "of");
        let base = match lex.entries.get(word) {
            Some(&v) if !lex.boosters.contains_key(word) && !kind_of => v,
            _ => {
                scores.push(0.0);
                continue;
            }
        };

        let mut valence = base;
        if cap_differential && is_all_caps(tokens[i]) {
            valence += if valence > 0.0 { CAPS_INCREMENT } else { -CAPS_INCREMENT };
        }
        for (dist, damping) in BOOSTER_DAMPING.iter().enumerate() {
            if i <= dist {
                break;
            }
            let j = i - dist - 1;
            let prev = &folded[j];
            if lex.entries.contains_key(prev) {
                continue;
            }
            if let Some(&inc) = lex.boosters.get(prev) {
                let mut scalar = if valence < 0.0 { -inc } else { inc };
                if cap_differential && is_all_caps(tokens[j]) {
                    scalar += if valence > 0.0 { CAPS_INCREMENT } else { -CAPS_INCREMENT };
                }
                valence += scalar * damping;
            }
            if is_negator(lex, prev) {
                valence *= NEGATION_SCALAR;
            }
        }
        scores.push(valence);
    }

    if let Some(b) = folded.iter().position(|w| w == "but") {
        for (i, s) in scores.iter_mut().enumerate() {
            if i < b {
                *s *= BEFORE_BUT;
            } else if i > b {
                *s *= AFTER_BUT;
            }
        }
    }

    let mut sum: f64 = scores.iter().sum();
    let bangs = text.chars().filter(|&c| c == '!').count().min(EXCLAMATION_CAP);
    let amp = bangs as f64 * EXCLAMATION_STEP;
    if sum > 0.0 {
        sum += amp;
    } else if sum < 0.0 {
        sum -= amp;
    }
    (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
}
