//! Counting features: word count, long-word proportion and Flesch reading
//! ease. Functions returning `Option` yield `None` when the feature is
//! undefined for the text.

use super::tokenize::TokenStream;

pub fn word_count(ts: &TokenStream) -> f64 {
    ts.word_count() as f64
}

/// Percentage of words with more than six letters. Digits and punctuation
/// inside a word do not count as letters.
pub fn sixltr_proportion(ts: &TokenStream) -> Option<f64> {
    if ts.words.is_empty() {
        return None;
    }
    let long = ts
        .words
        .iter()
        .filter(|w| w.chars().filter(|c| c.is_alphabetic()).count() > 6)
        .count();
    Some(100.0 * long as f64 / ts.words.len() as f64)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Heuristic syllable count: the number of vowel groups, less one for a
/// silent final `e`, never below one.
///
/// A final `e` counts as silent when it forms a vowel group by itself and the
/// word does not end in consonant + "le" ("table" keeps both syllables). This
/// approximates, but does not reproduce, dictionary-backed counters.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphabetic())
        .collect();
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    if n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

/// 206.835 − 1.015·(words/sentence) − 84.6·(syllables/word).
pub fn flesch_reading_ease(ts: &TokenStream) -> Option<f64> {
    let words = ts.word_count();
    let sentences = ts.sentence_count();
    if words == 0 || sentences == 0 {
        return None;
    }
    let syllables: usize = ts.words.iter().map(|w| count_syllables(w)).sum();
    let w = words as f64;
    Some(206.835 - 1.015 * (w / sentences as f64) - 84.6 * (syllables as f64 / w))
}
