use std::ops::Range;

/// Words of a text plus the sentence segmentation over them.
///
/// `sentences` holds contiguous, ordered word-index ranges covering every
/// word exactly once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub words: Vec<String>,
    pub sentences: Vec<Range<usize>>,
}

impl TokenStream {
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// Case-folded copies of the words, for type counting.
    pub fn folded(&self) -> Vec<String> {
        self.words.iter().map(|w| w.to_lowercase()).collect()
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits text into words and sentences.
///
/// A word is a maximal run of letters, digits and apostrophes, where a hyphen
/// between two alphanumerics joins its neighbours ("well-known"). Apostrophes
/// at either end of a run are trimmed. A sentence ends at `.`, `!` or `?`
/// followed by whitespace or the end of the text; trailing words without a
/// terminator form a final sentence.
pub fn tokenize(text: &str) -> TokenStream {
    let chars: Vec<char> = text.chars().collect();
    let mut ts = TokenStream::default();
    let mut current = String::new();
    let mut sentence_start = 0usize;

    let flush = |current: &mut String, words: &mut Vec<String>| {
        let trimmed = current.trim_matches(is_apostrophe);
        if !trimmed.is_empty() {
            words.push(trimmed.to_owned());
        }
        current.clear();
    };

    for (i, &c) in chars.iter().enumerate() {
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        let joins = c == '-'
            && prev.is_some_and(char::is_alphanumeric)
            && next.is_some_and(char::is_alphanumeric);
        if c.is_alphanumeric() || is_apostrophe(c) || joins {
            current.push(c);
            continue;
        }
        flush(&mut current, &mut ts.words);
        if is_terminator(c) && next.is_none_or(char::is_whitespace) && ts.words.len() > sentence_start {
            ts.sentences.push(sentence_start..ts.words.len());
            sentence_start = ts.words.len();
        }
    }
    flush(&mut current, &mut ts.words);
    if ts.words.len() > sentence_start {
        ts.sentences.push(sentence_start..ts.words.len());
    }
    ts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text() {
        let ts = tokenize("");
        assert_eq!((ts.word_count(), ts.sentence_count()), (0, 0));
        let ts = tokenize("  ...  !? ");
        assert_eq!((ts.word_count(), ts.sentence_count()), (0, 0));
    }

    #[test]
    fn simple_sentence() {
        let ts = tokenize("The cat sat.");
        assert_eq!(ts.words, ["The", "cat", "sat"]);
        assert_eq!(ts.sentences, vec![0..3]);
    }

    #[test]
    fn two_sentences() {
        let ts = tokenize("Hi! Go now.");
        assert_eq!(ts.word_count(), 3);
        assert_eq!(ts.sentences, vec![0..1, 1..3]);
    }

    #[test]
    fn no_terminator_is_one_sentence() {
        let ts = tokenize("just some words");
        assert_eq!(ts.sentences, vec![0..3]);
    }

    #[test]
    fn apostrophes_and_hyphens() {
        let ts = tokenize("Don't 'quote' a well-known -dash- co--op state-of-the-art.");
        assert_eq!(
            ts.words,
            ["Don't", "quote", "a", "well-known", "dash", "co", "op", "state-of-the-art"]
        );
    }

    #[test]
    fn decimal_point_is_not_a_boundary() {
        let ts = tokenize("It cost 3.5 dollars. Wow!!");
        assert_eq!(ts.words, ["It", "cost", "3", "5", "dollars", "Wow"]);
        assert_eq!(ts.sentences, vec![0..5, 5..6]);
    }
}
