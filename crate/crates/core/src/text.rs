//! Tokenizers shared by the language model, the TF-IDF featurizer and the
//! frequent-terms analytics.

/// Splits text into lowercase word tokens and single-character punctuation
/// tokens.
///
/// Word characters are alphanumerics and the apostrophe; every other
/// non-whitespace character becomes its own token. This is the tokenization
/// used by the n-gram language model.
pub fn lm_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    lm_tokens_into(text, &mut out);
    out
}

pub fn lm_tokens_into(text: &str, out: &mut Vec<String>) {
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_lowercase().collect());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
}

/// Iterates over lowercase word tokens: maximal runs of alphanumeric or `_`
/// characters. Punctuation is dropped.
pub fn word_tokens(text: &str) -> WordTokens<'_> {
    WordTokens { rest: text }
}

pub struct WordTokens<'a> {
    rest: &'a str,
}

impl Iterator for WordTokens<'_> {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        let is_word = |c: char| c.is_alphanumeric() || c == '_';
        let start = self.rest.find(is_word)?;
        let tail = &self.rest[start..];
        let end = tail.find(|c: char| !is_word(c)).unwrap_or(tail.len());
        let token = &tail[..end];
        self.rest = &tail[end..];
        if token.chars().all(|c| !c.is_uppercase()) {
            Some(token.to_owned())
        } else {
            Some(token.to_lowercase())
        }
    }
}

/// Joins language-model tokens back into text, one space between tokens.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::with_capacity(tokens.iter().map(|t| t.as_ref().len() + 1).sum());
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_tokens_split_punctuation() {
        assert_eq!(
            lm_tokens("Hello, World! Don't stop."),
            vec!["hello", ",", "world", "!", "don't", "stop", "."]
        );
        assert!(lm_tokens("   \n\t").is_empty());
    }

    #[test]
    fn detokenize_round_trips_lm_tokens() {
        let toks = lm_tokens("The quick (brown) fox; isn't it?");
        assert_eq!(lm_tokens(&detokenize(&toks)), toks);
    }

    #[test]
    fn word_tokens_lowercase_and_drop_punct() {
        let toks: Vec<_> = word_tokens("Buy VIAGRA now!!! a-b c_d 42").collect();
        assert_eq!(toks, vec!["buy", "viagra", "now", "a", "b", "c_d", "42"]);
    }
}
