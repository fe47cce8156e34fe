//! Greedy longest-match subword tokenization.

use crate::error::{Error, Result};
use crate::vocab::{Vocab, CONTINUATION, RESERVED, UNK};

/// Lowercase, split on whitespace, then segment each word by repeatedly
/// taking the longest vocabulary prefix (continuation pieces carry the
/// `##` prefix). A word with no usable segmentation becomes `[UNK]`.
/// Reserved tokens written literally in the text pass through unchanged.
pub fn wordpiece_tokenize(text: &str, vocab: &Vocab) -> Result<Vec<String>> {
    let normalized = text.to_lowercase();
    let words: Vec<&str> = normalized.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut out = Vec::with_capacity(words.len());
    for word in words {
        if RESERVED.contains(&word.to_uppercase().as_str()) {
            out.push(word.to_uppercase());
            continue;
        }
        tokenize_word(word, vocab, &mut out);
    }
    Ok(out)
}

fn tokenize_word(word: &str, vocab: &Vocab, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            let slice: String = chars[start..end].iter().collect();
            let candidate = if start == 0 {
                slice
            } else {
                format!("{CONTINUATION}{slice}")
            };
            if vocab.id(&candidate).is_some() {
                found = Some(candidate);
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => {
                pieces.push(piece);
                start = end;
            }
            None => {
                // no segmentation for this word
                out.push(UNK.to_string());
                return;
            }
        }
    }
    out.append(&mut pieces);
}

/// Inverse of tokenization for fully covered text: join pieces, stripping
/// the continuation prefix.
pub fn detokenize(pieces: &[String]) -> String {
    let mut s = String::new();
    for p in pieces {
        if let Some(rest) = p.strip_prefix(CONTINUATION) {
            s.push_str(rest);
        } else {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(p);
        }
    }
    s
}

/// Token ids for a text, `[UNK]` for uncovered words.
pub fn tokenize_to_ids(text: &str, vocab: &Vocab) -> Result<Vec<u32>> {
    let pieces = wordpiece_tokenize(text, vocab)?;
    Ok(pieces
        .iter()
        .map(|p| vocab.id(p).expect("tokenizer emits vocabulary pieces"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(extra: &[&str]) -> Vocab {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(extra.iter().map(|s| s.to_string()));
        Vocab::new(tokens).unwrap()
    }

    #[test]
    fn whole_word_hit() {
        let v = vocab(&["sony"]);
        assert_eq!(wordpiece_tokenize("sony", &v).unwrap(), ["sony"]);
    }

    #[test]
    fn greedy_longest_match_trace() {
        let v = vocab(&["sony", "a", "##55"]);
        assert_eq!(
            wordpiece_tokenize("sony a55", &v).unwrap(),
            ["sony", "a", "##55"]
        );
    }

    #[test]
    fn prefers_longer_pieces() {
        let v = vocab(&["ab", "a", "##b", "##bc", "##c"]);
        assert_eq!(wordpiece_tokenize("abbc", &v).unwrap(), ["ab", "##bc"]);
    }

    #[test]
    fn unknown_word_becomes_unk() {
        let v = vocab(&["sony"]);
        assert_eq!(wordpiece_tokenize("zzzqqq", &v).unwrap(), ["[UNK]"]);
    }

    #[test]
    fn partial_coverage_still_unks_whole_word() {
        // "ax" starts with a known piece but cannot be completed
        let v = vocab(&["a"]);
        assert_eq!(wordpiece_tokenize("ax", &v).unwrap(), ["[UNK]"]);
    }

    #[test]
    fn empty_after_normalization_is_an_error() {
        let v = vocab(&[]);
        assert!(matches!(
            wordpiece_tokenize("   \t ", &v),
            Err(Error::EmptyText)
        ));
    }

    #[test]
    fn lowercases_input() {
        let v = vocab(&["sony"]);
        assert_eq!(wordpiece_tokenize("SoNy", &v).unwrap(), ["sony"]);
    }

    #[test]
    fn mask_token_passes_through() {
        let v = vocab(&["camera"]);
        assert_eq!(
            wordpiece_tokenize("[MASK] camera", &v).unwrap(),
            ["[MASK]", "camera"]
        );
    }

    #[test]
    fn round_trip_for_covered_text() {
        let v = vocab(&["sony", "a", "##55", "camera"]);
        let text = "sony a55 camera";
        let pieces = wordpiece_tokenize(text, &v).unwrap();
        assert_eq!(detokenize(&pieces), text);
    }
}
