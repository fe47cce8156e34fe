//! Query/title input assembly.
//!
//! The classifier input is `[CLS] query.. [SEP] title.. [SEP]` with segment
//! id 0 up to and including the first `[SEP]` and 1 afterwards. While the
//! assembled length exceeds [`MAX_INPUT_LEN`], the currently longer side
//! loses its last token; a tie prunes the title.

use crate::error::{Error, Result};
use crate::vocab::Vocab;
use crate::wordpiece::tokenize_to_ids;

/// Hard cap on assembled inputs, special tokens included.
pub const MAX_INPUT_LEN: usize = 23;

/// An assembled token-id sequence with segment ids. `true_len` is the
/// length before any padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    pub true_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Copy with `n` padding tokens appended (segment id 0). The forward
    /// pass must produce identical logits with or without them.
    pub fn padded(&self, n: usize, pad_id: u32) -> Self {
        let mut ids = self.ids.clone();
        let mut segments = self.segments.clone();
        ids.extend(std::iter::repeat(pad_id).take(n));
        segments.extend(std::iter::repeat(0).take(n));
        Self {
            ids,
            segments,
            true_len: self.true_len,
        }
    }
}

/// Assemble pre-tokenized query and title ids into a [`TokenSequence`].
pub fn assemble_ids(query_ids: &[u32], title_ids: &[u32], vocab: &Vocab) -> Result<TokenSequence> {
    if query_ids.is_empty() || title_ids.is_empty() {
        return Err(Error::DegenerateInput);
    }
    let mut q = query_ids.len();
    let mut t = title_ids.len();
    // 3 specials: [CLS] and two [SEP]
    while q + t + 3 > MAX_INPUT_LEN {
        if q > t {
            q -= 1;
        } else {
            t -= 1;
        }
        if q == 0 || t == 0 {
            // cannot happen with MAX_INPUT_LEN >= 5, kept as a guard
            return Err(Error::DegenerateInput);
        }
    }
    let mut ids = Vec::with_capacity(q + t + 3);
    let mut segments = Vec::with_capacity(q + t + 3);
    ids.push(vocab.cls_id());
    segments.push(0);
    ids.extend_from_slice(&query_ids[..q]);
    segments.extend(std::iter::repeat(0).take(q));
    ids.push(vocab.sep_id());
    segments.push(0);
    ids.extend_from_slice(&title_ids[..t]);
    segments.extend(std::iter::repeat(1).take(t));
    ids.push(vocab.sep_id());
    segments.push(1);
    let true_len = ids.len();
    debug_assert!(true_len <= MAX_INPUT_LEN);
    Ok(TokenSequence {
        ids,
        segments,
        true_len,
    })
}

/// Tokenize both texts and assemble.
pub fn assemble_input(query: &str, title: &str, vocab: &Vocab) -> Result<TokenSequence> {
    let q = tokenize_to_ids(query, vocab)?;
    let t = tokenize_to_ids(title, vocab)?;
    assemble_ids(&q, &t, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::RESERVED;

    fn vocab_with_numbers(n: u32) -> Vocab {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..n).map(|i| format!("w{i}")));
        Vocab::new(tokens).unwrap()
    }

    fn ids(n: usize) -> Vec<u32> {
        (0..n as u32).map(|i| i + 5).collect()
    }

    fn side_lengths(seq: &TokenSequence, vocab: &Vocab) -> (usize, usize) {
        let sep = vocab.sep_id();
        let first_sep = seq.ids.iter().position(|&id| id == sep).unwrap();
        let second_sep = seq.ids.iter().rposition(|&id| id == sep).unwrap();
        (first_sep - 1, second_sep - first_sep - 1)
    }

    #[test]
    fn ten_plus_ten_fits_exactly() {
        let v = vocab_with_numbers(40);
        let seq = assemble_ids(&ids(10), &ids(10), &v).unwrap();
        assert_eq!(seq.true_len, 23);
        assert_eq!(side_lengths(&seq, &v), (10, 10));
    }

    #[test]
    fn fifteen_plus_fifteen_prunes_both_to_ten() {
        let v = vocab_with_numbers(40);
        let seq = assemble_ids(&ids(15), &ids(15), &v).unwrap();
        assert_eq!(seq.true_len, 23);
        assert_eq!(side_lengths(&seq, &v), (10, 10));
    }

    #[test]
    fn short_query_keeps_all_its_tokens() {
        let v = vocab_with_numbers(40);
        let seq = assemble_ids(&ids(1), &ids(30), &v).unwrap();
        assert_eq!(seq.true_len, 23);
        assert_eq!(side_lengths(&seq, &v), (1, 19));
    }

    #[test]
    fn structure_and_segments() {
        let v = vocab_with_numbers(40);
        let seq = assemble_ids(&ids(2), &ids(3), &v).unwrap();
        assert_eq!(seq.ids[0], v.cls_id());
        assert_eq!(seq.ids[3], v.sep_id());
        assert_eq!(*seq.ids.last().unwrap(), v.sep_id());
        assert_eq!(seq.segments, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        // pruned sides are prefixes of the originals
        assert_eq!(&seq.ids[1..3], &ids(2)[..]);
        assert_eq!(&seq.ids[4..7], &ids(3)[..]);
    }

    #[test]
    fn empty_side_is_degenerate() {
        let v = vocab_with_numbers(4);
        assert!(matches!(
            assemble_ids(&[], &ids(3), &v),
            Err(Error::DegenerateInput)
        ));
        assert!(matches!(
            assemble_ids(&ids(3), &[], &v),
            Err(Error::DegenerateInput)
        ));
    }

    #[test]
    fn padding_preserves_true_len() {
        let v = vocab_with_numbers(10);
        let seq = assemble_ids(&ids(2), &ids(2), &v).unwrap();
        let padded = seq.padded(5, v.pad_id());
        assert_eq!(padded.true_len, seq.true_len);
        assert_eq!(padded.len(), seq.len() + 5);
        assert!(padded.ids[seq.len()..].iter().all(|&id| id == v.pad_id()));
    }
}
