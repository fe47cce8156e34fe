//! Token vocabulary with the fixed reserved prefix and file I/O.
//!
//! File format: one token per line, line number = id. The reserved tokens
//! come first, in the order `[PAD] [UNK] [CLS] [SEP] [MASK]`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::hex_string;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
pub const RESERVED: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];

/// Subword continuation prefix.
pub const CONTINUATION: &str = "##";

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Build from the full token list (reserved tokens included, first).
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() {
            return Err(Error::InvalidVocab(format!(
                "need at least {} tokens, got {}",
                RESERVED.len(),
                tokens.len()
            )));
        }
        for (i, want) in RESERVED.iter().enumerate() {
            if tokens[i] != *want {
                return Err(Error::InvalidVocab(format!(
                    "reserved token {i} must be {want}, found {}",
                    tokens[i]
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::InvalidVocab(format!("empty token at id {i}")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidVocab(format!("duplicate token {t}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn unk_id(&self) -> u32 {
        1
    }

    pub fn cls_id(&self) -> u32 {
        2
    }

    pub fn sep_id(&self) -> u32 {
        3
    }

    pub fn mask_id(&self) -> u32 {
        4
    }

    /// SHA-256 of the canonical file serialization; stored in checkpoints so
    /// a model is never run against a foreign vocabulary.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hex_string(&hasher.finalize())
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let content = fs::read_to_string(path)?;
        Self::new(content.lines().map(|l| l.to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vocab {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(["sony", "a", "##55"].map(String::from));
        Vocab::new(tokens).unwrap()
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let v = toy();
        assert_eq!(v.pad_id(), 0);
        assert_eq!(v.unk_id(), 1);
        assert_eq!(v.cls_id(), 2);
        assert_eq!(v.sep_id(), 3);
        assert_eq!(v.mask_id(), 4);
        assert_eq!(v.id("sony"), Some(5));
    }

    #[test]
    fn rejects_wrong_reserved_order() {
        let tokens = vec!["[UNK]", "[PAD]", "[CLS]", "[SEP]", "[MASK]"]
            .into_iter()
            .map(String::from)
            .collect();
        assert!(Vocab::new(tokens).is_err());
    }

    #[test]
    fn rejects_duplicates() {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.push("x".into());
        tokens.push("x".into());
        assert!(Vocab::new(tokens).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let v = toy();
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(["sony", "a", "##56"].map(String::from));
        let w = Vocab::new(tokens).unwrap();
        assert_ne!(v.fingerprint(), w.fingerprint());
        assert_eq!(v.fingerprint(), toy().fingerprint());
    }

    #[test]
    fn file_round_trip() {
        let v = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        let w = Vocab::load(&path).unwrap();
        assert_eq!(v.tokens(), w.tokens());
        assert_eq!(v.fingerprint(), w.fingerprint());
    }
}
