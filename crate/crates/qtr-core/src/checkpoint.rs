//! Versioned, self-describing checkpoint files.
//!
//! Layout: an 8-byte magic, a `u32` format version, three length-prefixed
//! UTF-8 blocks (spec JSON, vocabulary fingerprint, metadata JSON), then the
//! tensor count and each tensor as name, shape, flags and a little-endian
//! IEEE-754 double payload. Values are stored in verification precision
//! regardless of the in-memory scalar type, so save -> load -> save is
//! byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use crate::arch::ModelSpec;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::vocab::Vocab;

const MAGIC: &[u8; 8] = b"QTRCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_block(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

/// Serialize a model plus training metadata to checkpoint bytes.
pub fn to_bytes<S: Scalar>(model: &Model<S>, meta: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_block(&mut out, serde_json::to_string(&model.spec)?.as_bytes());
    put_block(&mut out, model.vocab_fingerprint.as_bytes());
    put_block(&mut out, serde_json::to_string(meta)?.as_bytes());
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (name, entry) in model.params.iter() {
        put_block(&mut out, name.as_bytes());
        out.extend_from_slice(&(entry.tensor.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(entry.tensor.cols() as u64).to_le_bytes());
        out.push(entry.frozen as u8);
        out.push(entry.decay as u8);
        for &v in entry.tensor.data() {
            out.extend_from_slice(&v.to_f64_c().to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save<S: Scalar>(
    model: &Model<S>,
    meta: &BTreeMap<String, String>,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, to_bytes(model, meta)?)?;
    Ok(())
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn corrupt(msg: impl Into<String>) -> Error {
        Error::CorruptCheckpoint(msg.into())
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.cur
            .read_exact(&mut buf)
            .map_err(|_| Self::corrupt(format!("unexpected end of file reading {n} bytes")))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn block(&mut self) -> Result<Vec<u8>> {
        let len = self.u32()? as usize;
        if len > 1 << 30 {
            return Err(Self::corrupt(format!("implausible block length {len}")));
        }
        self.bytes(len)
    }

    fn string_block(&mut self) -> Result<String> {
        String::from_utf8(self.block()?).map_err(|_| Self::corrupt("non-UTF-8 block"))
    }
}

/// A fully parsed checkpoint, still precision-agnostic.
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub vocab_fingerprint: String,
    pub meta: BTreeMap<String, String>,
    tensors: Vec<(String, usize, usize, bool, bool, Vec<f64>)>,
}

impl Checkpoint {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader {
            cur: Cursor::new(bytes),
        };
        let magic = r.bytes(MAGIC.len())?;
        if magic != MAGIC {
            return Err(Reader::corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let spec: ModelSpec = serde_json::from_str(&r.string_block()?)
            .map_err(|e| Reader::corrupt(format!("bad spec json: {e}")))?;
        let vocab_fingerprint = r.string_block()?;
        let meta: BTreeMap<String, String> = serde_json::from_str(&r.string_block()?)
            .map_err(|e| Reader::corrupt(format!("bad metadata json: {e}")))?;
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = r.string_block()?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let flags = r.bytes(2)?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Reader::corrupt("tensor shape overflow"))?;
            let raw = r.bytes(n * 8)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, rows, cols, flags[0] != 0, flags[1] != 0, data));
        }
        Ok(Self {
            spec,
            vocab_fingerprint,
            meta,
            tensors,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Materialize the model at scalar type `S`, optionally validating the
    /// vocabulary fingerprint.
    pub fn into_model<S: Scalar>(self, vocab: Option<&Vocab>) -> Result<Model<S>> {
        if let Some(v) = vocab {
            let current = v.fingerprint();
            if current != self.vocab_fingerprint {
                return Err(Error::FingerprintMismatch {
                    in_file: self.vocab_fingerprint,
                    current,
                });
            }
        }
        self.spec.validate()?;
        let mut params = ParamStore::new();
        for (name, rows, cols, frozen, decay, data) in self.tensors {
            let cast: Vec<S> = data.iter().map(|&v| S::from_f64_c(v)).collect();
            params.insert(name, Tensor::new(rows, cols, cast), frozen, decay);
        }
        Ok(Model {
            spec: self.spec,
            params,
            vocab_fingerprint: self.vocab_fingerprint,
        })
    }
}

/// Load and validate in one step.
pub fn load_model<S: Scalar>(path: impl AsRef<Path>, vocab: Option<&Vocab>) -> Result<Model<S>> {
    Checkpoint::load(path)?.into_model(vocab)
}
