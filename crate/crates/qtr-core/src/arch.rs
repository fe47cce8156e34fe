//! Declarative encoder specs, the named architecture grid and closed-form
//! parameter counting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::MAX_INPUT_LEN;

/// One encoder layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    BertStudent {
        d_h: usize,
        d_ff: usize,
        heads: usize,
    },
    BiLstm {
        d_h: usize,
    },
}

impl LayerSpec {
    pub fn d_h(&self) -> usize {
        match self {
            LayerSpec::BertStudent { d_h, .. } | LayerSpec::BiLstm { d_h } => *d_h,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::BertStudent { .. } => "BERT-student",
            LayerSpec::BiLstm { .. } => "BiLSTM",
        }
    }
}

/// How the per-position encoder states become a single vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Mean over true-length positions (self-attention last layer).
    Mean,
    /// The `[CLS]` position state.
    Cls,
    /// Concatenation of the final forward and final backward states
    /// (recurrent last layer).
    BilstmFinalConcat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Display name, e.g. `bertbilstm-3x128`.
    pub name: String,
    /// Width of the (frozen for students) embedding table.
    pub embed_dim: usize,
    pub vocab_size: usize,
    /// Rows of the trainable positional table.
    pub num_positions: usize,
    pub max_seq_len: usize,
    pub num_segments: usize,
    pub layers: Vec<LayerSpec>,
    pub pooling: Pooling,
    /// Teachers train their own table; students keep it frozen.
    pub embedding_trainable: bool,
}

pub const DEFAULT_EMBED_DIM: usize = 768;
pub const DEFAULT_NUM_POSITIONS: usize = 512;
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;
pub const DEFAULT_HEADS: usize = 4;

impl ModelSpec {
    pub fn d_h(&self) -> usize {
        self.layers[0].d_h()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Dimension entering the classifier head.
    pub fn pooled_dim(&self) -> usize {
        match self.pooling {
            Pooling::Mean | Pooling::Cls => self.d_h(),
            Pooling::BilstmFinalConcat => 2 * self.d_h(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("at least one encoder layer required".into()));
        }
        let d_h = self.d_h();
        if d_h == 0 || self.embed_dim == 0 || self.vocab_size == 0 {
            return Err(Error::InvalidSpec("dimensions must be positive".into()));
        }
        if self.max_seq_len > self.num_positions {
            return Err(Error::InvalidSpec(format!(
                "max_seq_len {} exceeds positional table of {} rows",
                self.max_seq_len, self.num_positions
            )));
        }
        for layer in &self.layers {
            if layer.d_h() != d_h {
                return Err(Error::InvalidSpec(
                    "all layers must share the same hidden size".into(),
                ));
            }
            if let LayerSpec::BertStudent { d_h, d_ff, heads } = layer {
                if *heads == 0 || d_h % heads != 0 {
                    return Err(Error::InvalidSpec(format!(
                        "hidden size {d_h} not divisible by {heads} heads"
                    )));
                }
                if *d_ff == 0 {
                    return Err(Error::InvalidSpec("d_ff must be positive".into()));
                }
            }
        }
        // mixed stacks must be the hybrid: one self-attention layer at the
        // bottom, then one or two recurrent layers
        let kinds: Vec<bool> = self
            .layers
            .iter()
            .map(|l| matches!(l, LayerSpec::BertStudent { .. }))
            .collect();
        let mixed = kinds.iter().any(|&k| k) && kinds.iter().any(|&k| !k);
        if mixed {
            let hybrid_ok = kinds[0]
                && kinds[1..].iter().all(|&k| !k)
                && (2..=3).contains(&self.layers.len());
            if !hybrid_ok {
                return Err(Error::InvalidSpec(
                    "mixed stacks must be one BERT-student layer followed by one or two BiLSTM layers"
                        .into(),
                ));
            }
        }
        match (self.layers.last().unwrap(), self.pooling) {
            (LayerSpec::BiLstm { .. }, Pooling::BilstmFinalConcat) => {}
            (LayerSpec::BiLstm { .. }, _) => {
                return Err(Error::InvalidSpec(
                    "recurrent last layer requires bilstm-final-concat pooling".into(),
                ))
            }
            (LayerSpec::BertStudent { .. }, Pooling::BilstmFinalConcat) => {
                return Err(Error::InvalidSpec(
                    "bilstm-final-concat pooling requires a recurrent last layer".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    fn base(name: String, layers: Vec<LayerSpec>, vocab_size: usize, embed_dim: usize) -> Self {
        let pooling = match layers.last() {
            Some(LayerSpec::BiLstm { .. }) => Pooling::BilstmFinalConcat,
            _ => Pooling::Mean,
        };
        Self {
            name,
            embed_dim,
            vocab_size,
            num_positions: DEFAULT_NUM_POSITIONS,
            max_seq_len: MAX_INPUT_LEN,
            num_segments: 2,
            layers,
            pooling,
            embedding_trainable: false,
        }
    }

    /// The desk-scale teacher: a 4-layer BERT-student at width 256 with its
    /// own trainable embedding table.
    pub fn teacher(vocab_size: usize, embed_dim: usize) -> Self {
        let layers = vec![
            LayerSpec::BertStudent {
                d_h: 256,
                d_ff: 1024,
                heads: DEFAULT_HEADS,
            };
            4
        ];
        let mut spec = Self::base("teacher".into(), layers, vocab_size, embed_dim);
        spec.embedding_trainable = true;
        spec
    }

    /// Parse a grid name: `bert-student-1x128` (alias `bert-1x128`),
    /// `bilstm-2x128`, `bertbilstm-3x128` or `teacher`.
    pub fn named(name: &str, vocab_size: usize, embed_dim: usize) -> Result<Self> {
        if name == "teacher" {
            return Ok(Self::teacher(vocab_size, embed_dim));
        }
        let bad = || Error::InvalidSpec(format!("unknown spec name {name}"));
        let (kind, dims) = name.rsplit_once('-').ok_or_else(bad)?;
        let (l_str, d_str) = dims.split_once('x').ok_or_else(bad)?;
        let l: usize = l_str.parse().map_err(|_| bad())?;
        let d_h: usize = d_str.parse().map_err(|_| bad())?;
        if l == 0 || d_h == 0 {
            return Err(bad());
        }
        let layers = match kind {
            "bert" | "bert-student" => vec![
                LayerSpec::BertStudent {
                    d_h,
                    d_ff: d_h,
                    heads: DEFAULT_HEADS,
                };
                l
            ],
            "bilstm" => vec![LayerSpec::BiLstm { d_h }; l],
            "bertbilstm" => {
                if !(2..=3).contains(&l) {
                    return Err(Error::InvalidSpec(format!(
                        "bertbilstm takes 2 or 3 layers, got {l}"
                    )));
                }
                let mut layers = vec![LayerSpec::BertStudent {
                    d_h,
                    d_ff: d_h,
                    heads: DEFAULT_HEADS,
                }];
                layers.extend(vec![LayerSpec::BiLstm { d_h }; l - 1]);
                layers
            }
            _ => return Err(bad()),
        };
        let spec = Self::base(name.to_string(), layers, vocab_size, embed_dim);
        spec.validate()?;
        Ok(spec)
    }

    /// The ten student architectures of the evaluation grid, in table order.
    pub fn student_grid_names() -> Vec<&'static str> {
        vec![
            "bert-student-1x128",
            "bilstm-1x128",
            "bert-student-1x300",
            "bilstm-1x300",
            "bert-student-2x128",
            "bilstm-2x128",
            "bertbilstm-2x128",
            "bert-student-3x128",
            "bilstm-3x128",
            "bertbilstm-3x128",
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub trainable: usize,
    pub frozen: usize,
}

/// Closed-form parameter count; cross-checked against store enumeration in
/// tests. The frozen embedding table is excluded from the trainable count,
/// positional/segment tables and the projection are included.
pub fn count_params(spec: &ModelSpec) -> Result<ParamCounts> {
    spec.validate()?;
    let d_h = spec.d_h();
    let e = spec.embed_dim;
    let table = spec.vocab_size * e;
    let mut trainable = e * d_h + d_h                       // projection
        + spec.num_positions * d_h                          // positional
        + spec.num_segments * d_h; // segment
    let mut d_in = d_h;
    for layer in &spec.layers {
        match layer {
            LayerSpec::BertStudent { d_h, d_ff, .. } => {
                trainable += 4 * (d_h * d_h + d_h);         // q, k, v, output
                trainable += d_h * d_ff + d_ff + d_ff * d_h + d_h;
                trainable += 2 * (2 * d_h); // two layer norms
                d_in = *d_h;
            }
            LayerSpec::BiLstm { d_h } => {
                // two directions: input weights, recurrent weights, bias
                trainable += 2 * (d_in * 4 * d_h + d_h * 4 * d_h + 4 * d_h);
                d_in = 2 * d_h;
            }
        }
    }
    let d_pool = spec.pooled_dim();
    trainable += d_pool * d_h + d_h + d_h * 2 + 2; // head
    let (trainable, frozen) = if spec.embedding_trainable {
        (trainable + table, 0)
    } else {
        (trainable, table)
    };
    Ok(ParamCounts { trainable, frozen })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(name: &str) -> ModelSpec {
        ModelSpec::named(name, DEFAULT_VOCAB_SIZE, DEFAULT_EMBED_DIM).unwrap()
    }

    #[test]
    fn published_trainable_counts_are_reproduced() {
        // (name, published count) at full-scale defaults, tolerance 0.05M
        let cases = [
            ("bert-student-1x128", 0.3e6),
            ("bert-student-1x300", 1.0e6),
            ("bert-student-2x128", 0.4e6),
            ("bert-student-3x128", 0.5e6),
            ("bertbilstm-2x128", 0.6e6),
            ("bertbilstm-3x128", 1.0e6),
        ];
        for (name, want) in cases {
            let got = count_params(&named(name)).unwrap().trainable as f64;
            assert!(
                (got - want).abs() <= 0.05e6,
                "{name}: analytic {got} vs published {want}"
            );
        }
    }

    #[test]
    fn frozen_table_is_separated_for_students() {
        let spec = named("bert-student-1x128");
        let counts = count_params(&spec).unwrap();
        assert_eq!(counts.frozen, DEFAULT_VOCAB_SIZE * DEFAULT_EMBED_DIM);
        let teacher = ModelSpec::teacher(DEFAULT_VOCAB_SIZE, DEFAULT_EMBED_DIM);
        let tc = count_params(&teacher).unwrap();
        assert_eq!(tc.frozen, 0);
        assert!(tc.trainable > DEFAULT_VOCAB_SIZE * DEFAULT_EMBED_DIM);
    }

    #[test]
    fn hybrid_pools_by_final_state_concat() {
        let spec = named("bertbilstm-2x128");
        assert_eq!(spec.pooling, Pooling::BilstmFinalConcat);
        assert_eq!(spec.pooled_dim(), 256);
        assert_eq!(named("bert-student-2x128").pooling, Pooling::Mean);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        // BiLSTM below a BERT layer is not the hybrid pattern
        let mut spec = named("bertbilstm-2x128");
        spec.layers.reverse();
        spec.pooling = Pooling::Mean;
        assert!(spec.validate().is_err());

        assert!(ModelSpec::named("bertbilstm-4x128", 100, 16).is_err());
        assert!(ModelSpec::named("bert-student-0x128", 100, 16).is_err());
        assert!(ModelSpec::named("mystery-1x128", 100, 16).is_err());

        // heads must divide the hidden size
        let mut spec = named("bert-student-1x128");
        spec.layers = vec![LayerSpec::BertStudent {
            d_h: 130,
            d_ff: 130,
            heads: 4,
        }];
        assert!(spec.validate().is_err());

        // hidden sizes must agree across layers
        let mut spec = named("bilstm-2x128");
        spec.layers[1] = LayerSpec::BiLstm { d_h: 64 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn grid_has_ten_students() {
        let names = ModelSpec::student_grid_names();
        assert_eq!(names.len(), 10);
        for name in names {
            named(name).validate().unwrap();
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = named("bertbilstm-3x128");
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
