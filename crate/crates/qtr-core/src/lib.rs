//! Training, distilling, evaluating and benchmarking tiny query-title
//! relevance classifiers: pure BiLSTM encoders, pure self-attention
//! ("BERT-student") encoders, and the hybrid BertBiLSTM that stacks
//! BiLSTM layers on top of a single self-attention layer.
//!
//! All numeric code is generic over the scalar type. Two instantiations
//! matter in practice and have aliases at the crate root:
//!
//! * [`Verif`] (`f64`) — verification precision, used for gradient checks,
//!   unit tests and deterministic training runs;
//! * [`Bench`] (`f32`) — benchmark precision, used for latency measurement.

pub mod arch;
pub mod augment;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod gen;
pub mod gradcheck;
pub mod init;
pub mod input;
pub mod labeling;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod vocab;
pub mod wordpiece;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Verification precision: double, used for gradient checks and training.
pub type Verif = f64;
/// Benchmark precision: single, used for latency measurement.
pub type Bench = f32;

pub type TensorV = tensor::Tensor<Verif>;
pub type TensorB = tensor::Tensor<Bench>;
pub type ModelV = model::Model<Verif>;
pub type ModelB = model::Model<Bench>;
pub type ParamStoreV = params::ParamStore<Verif>;
