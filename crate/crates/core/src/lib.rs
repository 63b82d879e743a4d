//! Sequence-to-sequence training with metric-augmented objectives.
//!
//! The crate provides a small reverse-mode tensor tape, an attentional GRU
//! encoder-decoder with beam-search and sampling decoders, the reward metrics
//! used as weak or full supervision signals, hope/fear selection over k-best
//! lists, and the training objectives (MLE, minimum risk training, sequence
//! and token-level ramp losses).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below are what the training harness uses.

pub mod checkpoint;
pub mod decode;
pub mod error;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod selectors;
pub mod tape;
pub mod tensor;
pub mod vocab;

pub use decode::{beam_search, greedy, sample, Hypothesis, KBestList};
pub use error::{Error, Result, TensorError};
pub use model::{ModelConfig, Seq2Seq};
pub use optim::Sgd;
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
pub use vocab::Vocab;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type ParamStore64 = ParamStore<f64>;
pub type Model64 = Seq2Seq<f64>;
pub type Model32 = Seq2Seq<f32>;
pub type Tape64<'p> = Tape<'p, f64>;
