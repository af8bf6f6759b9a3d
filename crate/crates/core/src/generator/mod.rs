//! Decode stage of the attack: turn an (aligned) attack-space embedding back
//! into text.
//!
//! Two decoders share the [`Decoder`] interface:
//!
//! * [`NearestNeighborDecoder`] returns the closest sentence of an indexed
//!   corpus. It is an upper-bound surrogate for a generative decoder.
//! * [`ToyDecoder`] is a small conditional autoregressive model trained with
//!   token-level cross-entropy, decoded greedily.

mod corpus;
mod nn;
mod toy;

pub use corpus::{Corpus, CorpusRecord};
pub use nn::NearestNeighborDecoder;
pub use toy::{
    greedy_decode, train_toy_decoder, DecoderParams, ToyDecoder, ToyDecoderConfig,
    TrainedDecoder, Vocab, BOS, EOS, UNK,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::DenseVector;

/// Embedding-to-text decoder.
pub trait Decoder {
    fn decode(&self, embedding: &[f64], max_tokens: usize) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeStrategy {
    Greedy,
    NearestNeighbor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRequest {
    pub embedding: DenseVector<f64>,
    pub max_tokens: usize,
    pub strategy: DecodeStrategy,
}

impl DecodeRequest {
    pub fn new(embedding: DenseVector<f64>, max_tokens: usize, strategy: DecodeStrategy) -> Result<Self> {
        if max_tokens == 0 {
            return Err(invalid("max_tokens", "must be at least 1"));
        }
        Ok(Self {
            embedding,
            max_tokens,
            strategy,
        })
    }

    pub fn run(&self, decoder: &dyn Decoder) -> Result<String> {
        decoder.decode(self.embedding.as_slice(), self.max_tokens)
    }
}
