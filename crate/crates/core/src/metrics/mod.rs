//! Reconstruction-quality metrics: token-overlap scores, embedding cosine,
//! and entity-overlap F1.

mod entity;
mod text;

pub use entity::{entity_f1, EntityAnnotation, EntityLabel};
pub use text::{bleu_n, lcs_len, rouge_1, rouge_l, unigram_overlap, TokenSequence, Tokenizer};

use crate::error::{shape, Error, Result};
use crate::scalar::Real;
use crate::tensor::{dot, norm, DenseVector};

/// Cosine similarity `a·b / (‖a‖‖b‖)`.
pub fn cosine<T: Real>(a: &DenseVector<T>, b: &DenseVector<T>) -> Result<T> {
    cosine_slices(a.as_slice(), b.as_slice())
}

pub fn cosine_slices<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(shape("cosine", a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroNorm("cosine"));
    }
    let c = dot(a, b) / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}
