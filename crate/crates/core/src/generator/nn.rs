use crate::error::{shape, Error, Result};
use crate::tensor::{dot, norm, DenseMatrix};

use super::{Corpus, Decoder};

/// Decode-by-retrieval: returns the corpus text whose attack-space embedding
/// has the highest cosine with the query. Ties go to the lexicographically
/// lowest id.
#[derive(Debug, Clone)]
pub struct NearestNeighborDecoder {
    corpus: Corpus,
    embeddings: DenseMatrix<f64>,
    norms: Vec<f64>,
}

impl NearestNeighborDecoder {
    pub fn new(corpus: Corpus, embeddings: DenseMatrix<f64>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("nearest-neighbor corpus"));
        }
        if embeddings.rows() != corpus.len() {
            return Err(shape("NearestNeighborDecoder::new", corpus.len(), embeddings.rows()));
        }
        let norms = embeddings.iter_rows().map(norm).collect();
        Ok(Self {
            corpus,
            embeddings,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    /// Index of the best-matching record.
    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        if query.len() != self.dim() {
            return Err(shape("nn_decode", self.dim(), query.len()));
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(Error::ZeroNorm("nn_decode"));
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.embeddings.iter_rows().enumerate() {
            if self.norms[i] == 0.0 {
                continue;
            }
            let c = dot(row, query) / (self.norms[i] * qn);
            best = match best {
                None => Some((i, c)),
                Some((j, bc)) => {
                    let better = c > bc
                        || (c == bc && self.corpus.records()[i].id < self.corpus.records()[j].id);
                    Some(if better { (i, c) } else { (j, bc) })
                }
            };
        }
        best.map(|(i, _)| i).ok_or(Error::ZeroNorm("nn_decode corpus"))
    }

    pub fn nn_decode(&self, query: &[f64]) -> Result<&str> {
        let i = self.nearest(query)?;
        Ok(&self.corpus.records()[i].text)
    }
}

impl Decoder for NearestNeighborDecoder {
    fn decode(&self, embedding: &[f64], _max_tokens: usize) -> Result<String> {
        self.nn_decode(embedding).map(str::to_string)
    }
}
