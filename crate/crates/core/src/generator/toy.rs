//! Compact conditional autoregressive decoder.
//!
//! Per step, with `x = [emb(prev); e]`:
//!
//! ```text
//! z = tanh(W_h · x + b_h)
//! P(token | prev, e) = softmax(W_out · z + b_out)
//! ```
//!
//! Training minimizes the summed token cross-entropy of each sentence
//! (terminated by EOS) given its sentence embedding, averaged over the batch,
//! using AdamW. Gradients are computed by hand.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::metrics::Tokenizer;
use crate::optim::AdamW;
use crate::rng::NoiseRng;
use crate::tensor::{norm, DenseMatrix};

use super::{Corpus, Decoder};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
const SPECIALS: [&str; 3] = ["<bos>", "<eos>", "<unk>"];

/// Token ↔ index map. Indices 0..3 are BOS, EOS, UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Specials followed by corpus tokens in order of first appearance.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, tokenizer: &Tokenizer) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for text in texts {
            for tok in tokenizer.tokenize(text).tokens() {
                if !index.contains_key(tok) {
                    index.insert(tok.clone(), tokens.len());
                    tokens.push(tok.clone());
                }
            }
        }
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    fn is_valid(&self) -> bool {
        self.tokens.len() >= SPECIALS.len()
            && SPECIALS.iter().enumerate().all(|(i, s)| self.tokens[i] == *s)
            && self.index.len() == self.tokens.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyDecoderConfig {
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub tokenizer: Tokenizer,
}

impl Default for ToyDecoderConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            lr: 1e-4,
            weight_decay: 1e-4,
            batch: 128,
            epochs: 10,
            seed: 0,
            tokenizer: Tokenizer::default(),
        }
    }
}

/// Parameter tensors (also used as the gradient container).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// `V × h`
    pub token_embedding: DenseMatrix<f64>,
    /// `h × (h + n)`
    pub hidden_weights: DenseMatrix<f64>,
    /// `1 × h`
    pub hidden_bias: DenseMatrix<f64>,
    /// `V × h`
    pub output_weights: DenseMatrix<f64>,
    /// `1 × V`
    pub output_bias: DenseMatrix<f64>,
}

impl DecoderParams {
    pub const NAMES: [&'static str; 5] = [
        "token_embedding",
        "hidden_weights",
        "hidden_bias",
        "output_weights",
        "output_bias",
    ];

    fn zeros(vocab: usize, hidden: usize, embed: usize) -> Self {
        Self {
            token_embedding: DenseMatrix::zeros(vocab, hidden),
            hidden_weights: DenseMatrix::zeros(hidden, hidden + embed),
            hidden_bias: DenseMatrix::zeros(1, hidden),
            output_weights: DenseMatrix::zeros(vocab, hidden),
            output_bias: DenseMatrix::zeros(1, vocab),
        }
    }

    fn init(vocab: usize, hidden: usize, embed: usize, seed: u64) -> Self {
        let mut rng = NoiseRng::new(seed);
        let mut p = Self::zeros(vocab, hidden, embed);
        let scale_h = 1.0 / ((hidden + embed) as f64).sqrt();
        let scale_o = 1.0 / (hidden as f64).sqrt();
        for x in p.token_embedding.as_mut_slice() {
            *x = 0.5 * rng.standard_normal();
        }
        for x in p.hidden_weights.as_mut_slice() {
            *x = scale_h * rng.standard_normal();
        }
        for x in p.output_weights.as_mut_slice() {
            *x = scale_o * rng.standard_normal();
        }
        p
    }

    pub fn blocks(&self) -> [&DenseMatrix<f64>; 5] {
        [
            &self.token_embedding,
            &self.hidden_weights,
            &self.hidden_bias,
            &self.output_weights,
            &self.output_bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut DenseMatrix<f64>; 5] {
        [
            &mut self.token_embedding,
            &mut self.hidden_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    fn scale(&mut self, s: f64) {
        for b in self.blocks_mut() {
            for x in b.as_mut_slice() {
                *x *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDecoder {
    vocab: Vocab,
    tokenizer: Tokenizer,
    embed_dim: usize,
    hidden: usize,
    max_len: usize,
    params: DecoderParams,
}

/// Training output.
#[derive(Debug, Clone)]
pub struct TrainedDecoder {
    pub decoder: ToyDecoder,
    /// Mean per-sentence loss for each epoch.
    pub loss_history: Vec<f64>,
}

struct StepCache {
    prev: usize,
    x: Vec<f64>,
    z: Vec<f64>,
    probs: Vec<f64>,
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

impl ToyDecoder {
    /// Builds an untrained decoder with seeded initial weights.
    pub fn new(vocab: Vocab, embed_dim: usize, hidden: usize, max_len: usize, seed: u64) -> Self {
        let params = DecoderParams::init(vocab.len(), hidden, embed_dim, seed);
        Self {
            vocab,
            tokenizer: Tokenizer::default(),
            embed_dim,
            hidden,
            max_len,
            params,
        }
    }

    /// Reassembles a decoder from stored parts, checking every shape.
    pub fn from_parts(
        vocab: Vocab,
        tokenizer: Tokenizer,
        embed_dim: usize,
        max_len: usize,
        params: DecoderParams,
    ) -> Result<Self> {
        if !vocab.is_valid() {
            return Err(invalid("vocab", "must start with <bos>, <eos>, <unk> and be unique"));
        }
        let hidden = params.hidden_bias.cols();
        let expected = DecoderParams::zeros(vocab.len(), hidden, embed_dim);
        for ((name, got), want) in DecoderParams::NAMES
            .iter()
            .zip(params.blocks())
            .zip(expected.blocks())
        {
            if got.shape() != want.shape() {
                return Err(shape(
                    name,
                    format!("{:?}", want.shape()),
                    format!("{:?}", got.shape()),
                ));
            }
            if !got.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self {
            vocab,
            tokenizer,
            embed_dim,
            hidden,
            max_len,
            params,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn params(&self) -> &DecoderParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut DecoderParams {
        &mut self.params
    }

    /// Token ids for `text` (no BOS/EOS).
    pub fn encode(&self, text: &str) -> Vec<usize> {
        self.tokenizer
            .tokenize(text)
            .tokens()
            .iter()
            .map(|t| self.vocab.id(t))
            .collect()
    }

    fn forward_step(&self, prev: usize, e: &[f64]) -> StepCache {
        let p = &self.params;
        let mut x = Vec::with_capacity(self.hidden + self.embed_dim);
        x.extend_from_slice(p.token_embedding.row(prev));
        x.extend_from_slice(e);
        let z: Vec<f64> = p
            .hidden_weights
            .iter_rows()
            .zip(p.hidden_bias.as_slice())
            .map(|(w, &b)| (crate::tensor::dot(w, &x) + b).tanh())
            .collect();
        let mut probs: Vec<f64> = p
            .output_weights
            .iter_rows()
            .zip(p.output_bias.as_slice())
            .map(|(w, &b)| crate::tensor::dot(w, &z) + b)
            .collect();
        softmax_in_place(&mut probs);
        StepCache { prev, x, z, probs }
    }

    /// Next-token distribution given the previous token and the embedding.
    pub fn step_distribution(&self, prev: usize, e: &[f64]) -> Result<Vec<f64>> {
        if e.len() != self.embed_dim {
            return Err(shape("step_distribution", self.embed_dim, e.len()));
        }
        if prev >= self.vocab.len() {
            return Err(invalid("prev", format!("token id {prev} out of range")));
        }
        Ok(self.forward_step(prev, e).probs)
    }

    /// `−Σᵢ log P(xᵢ | xᵢ₋₁, e)` over `tokens` followed by EOS.
    pub fn sentence_loss(&self, tokens: &[usize], e: &[f64]) -> f64 {
        let mut prev = BOS;
        let mut loss = 0.0;
        for &target in tokens.iter().chain(std::iter::once(&EOS)) {
            let c = self.forward_step(prev, e);
            loss -= c.probs[target].max(f64::MIN_POSITIVE).ln();
            prev = target;
        }
        loss
    }

    fn accumulate(&self, tokens: &[usize], e: &[f64], grads: &mut DecoderParams) -> f64 {
        let h = self.hidden;
        let p = &self.params;
        let mut prev = BOS;
        let mut loss = 0.0;
        let mut dlogits = vec![0.0; self.vocab.len()];
        let mut dz = vec![0.0; h];
        for &target in tokens.iter().chain(std::iter::once(&EOS)) {
            let c = self.forward_step(prev, e);
            loss -= c.probs[target].max(f64::MIN_POSITIVE).ln();

            dlogits.copy_from_slice(&c.probs);
            dlogits[target] -= 1.0;

            dz.iter_mut().for_each(|x| *x = 0.0);
            for (v, &g) in dlogits.iter().enumerate() {
                let bias = grads.output_bias.as_mut_slice();
                bias[v] += g;
                let w_row = p.output_weights.row(v);
                let g_row = grads.output_weights.row_mut(v);
                for j in 0..h {
                    g_row[j] += g * c.z[j];
                    dz[j] += g * w_row[j];
                }
            }
            // tanh' = 1 − z²
            let da: Vec<f64> = dz.iter().zip(&c.z).map(|(d, z)| d * (1.0 - z * z)).collect();
            let mut dx_tok = vec![0.0; h];
            for (i, &g) in da.iter().enumerate() {
                grads.hidden_bias.as_mut_slice()[i] += g;
                let g_row = grads.hidden_weights.row_mut(i);
                for (gw, &xv) in g_row.iter_mut().zip(&c.x) {
                    *gw += g * xv;
                }
                let w_row = p.hidden_weights.row(i);
                for (d, &w) in dx_tok.iter_mut().zip(&w_row[..h]) {
                    *d += g * w;
                }
            }
            for (ge, d) in grads.token_embedding.row_mut(c.prev).iter_mut().zip(&dx_tok) {
                *ge += d;
            }
            prev = target;
        }
        loss
    }

    /// Mean loss over `batch` and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, batch: &[(&[usize], &[f64])]) -> (f64, DecoderParams) {
        let mut grads = DecoderParams::zeros(self.vocab.len(), self.hidden, self.embed_dim);
        let mut total = 0.0;
        for (tokens, e) in batch {
            total += self.accumulate(tokens, e, &mut grads);
        }
        let n = batch.len().max(1) as f64;
        grads.scale(1.0 / n);
        (total / n, grads)
    }

    /// Argmax decoding from BOS until EOS or `max_tokens` tokens.
    pub fn greedy_decode(&self, e: &[f64], max_tokens: usize) -> Result<String> {
        if e.len() != self.embed_dim {
            return Err(shape("greedy_decode", self.embed_dim, e.len()));
        }
        let mut prev = BOS;
        let mut out: Vec<&str> = Vec::new();
        for _ in 0..max_tokens {
            let probs = self.forward_step(prev, e).probs;
            let next = probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &p)| {
                    if p > bp {
                        (i, p)
                    } else {
                        (bi, bp)
                    }
                })
                .0;
            if next == EOS {
                break;
            }
            if next != BOS {
                out.push(self.vocab.token(next));
            }
            prev = next;
        }
        Ok(out.join(" "))
    }
}

impl Decoder for ToyDecoder {
    fn decode(&self, embedding: &[f64], max_tokens: usize) -> Result<String> {
        self.greedy_decode(embedding, max_tokens)
    }
}

/// Free-function form of [`ToyDecoder::greedy_decode`].
pub fn greedy_decode(dec: &ToyDecoder, e: &[f64], max_tokens: usize) -> Result<String> {
    dec.greedy_decode(e, max_tokens)
}

/// Trains a decoder on `corpus`, where row `i` of `embeddings` is the unit
/// attack-space embedding of record `i`.
pub fn train_toy_decoder(
    corpus: &Corpus,
    embeddings: &DenseMatrix<f64>,
    config: &ToyDecoderConfig,
) -> Result<TrainedDecoder> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if embeddings.rows() != corpus.len() {
        return Err(shape("train_toy_decoder", corpus.len(), embeddings.rows()));
    }
    if config.hidden == 0 || config.batch == 0 {
        return Err(invalid("config", "hidden and batch must be positive"));
    }
    for (i, row) in embeddings.iter_rows().enumerate() {
        if (norm(row) - 1.0).abs() > 1e-6 {
            return Err(invalid("embeddings", format!("row {i} is not L2-normalized")));
        }
    }

    let vocab = Vocab::build(corpus.texts(), &config.tokenizer);
    let mut decoder = ToyDecoder::new(vocab, embeddings.cols(), config.hidden, 0, config.seed);
    decoder.tokenizer = config.tokenizer;
    let sequences: Vec<Vec<usize>> = corpus.texts().map(|t| decoder.encode(t)).collect();
    decoder.max_len = sequences.iter().map(Vec::len).max().unwrap_or(0) + 1;

    let sizes: Vec<usize> = decoder.params.blocks().iter().map(|b| b.as_slice().len()).collect();
    let mut opt = AdamW::new(&sizes, config.lr, config.weight_decay);
    let mut order_rng = NoiseRng::new(config.seed.wrapping_add(1));
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let order = order_rng.permutation(sequences.len());
        let mut total = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<(&[usize], &[f64])> = chunk
                .iter()
                .map(|&i| (sequences[i].as_slice(), embeddings.row(i)))
                .collect();
            let (loss, grads) = decoder.loss_and_gradients(&batch);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss * chunk.len() as f64;
            let grad_blocks = grads.blocks().map(|b| b.as_slice());
            let mut param_blocks = decoder.params.blocks_mut().map(|b| b.as_mut_slice());
            opt.step(&mut param_blocks, &grad_blocks);
        }
        history.push(total / sequences.len() as f64);
    }
    if decoder.params.blocks().iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs.saturating_sub(1),
        });
    }
    Ok(TrainedDecoder {
        decoder,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rows(rows: usize, dim: usize, seed: u64) -> DenseMatrix<f64> {
        let mut r = NoiseRng::new(seed);
        let data: Vec<Vec<f64>> = (0..rows).map(|_| r.unit_direction(dim)).collect();
        DenseMatrix::from_rows(&data).unwrap()
    }

    fn config(lr: f64, epochs: usize) -> ToyDecoderConfig {
        ToyDecoderConfig {
            hidden: 16,
            lr,
            weight_decay: 1e-4,
            batch: 16,
            epochs,
            seed: 0,
            tokenizer: Tokenizer::default(),
        }
    }

    #[test]
    fn vocab_layout() {
        let v = Vocab::build(["b a", "a c"], &Tokenizer::default());
        assert_eq!(v.len(), 6);
        assert_eq!(v.token(BOS), "<bos>");
        assert_eq!(v.id("b"), 3);
        assert_eq!(v.id("zzz"), UNK);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn memorizes_single_sentence() {
        let corpus = Corpus::from_texts(["red fox runs"]).unwrap();
        let e = unit_rows(1, 4, 1);
        let t = train_toy_decoder(&corpus, &e, &config(0.05, 200)).unwrap();
        assert!(*t.loss_history.last().unwrap() < 0.01, "{:?}", t.loss_history.last());
        assert_eq!(t.decoder.greedy_decode(e.row(0), 10).unwrap(), "red fox runs");
        let one = t.decoder.greedy_decode(e.row(0), 1).unwrap();
        assert_eq!(one, "red");
    }

    #[test]
    fn zero_lr_changes_nothing() {
        let corpus = Corpus::from_texts(["a b", "c d e"]).unwrap();
        let e = unit_rows(2, 3, 2);
        let mut cfg = config(0.0, 5);
        cfg.batch = 2;
        let t = train_toy_decoder(&corpus, &e, &cfg).unwrap();
        let fresh = ToyDecoder::new(t.decoder.vocab.clone(), 3, cfg.hidden, 0, cfg.seed);
        assert_eq!(t.decoder.params, fresh.params);
        assert!(t.loss_history.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn distributions_are_normalized() {
        let v = Vocab::build(["x y z w"], &Tokenizer::default());
        let d = ToyDecoder::new(v, 5, 8, 4, 3);
        let e = unit_rows(1, 5, 4);
        for prev in 0..d.vocab().len() {
            let p = d.step_distribution(prev, e.row(0)).unwrap();
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn training_errors() {
        let e = unit_rows(1, 3, 5);
        assert_eq!(
            train_toy_decoder(&Corpus::default(), &DenseMatrix::zeros(0, 3), &config(0.1, 1))
                .unwrap_err(),
            Error::Empty("training corpus")
        );
        let c = Corpus::from_texts(["a"]).unwrap();
        let unnormalized = DenseMatrix::from_rows(&[[2.0, 0.0, 0.0]]).unwrap();
        assert!(train_toy_decoder(&c, &unnormalized, &config(0.1, 1)).is_err());
        let c2 = Corpus::from_texts(["a", "b"]).unwrap();
        assert!(train_toy_decoder(&c2, &e, &config(0.1, 1)).is_err());
        let huge = config(1e300, 3);
        assert!(matches!(
            train_toy_decoder(&c, &e, &huge),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn from_parts_checks_shapes() {
        let v = Vocab::build(["p q"], &Tokenizer::default());
        let d = ToyDecoder::new(v.clone(), 3, 4, 3, 1);
        let ok = ToyDecoder::from_parts(v.clone(), Tokenizer::default(), 3, 3, d.params.clone());
        assert_eq!(ok.unwrap(), d);
        let mut bad = d.params.clone();
        bad.output_bias = DenseMatrix::zeros(1, 2);
        assert!(ToyDecoder::from_parts(v, Tokenizer::default(), 3, 3, bad).is_err());
    }
}
