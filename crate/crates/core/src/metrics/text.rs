use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Word-level tokenizer shared by the metrics and the toy decoder.
///
/// Splits on Unicode whitespace, then optionally lowercases and trims
/// leading/trailing punctuation from each word. Words that end up empty are
/// dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '–' | '—' | '¿' | '¡' | '·' | '„' | '‚'
        )
}

impl Tokenizer {
    /// Splits on whitespace only.
    pub fn raw() -> Self {
        Self {
            lowercase: false,
            strip_punctuation: false,
        }
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let tokens = text
            .split_whitespace()
            .filter_map(|w| {
                let w = if self.strip_punctuation {
                    w.trim_matches(is_punct)
                } else {
                    w
                };
                if w.is_empty() {
                    None
                } else if self.lowercase {
                    Some(w.to_lowercase())
                } else {
                    Some(w.to_string())
                }
            })
            .collect();
        TokenSequence(tokens)
    }
}

/// Ordered, non-empty tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Wraps pre-split tokens, dropping empty strings.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    fn ngram_counts(&self, n: usize) -> HashMap<&[String], usize> {
        let mut counts = HashMap::new();
        if n > 0 && self.0.len() >= n {
            for g in self.0.windows(n) {
                *counts.entry(g).or_insert(0) += 1;
            }
        }
        counts
    }
}

const ROUGE_L_BETA: f64 = 1.2;

/// Longest common subsequence length.
pub fn lcs_len(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (a, b) = (a.tokens(), b.tokens());
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Clipped unigram overlap count.
pub fn unigram_overlap(reference: &TokenSequence, candidate: &TokenSequence) -> usize {
    clipped_matches(reference, candidate, 1)
}

fn clipped_matches(reference: &TokenSequence, candidate: &TokenSequence, n: usize) -> usize {
    let r = reference.ngram_counts(n);
    candidate
        .ngram_counts(n)
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum()
}

fn f_measure(p: f64, r: f64, beta: f64) -> f64 {
    if p == 0.0 || r == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// ROUGE-L F-measure (β = 1.2) scaled to `[0, 100]`.
pub fn rouge_l(reference: &TokenSequence, candidate: &TokenSequence) -> f64 {
    if reference.is_empty() || candidate.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(reference, candidate) as f64;
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    100.0 * f_measure(p, r, ROUGE_L_BETA)
}

/// ROUGE-1 F1 with clipped unigram counts, scaled to `[0, 100]`.
pub fn rouge_1(reference: &TokenSequence, candidate: &TokenSequence) -> f64 {
    if reference.is_empty() || candidate.is_empty() {
        return 0.0;
    }
    let overlap = unigram_overlap(reference, candidate) as f64;
    let p = overlap / candidate.len() as f64;
    let r = overlap / reference.len() as f64;
    100.0 * f_measure(p, r, 1.0)
}

/// Sentence-level BLEU over orders `1..=n`, unsmoothed, scaled to `[0, 100]`.
///
/// Uses modified (clipped) n-gram precision, a uniform geometric mean and the
/// brevity penalty `exp(1 − r/c)` when the candidate is shorter than the
/// reference. Any zero precision, or a candidate shorter than `n`, gives 0.
/// `n == 0` also gives 0.
pub fn bleu_n(reference: &TokenSequence, candidate: &TokenSequence, n: usize) -> f64 {
    if n == 0 || candidate.len() < n {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for order in 1..=n {
        let total = candidate.len() + 1 - order;
        let matched = clipped_matches(reference, candidate, order);
        if matched == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    100.0 * bp * (log_sum / n as f64).exp()
}
