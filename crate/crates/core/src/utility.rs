//! Downstream-utility probe: a one-hidden-layer classifier trained on
//! (possibly defended) embeddings, reporting accuracy and macro-F1.
//!
//! Training runs a fixed number of epochs, evaluates dev accuracy after each
//! one and keeps the best checkpoint (first one wins ties).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::optim::AdamW;
use crate::rng::NoiseRng;
use crate::tensor::{dot, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    embeddings: DenseMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledEmbeddings {
    pub fn new(embeddings: DenseMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != embeddings.rows() {
            return Err(shape("LabeledEmbeddings::new", embeddings.rows(), labels.len()));
        }
        if num_classes == 0 {
            return Err(invalid("num_classes", "must be at least 1"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(invalid("labels", format!("label {bad} ≥ num_classes {num_classes}")));
        }
        Ok(Self {
            embeddings,
            labels,
            num_classes,
        })
    }

    pub fn embeddings(&self) -> &DenseMatrix<f64> {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    /// Same labels, different embeddings (e.g. after a defense).
    pub fn with_embeddings(&self, embeddings: DenseMatrix<f64>) -> Result<Self> {
        Self::new(embeddings, self.labels.clone(), self.num_classes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            lr: 1e-3,
            epochs: 6,
            batch: 32,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

/// `n → h` dense + tanh, `h → C` dense, softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    /// `h × n`
    pub w1: DenseMatrix<f64>,
    /// `1 × h`
    pub b1: DenseMatrix<f64>,
    /// `C × h`
    pub w2: DenseMatrix<f64>,
    /// `1 × C`
    pub b2: DenseMatrix<f64>,
    pub seed: u64,
}

impl MlpClassifier {
    pub fn new(input: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = NoiseRng::new(seed);
        let s1 = 1.0 / (input.max(1) as f64).sqrt();
        let s2 = 1.0 / (hidden.max(1) as f64).sqrt();
        Self {
            w1: DenseMatrix::from_fn(hidden, input, |_, _| s1 * rng.standard_normal()),
            b1: DenseMatrix::zeros(1, hidden),
            w2: DenseMatrix::from_fn(classes, hidden, |_, _| s2 * rng.standard_normal()),
            b2: DenseMatrix::zeros(1, classes),
            seed,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w1: DenseMatrix::zeros(self.w1.rows(), self.w1.cols()),
            b1: DenseMatrix::zeros(1, self.b1.cols()),
            w2: DenseMatrix::zeros(self.w2.rows(), self.w2.cols()),
            b2: DenseMatrix::zeros(1, self.b2.cols()),
            seed: self.seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.rows()
    }

    pub fn blocks(&self) -> [&DenseMatrix<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn blocks_mut(&mut self) -> [&mut DenseMatrix<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter_rows()
            .zip(self.b1.as_slice())
            .map(|(w, &b)| (dot(w, x) + b).tanh())
            .collect()
    }

    fn probs_from_hidden(&self, z: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = self
            .w2
            .iter_rows()
            .zip(self.b2.as_slice())
            .map(|(w, &b)| dot(w, z) + b)
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for l in &mut logits {
            *l = (*l - m).exp();
            s += *l;
        }
        logits.iter_mut().for_each(|l| *l /= s);
        logits
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.probs_from_hidden(&self.hidden(x))
    }

    /// Argmax class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.predict_proba(x);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }

    /// Mean cross-entropy over `(x, y)` pairs and its gradient.
    pub fn loss_and_gradients(&self, batch: &[(&[f64], usize)]) -> (f64, MlpClassifier) {
        let mut g = self.zeros_like();
        let mut total = 0.0;
        for &(x, y) in batch {
            let z = self.hidden(x);
            let p = self.probs_from_hidden(&z);
            total -= p[y].max(f64::MIN_POSITIVE).ln();
            let mut dz = vec![0.0; z.len()];
            for (c, &pc) in p.iter().enumerate() {
                let d = pc - if c == y { 1.0 } else { 0.0 };
                g.b2.as_mut_slice()[c] += d;
                let w = self.w2.row(c);
                for (j, gw) in g.w2.row_mut(c).iter_mut().enumerate() {
                    *gw += d * z[j];
                    dz[j] += d * w[j];
                }
            }
            for (j, &zj) in z.iter().enumerate() {
                let da = dz[j] * (1.0 - zj * zj);
                g.b1.as_mut_slice()[j] += da;
                for (gw, &xv) in g.w1.row_mut(j).iter_mut().zip(x) {
                    *gw += da * xv;
                }
            }
        }
        let n = batch.len().max(1) as f64;
        for b in g.blocks_mut() {
            b.as_mut_slice().iter_mut().for_each(|v| *v /= n);
        }
        (total / n, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    /// Best checkpoint by dev accuracy.
    pub model: MlpClassifier,
    pub best_epoch: usize,
    /// One record per evaluated checkpoint.
    pub history: Vec<EpochRecord>,
}

pub fn train_classifier(
    train: &LabeledEmbeddings,
    dev: &LabeledEmbeddings,
    config: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    if train.dim() != dev.dim() {
        return Err(shape("train_classifier", train.dim(), dev.dim()));
    }
    if train.num_classes() != dev.num_classes() {
        return Err(shape("train_classifier classes", train.num_classes(), dev.num_classes()));
    }
    if dev.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    if config.epochs == 0 || config.batch == 0 || config.hidden == 0 {
        return Err(invalid("config", "epochs, batch and hidden must be positive"));
    }
    let mut seen = vec![false; train.num_classes()];
    for &l in train.labels() {
        seen[l] = true;
    }
    if let Some(class) = seen.iter().position(|s| !s) {
        return Err(Error::MissingClass { class });
    }

    let mut model = MlpClassifier::new(train.dim(), config.hidden, train.num_classes(), config.seed);
    let sizes: Vec<usize> = model.blocks().iter().map(|b| b.as_slice().len()).collect();
    let mut opt = AdamW::new(&sizes, config.lr, config.weight_decay);
    let mut rng = NoiseRng::new(config.seed.wrapping_add(1));

    let mut best: Option<(f64, usize, MlpClassifier)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = rng.permutation(train.len());
        let mut total = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (train.embeddings().row(i), train.labels()[i]))
                .collect();
            let (loss, grads) = model.loss_and_gradients(&batch);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss * chunk.len() as f64;
            let gb = grads.blocks().map(|b| b.as_slice());
            let mut pb = model.blocks_mut().map(|b| b.as_mut_slice());
            opt.step(&mut pb, &gb);
        }
        let dev_acc = accuracy(&model, dev);
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            dev_acc,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| dev_acc > *acc) {
            best = Some((dev_acc, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainedClassifier {
        model,
        best_epoch,
        history,
    })
}

fn accuracy(model: &MlpClassifier, data: &LabeledEmbeddings) -> f64 {
    let correct = data
        .embeddings()
        .iter_rows()
        .zip(data.labels())
        .filter(|(x, &y)| model.predict(x) == y)
        .count();
    100.0 * correct as f64 / data.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Accuracy × 100.
    pub acc: f64,
    /// Macro F1 × 100 over classes present in the labels or the predictions.
    pub f1_macro: f64,
    pub per_class: Vec<ClassScore>,
}

/// Scores `predictions` against `labels`.
pub fn classification_report(
    labels: &[usize],
    predictions: &[usize],
    num_classes: usize,
) -> Result<ClassificationReport> {
    if labels.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if labels.len() != predictions.len() {
        return Err(shape("classification_report", labels.len(), predictions.len()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut predicted = vec![0usize; num_classes];
    let mut support = vec![0usize; num_classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        support[y] += 1;
        predicted[p] += 1;
        if y == p {
            tp[y] += 1;
        }
    }
    let correct: usize = tp.iter().sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<ClassScore> = (0..num_classes)
        .map(|c| {
            let precision = ratio(tp[c], predicted[c]);
            let recall = ratio(tp[c], support[c]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScore {
                class: c,
                precision: 100.0 * precision,
                recall: 100.0 * recall,
                f1: 100.0 * f1,
                support: support[c],
            }
        })
        .collect();
    let active: Vec<&ClassScore> = per_class
        .iter()
        .filter(|s| s.support > 0 || predicted[s.class] > 0)
        .collect();
    let f1_macro = active.iter().map(|s| s.f1).sum::<f64>() / active.len() as f64;
    Ok(ClassificationReport {
        acc: 100.0 * correct as f64 / labels.len() as f64,
        f1_macro,
        per_class,
    })
}

pub fn evaluate_classifier(
    model: &MlpClassifier,
    test: &LabeledEmbeddings,
) -> Result<ClassificationReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if test.dim() != model.input_dim() {
        return Err(shape("evaluate_classifier", model.input_dim(), test.dim()));
    }
    let predictions: Vec<usize> = test.embeddings().iter_rows().map(|x| model.predict(x)).collect();
    classification_report(test.labels(), &predictions, test.num_classes().max(model.num_classes()))
}
