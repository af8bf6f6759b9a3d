//! End-to-end attack runs: align leaked victim embeddings into the attack
//! space, decode, score.
//!
//! Rows of the victim file, the attack file and the corpus refer to the same
//! records in the same order. The corpus is laid out as
//! `[alignment pool | evaluation | rest]`; alignment pairs come from the pool
//! and the evaluation rows never overlap it.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use embinv_core::alignment::{apply_alignment, fit_alignment, AlignmentDiagnostics};
use embinv_core::defense::{apply_defense, DefenseSpec};
use embinv_core::generator::{Corpus, Decoder, NearestNeighborDecoder};
use embinv_core::metrics::{bleu_n, cosine_slices, rouge_1, rouge_l, Tokenizer};
use embinv_core::rng::NoiseRng;
use embinv_core::tensor::{norm, DenseMatrix};
use serde::{Deserialize, Serialize};

use crate::emb1;
use crate::error::{PipelineError, Result};
use crate::io::{check_ids, read_corpus, write_json};
use crate::persist::load_decoder;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecoderChoice {
    /// Retrieve the closest corpus sentence in the attack space.
    #[default]
    Nn,
    /// A trained toy decoder file.
    Toy { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RougeL,
    Rouge1,
    Bleu1,
    Bleu2,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::RougeL,
        Metric::Rouge1,
        Metric::Bleu1,
        Metric::Bleu2,
        Metric::Cosine,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSelection {
    /// The first `b` rows of the pool.
    #[default]
    First,
    /// `b` rows of the pool drawn without replacement using the run seed.
    Random,
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_max_tokens() -> usize {
    32
}

fn default_rcond() -> f64 {
    embinv_core::svd::DEFAULT_RCOND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub victim_embeddings: PathBuf,
    pub attack_embeddings: PathBuf,
    pub corpus: PathBuf,
    /// Number of alignment pairs `b`.
    pub alignment_size: usize,
    #[serde(default)]
    pub defense: Option<DefenseSpec>,
    #[serde(default)]
    pub decoder: DecoderChoice,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: PathBuf,
    /// Size of the alignment pool; defaults to 1000/151200 of the corpus.
    #[serde(default)]
    pub align_pool: Option<usize>,
    /// Evaluation rows after the pool; defaults to 200/151200 of the corpus.
    #[serde(default)]
    pub eval_size: Option<usize>,
    #[serde(default)]
    pub pair_selection: PairSelection,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default = "default_rcond")]
    pub rcond: f64,
}

impl ExperimentConfig {
    /// Minimal config with defaults for everything optional.
    pub fn new(victim: impl Into<PathBuf>, attack: impl Into<PathBuf>, corpus: impl Into<PathBuf>, b: usize) -> Self {
        Self {
            victim_embeddings: victim.into(),
            attack_embeddings: attack.into(),
            corpus: corpus.into(),
            alignment_size: b,
            defense: None,
            decoder: DecoderChoice::Nn,
            metrics: default_metrics(),
            seeds: default_seeds(),
            output_dir: PathBuf::new(),
            align_pool: None,
            eval_size: None,
            pair_selection: PairSelection::First,
            max_tokens: default_max_tokens(),
            rcond: default_rcond(),
        }
    }

    /// Parses a JSON config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.victim_embeddings);
        resolve(&mut cfg.attack_embeddings);
        resolve(&mut cfg.corpus);
        resolve(&mut cfg.output_dir);
        if let DecoderChoice::Toy { path } = &mut cfg.decoder {
            resolve(path);
        }
        cfg.validate()?;
        for p in [&cfg.victim_embeddings, &cfg.attack_embeddings, &cfg.corpus] {
            if !p.exists() {
                return Err(PipelineError::MissingFile(p.clone()));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.alignment_size == 0 {
            return bad("alignment_size must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.metrics.is_empty() {
            return bad("metrics must not be empty");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return bad("rcond must lie in (0, 1)");
        }
        if let Some(d) = &self.defense {
            d.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

/// Loaded, shape-checked inputs of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub corpus: Corpus,
    pub victim: DenseMatrix<f64>,
    pub attack: DenseMatrix<f64>,
}

impl ExperimentData {
    pub fn new(corpus: Corpus, victim: DenseMatrix<f64>, attack: DenseMatrix<f64>) -> Result<Self> {
        for (what, m) in [("victim embeddings", &victim), ("attack embeddings", &attack)] {
            if m.rows() != corpus.len() {
                return Err(PipelineError::DimMismatch {
                    what: format!("{what} rows vs corpus"),
                    expected: corpus.len(),
                    found: m.rows(),
                });
            }
            if !m.is_finite() {
                return Err(PipelineError::Data(format!("{what} contain non-finite values")));
            }
        }
        Ok(Self {
            corpus,
            victim,
            attack,
        })
    }

    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let corpus = read_corpus(&cfg.corpus)?;
        let victim = emb1::read_f64(&cfg.victim_embeddings)?;
        let attack = emb1::read_f64(&cfg.attack_embeddings)?;
        check_ids(&cfg.victim_embeddings, &corpus)?;
        check_ids(&cfg.attack_embeddings, &corpus)?;
        Self::new(corpus, victim, attack)
    }
}

/// Row ranges of the alignment pool and the evaluation set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub align_pool: Range<usize>,
    pub eval: Range<usize>,
}

const REFERENCE_TRAIN: f64 = 150_000.0;
const REFERENCE_ALIGN: f64 = 1_000.0;
const REFERENCE_EVAL: f64 = 200.0;

pub fn split(n: usize, align_pool: Option<usize>, eval_size: Option<usize>) -> Result<Split> {
    let total = REFERENCE_TRAIN + REFERENCE_ALIGN + REFERENCE_EVAL;
    let scaled = |share: f64| ((n as f64 * share / total).round() as usize).max(1);
    let pool = align_pool.unwrap_or_else(|| scaled(REFERENCE_ALIGN));
    let eval = eval_size.unwrap_or_else(|| scaled(REFERENCE_EVAL));
    if pool == 0 || eval == 0 || pool + eval > n {
        return Err(PipelineError::Config(format!(
            "cannot carve an alignment pool of {pool} and {eval} evaluation rows from {n} records"
        )));
    }
    Ok(Split {
        align_pool: 0..pool,
        eval: pool..pool + eval,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub seed: u64,
    pub id: String,
    pub reference: String,
    pub reconstruction: String,
    pub rouge_l: Option<f64>,
    pub rouge_1: Option<f64>,
    pub bleu_1: Option<f64>,
    pub bleu_2: Option<f64>,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub samples: usize,
    pub rouge_l: Option<f64>,
    pub rouge_1: Option<f64>,
    pub bleu_1: Option<f64>,
    pub bleu_2: Option<f64>,
    pub cosine: Option<f64>,
}

impl Aggregate {
    pub fn from_samples(samples: &[SampleResult]) -> Self {
        let mean = |f: fn(&SampleResult) -> Option<f64>| {
            let v: Vec<f64> = samples.iter().filter_map(f).collect();
            (!v.is_empty() && v.len() == samples.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        Self {
            samples: samples.len(),
            rouge_l: mean(|s| s.rouge_l),
            rouge_1: mean(|s| s.rouge_1),
            bleu_1: mean(|s| s.bleu_1),
            bleu_2: mean(|s| s.bleu_2),
            cosine: mean(|s| s.cosine),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub alignment_size: usize,
    pub split: Split,
    /// One entry per seed, in seed order.
    pub alignment: Vec<AlignmentDiagnostics>,
    pub per_sample: Vec<SampleResult>,
    pub aggregate: Aggregate,
    pub config_echo: ExperimentConfig,
    pub wall_time_secs: f64,
}

impl AttackReport {
    /// Aggregates restricted to one seed's rows.
    pub fn aggregate_for_seed(&self, seed: u64) -> Aggregate {
        let rows: Vec<SampleResult> = self
            .per_sample
            .iter()
            .filter(|s| s.seed == seed)
            .cloned()
            .collect();
        Aggregate::from_samples(&rows)
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |x| format!("{x:.digits$}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "b={}  seeds={:?}  samples={}  defense={}",
            self.alignment_size,
            self.config_echo.seeds,
            self.aggregate.samples,
            self.config_echo
                .defense
                .as_ref()
                .map_or("none".to_string(), |d| format!("{:?}", d.kind).to_lowercase())
        );
        let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8}", "", "BLEU1", "BLEU2", "Rouge-L", "Rouge1", "COS");
        let a = &self.aggregate;
        let _ = writeln!(
            s,
            "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "mean",
            fmt(a.bleu_1, 2),
            fmt(a.bleu_2, 2),
            fmt(a.rouge_l, 2),
            fmt(a.rouge_1, 2),
            fmt(a.cosine, 4)
        );
        let _ = writeln!(s);
        for r in &self.per_sample {
            let _ = writeln!(
                s,
                "[seed {} | {}] rouge-l {} cos {}\n  ref: {}\n  rec: {}",
                r.seed,
                r.id,
                fmt(r.rouge_l, 2),
                fmt(r.cosine, 4),
                r.reference,
                r.reconstruction
            );
        }
        s
    }
}

fn build_decoder(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<Box<dyn Decoder + Sync>> {
    match &cfg.decoder {
        DecoderChoice::Nn => Ok(Box::new(NearestNeighborDecoder::new(
            data.corpus.clone(),
            data.attack.clone(),
        )?)),
        DecoderChoice::Toy { path } => {
            let dec = load_decoder(path)?;
            if dec.embed_dim() != data.attack.cols() {
                return Err(PipelineError::DimMismatch {
                    what: "toy decoder input vs attack embeddings".into(),
                    expected: data.attack.cols(),
                    found: dec.embed_dim(),
                });
            }
            Ok(Box::new(dec))
        }
    }
}

struct SeedRun {
    diagnostics: AlignmentDiagnostics,
    samples: Vec<SampleResult>,
}

fn run_seed(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    split: &Split,
    b: usize,
    seed: u64,
    decoder: &(dyn Decoder + Sync),
) -> Result<SeedRun> {
    let pool: Vec<usize> = split.align_pool.clone().collect();
    let pairs: Vec<usize> = match cfg.pair_selection {
        PairSelection::First => pool[..b].to_vec(),
        PairSelection::Random => {
            let perm = NoiseRng::new(seed).permutation(pool.len());
            perm[..b].iter().map(|&i| pool[i]).collect()
        }
    };
    // The defender transforms every embedding it releases, so pairs and
    // targets are defended alike.
    let victim = match &cfg.defense {
        Some(spec) => apply_defense(&spec.reseeded(seed), &data.victim)?,
        None => data.victim.clone(),
    };
    let map = fit_alignment(&victim.select_rows(&pairs), &data.attack.select_rows(&pairs), cfg.rcond)?;
    let eval: Vec<usize> = split.eval.clone().collect();
    let aligned = apply_alignment(&map, &victim.select_rows(&eval))?;

    let tok = Tokenizer::default();
    let mut samples = Vec::with_capacity(eval.len());
    for (k, &i) in eval.iter().enumerate() {
        let record = &data.corpus.records()[i];
        let q = aligned.row(k);
        let qn = norm(q);
        let reconstruction = if qn == 0.0 {
            log::warn!("aligned embedding of `{}` is zero; leaving reconstruction empty", record.id);
            String::new()
        } else {
            let unit: Vec<f64> = q.iter().map(|x| x / qn).collect();
            decoder.decode(&unit, cfg.max_tokens)?
        };
        let r = tok.tokenize(&record.text);
        let c = tok.tokenize(&reconstruction);
        let pick = |m: Metric, f: &dyn Fn() -> f64| cfg.wants(m).then(f);
        samples.push(SampleResult {
            seed,
            id: record.id.clone(),
            reference: record.text.clone(),
            reconstruction: reconstruction.clone(),
            rouge_l: pick(Metric::RougeL, &|| rouge_l(&r, &c)),
            rouge_1: pick(Metric::Rouge1, &|| rouge_1(&r, &c)),
            bleu_1: pick(Metric::Bleu1, &|| bleu_n(&r, &c, 1)),
            bleu_2: pick(Metric::Bleu2, &|| bleu_n(&r, &c, 2)),
            cosine: pick(Metric::Cosine, &|| cosine_slices(q, data.attack.row(i)).unwrap_or(0.0)),
        });
    }
    Ok(SeedRun {
        diagnostics: map.diagnostics(),
        samples,
    })
}

fn run_with(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    decoder: &(dyn Decoder + Sync),
    b: usize,
) -> Result<AttackReport> {
    let start = Instant::now();
    let split = split(data.corpus.len(), cfg.align_pool, cfg.eval_size)?;
    if b == 0 || b > split.align_pool.len() {
        return Err(PipelineError::Config(format!(
            "alignment_size {b} must lie in 1..={}",
            split.align_pool.len()
        )));
    }
    if data.victim.rows() == 0 {
        return Err(PipelineError::Data("empty corpus".into()));
    }
    let mut alignment = Vec::with_capacity(cfg.seeds.len());
    let mut per_sample = Vec::new();
    for &seed in &cfg.seeds {
        let run = run_seed(cfg, data, &split, b, seed, decoder)?;
        alignment.push(run.diagnostics);
        per_sample.extend(run.samples);
    }
    let aggregate = Aggregate::from_samples(&per_sample);
    let mut config_echo = cfg.clone();
    config_echo.alignment_size = b;
    Ok(AttackReport {
        alignment_size: b,
        split,
        alignment,
        per_sample,
        aggregate,
        config_echo,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs the attack on already-loaded data.
pub fn run_attack_on(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<AttackReport> {
    cfg.validate()?;
    let decoder = build_decoder(cfg, data)?;
    run_with(cfg, data, decoder.as_ref(), cfg.alignment_size)
}

/// Loads the configured files and runs the attack for every seed.
pub fn run_attack(cfg: &ExperimentConfig) -> Result<AttackReport> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    run_attack_on(cfg, &data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b: usize,
    pub seed: u64,
    pub rouge_l: Option<f64>,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub b_values: Vec<usize>,
    pub reports: Vec<AttackReport>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let mut s = String::from("b,seed,rouge_l,cosine\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.b, r.seed, cell(r.rouge_l), cell(r.cosine));
        }
        s
    }
}

/// Keeps the first occurrence of each value.
pub fn dedup_b_values(b_values: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(b_values.len());
    for &b in b_values {
        if out.contains(&b) {
            log::warn!("duplicate alignment size {b} in sweep ignored");
        } else {
            out.push(b);
        }
    }
    out
}

/// One attack per `b` (all seeds each), run in parallel across `b`.
pub fn sweep_on(cfg: &ExperimentConfig, data: &ExperimentData, b_values: &[usize]) -> Result<SweepResult> {
    cfg.validate()?;
    let b_values = dedup_b_values(b_values);
    if b_values.is_empty() {
        return Err(PipelineError::Config("no alignment sizes to sweep".into()));
    }
    let pool = split(data.corpus.len(), cfg.align_pool, cfg.eval_size)?.align_pool.len();
    if let Some(&b) = b_values.iter().find(|&&b| b == 0 || b > pool) {
        return Err(PipelineError::Config(format!(
            "sweep value {b} outside 1..={pool} (alignment pool size)"
        )));
    }
    let decoder = build_decoder(cfg, data)?;
    let decoder = decoder.as_ref();
    let results: Vec<Result<AttackReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = b_values
            .iter()
            .map(|&b| s.spawn(move || run_with(cfg, data, decoder, b)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for r in &reports {
        for &seed in &cfg.seeds {
            let a = r.aggregate_for_seed(seed);
            rows.push(SweepRow {
                b: r.alignment_size,
                seed,
                rouge_l: a.rouge_l,
                cosine: a.cosine,
            });
        }
    }
    Ok(SweepResult {
        b_values,
        reports,
        rows,
    })
}

pub fn sweep(cfg: &ExperimentConfig, b_values: &[usize]) -> Result<SweepResult> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    sweep_on(cfg, &data, b_values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `count / (total · width)`, so the bars integrate to 1.
    pub density: f64,
}

/// Equal-width histogram of every entry of `m`. A constant matrix gets a
/// unit-wide range centred on its value.
pub fn emit_density(m: &DenseMatrix<f64>, bins: usize) -> Result<Vec<DensityBin>> {
    if bins == 0 {
        return Err(PipelineError::Config("bins must be at least 1".into()));
    }
    let values = m.as_slice();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PipelineError::Data("matrix has non-finite entries".into()));
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if values.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = values.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| DensityBin {
            lo: lo + k as f64 * width,
            hi: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
            count,
            density: count as f64 / (total * width),
        })
        .collect())
}

pub fn density_csv(bins: &[DensityBin]) -> String {
    let mut s = String::from("bin_lo,bin_hi,count,density\n");
    for b in bins {
        let _ = writeln!(s, "{},{},{},{}", b.lo, b.hi, b.count, b.density);
    }
    s
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(dir: &Path, report: &AttackReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let json = dir.join("report.json");
    let txt = dir.join("report.txt");
    write_json(&json, report)?;
    fs::write(&txt, report.to_table()).map_err(|e| PipelineError::io(&txt, e))?;
    Ok(vec![json, txt])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_defaults_and_overrides() {
        let s = split(151_200, None, None).unwrap();
        assert_eq!(s.align_pool, 0..1000);
        assert_eq!(s.eval, 1000..1200);
        let s = split(50, Some(30), Some(10)).unwrap();
        assert_eq!((s.align_pool, s.eval), (0..30, 30..40));
        assert!(split(10, Some(8), Some(3)).is_err());
    }

    #[test]
    fn density_examples() {
        let c = DenseMatrix::from_vec(2, 2, vec![3.0; 4]).unwrap();
        let bins = emit_density(&c, 5).unwrap();
        assert_eq!(bins.iter().filter(|b| b.count > 0).count(), 1);
        let one = emit_density(&DenseMatrix::from_rows(&[[1.0, -2.0, 5.0]]).unwrap(), 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].count, 3);
        assert!(emit_density(&c, 0).is_err());
    }

    #[test]
    fn dedup_keeps_order() {
        assert_eq!(dedup_b_values(&[4, 1, 4, 16, 1]), vec![4, 1, 16]);
    }

    #[test]
    fn config_defaults_from_json() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"victim_embeddings":"v.emb1","attack_embeddings":"a.emb1","corpus":"c.jsonl","alignment_size":4}"#,
        )
        .unwrap();
        assert_eq!(cfg.decoder, DecoderChoice::Nn);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.metrics.len(), 5);
        let mut zero = cfg.clone();
        zero.alignment_size = 0;
        assert_eq!(zero.validate().unwrap_err().exit_code(), 2);
    }
}
