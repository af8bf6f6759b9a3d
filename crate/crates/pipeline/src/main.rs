use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use embinv_core::alignment::{fit_alignment_with, AlignmentOptions};
use embinv_core::defense::{apply_defense, DefenseKind, DefenseSpec, LdpMechanism};
use embinv_core::generator::{train_toy_decoder, ToyDecoderConfig};
use embinv_core::metrics::{bleu_n, entity_f1, rouge_1, rouge_l, EntityLabel, Tokenizer};
use embinv_core::tensor::DenseMatrix;
use embinv_core::utility::{evaluate_classifier, train_classifier, ClassifierConfig, LabeledEmbeddings};
use embinv_pipeline::client::{fetch_embeddings, EmbeddingCache, EmbeddingServiceClient};
use embinv_pipeline::emb1::{self, Emb1Matrix};
use embinv_pipeline::error::{PipelineError, Result};
use embinv_pipeline::experiment::{
    density_csv, emit_density, run_attack, sweep, write_report, ExperimentConfig,
};
use embinv_pipeline::io::{ids_path, read_corpus, read_entities, read_json, read_labels, write_json};
use embinv_pipeline::manifest::record_outputs;
use embinv_pipeline::persist::{save_alignment, save_decoder};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "embinv", version, about = "Few-shot embedding inversion toolkit")]
struct Cli {
    /// Directory for all outputs (created if missing).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch embeddings for a corpus from an embeddings service.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        base_url: String,
        #[arg(long)]
        model: String,
        /// Output stem: writes <name>.emb1 and <name>.ids.json.
        #[arg(long, default_value = "embeddings")]
        name: String,
        /// Per-text cache directory (default: <output-dir>/cache).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 8)]
        max_in_flight: usize,
        #[arg(long, default_value_t = 3)]
        max_attempts: u32,
    },
    /// Fit the alignment map on the first b victim/attack pairs.
    Align {
        #[arg(long)]
        victim: PathBuf,
        #[arg(long)]
        attack: PathBuf,
        #[arg(short = 'b', long)]
        alignment_size: usize,
        #[arg(long, default_value_t = embinv_core::svd::DEFAULT_RCOND)]
        rcond: f64,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
    /// Apply a defense to every row of an embedding file.
    Defend {
        #[arg(long)]
        input: PathBuf,
        /// JSON defense spec; overrides the individual flags.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<DefenseKind>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, value_parser = parse_mechanism, default_value = "purmech")]
        mechanism: LdpMechanism,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "defended")]
        name: String,
    },
    /// Run the attack described by a JSON experiment config.
    Attack {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the attack for several alignment sizes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    /// Train the toy autoregressive decoder on a corpus and its attack embeddings.
    TrainDecoder {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// JSON training config; flags below override single fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "decoder.bin")]
        name: String,
    },
    /// Train and evaluate the downstream classifier.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        dev_labels: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        test_labels: PathBuf,
        /// Defense applied to all three splits before training.
        #[arg(long)]
        defense: Option<PathBuf>,
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long, default_value_t = 256)]
        hidden: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 6)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score reconstructions against references (matched by id).
    Score {
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        reference_entities: Option<PathBuf>,
        #[arg(long)]
        candidate_entities: Option<PathBuf>,
        /// Restrict entity F1 to one label.
        #[arg(long)]
        entity_label: Option<String>,
    },
    /// Histogram of the entries of a matrix, e.g. a fitted W.
    Density {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
}

fn parse_kind(s: &str) -> std::result::Result<DefenseKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_mechanism(s: &str) -> std::result::Result<LdpMechanism, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn out_dir(cli_dir: &Option<PathBuf>, fallback: &Path) -> Result<PathBuf> {
    let dir = cli_dir.clone().unwrap_or_else(|| fallback.to_path_buf());
    let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
    fs::create_dir_all(&dir).map_err(|e| PipelineError::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn write_text(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn copy_ids(from: &Path, to: &Path) -> Result<Option<PathBuf>> {
    let src = ids_path(from);
    if !src.exists() {
        return Ok(None);
    }
    let dst = ids_path(to);
    fs::copy(&src, &dst).map_err(|e| PipelineError::Io {
        path: dst.clone(),
        source: e,
    })?;
    Ok(Some(dst))
}

fn load_labeled(emb: &Path, labels: &Path, num_classes: usize) -> Result<LabeledEmbeddings> {
    let x = emb1::read_f64(emb)?;
    let records = read_labels(labels)?;
    if records.len() != x.rows() {
        return Err(PipelineError::DimMismatch {
            what: format!("labels in {}", labels.display()),
            expected: x.rows(),
            found: records.len(),
        });
    }
    let sidecar = ids_path(emb);
    if sidecar.exists() {
        let ids: Vec<String> = read_json(&sidecar)?;
        for (row, (id, rec)) in ids.iter().zip(&records).enumerate() {
            if *id != rec.id {
                return Err(PipelineError::IdMismatch {
                    row,
                    expected: id.clone(),
                    found: rec.id.clone(),
                });
            }
        }
    }
    let labels = records.into_iter().map(|r| r.label).collect();
    LabeledEmbeddings::new(x, labels, num_classes).map_err(|e| PipelineError::Data(e.to_string()))
}

#[derive(Serialize)]
struct ScoreRow {
    id: String,
    rouge_l: f64,
    rouge_1: f64,
    bleu_1: f64,
    bleu_2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entity_f1: Option<f64>,
}

#[derive(Serialize)]
struct ScoreReport {
    per_sample: Vec<ScoreRow>,
    mean: ScoreMeans,
}

#[derive(Serialize)]
struct ScoreMeans {
    samples: usize,
    rouge_l: f64,
    rouge_1: f64,
    bleu_1: f64,
    bleu_2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entity_f1: Option<f64>,
}

fn run(cli: Cli) -> Result<()> {
    let here = PathBuf::from(".");
    match cli.command {
        Command::Embed {
            corpus,
            base_url,
            model,
            name,
            cache_dir,
            batch_size,
            max_in_flight,
            max_attempts,
        } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let corpus = read_corpus(&corpus)?;
            let mut client = EmbeddingServiceClient::from_env(base_url, model);
            client.batch_size = batch_size;
            client.max_in_flight = max_in_flight;
            client.retry.max_attempts = max_attempts;
            let cache = EmbeddingCache::new(cache_dir.unwrap_or_else(|| dir.join("cache")))?;
            let m = fetch_embeddings(&client, &corpus, Some(&cache))?;
            log::info!("{} embeddings fetched with {} request(s)", m.rows(), client.request_count());
            let emb = dir.join(format!("{name}.emb1"));
            emb1::write_f32(&emb, &m.cast())?;
            let ids: Vec<&str> = corpus.records().iter().map(|r| r.id.as_str()).collect();
            write_json(&ids_path(&emb), &ids)?;
            record_outputs(&dir, "embed", &[emb.clone(), ids_path(&emb)])?;
        }
        Command::Align {
            victim,
            attack,
            alignment_size,
            rcond,
            ridge,
        } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let v = emb1::read_f64(&victim)?;
            let a = emb1::read_f64(&attack)?;
            if v.rows() != a.rows() {
                return Err(PipelineError::DimMismatch {
                    what: "victim vs attack rows".into(),
                    expected: v.rows(),
                    found: a.rows(),
                });
            }
            if alignment_size == 0 || alignment_size > v.rows() {
                return Err(PipelineError::Config(format!(
                    "-b must lie in 1..={}",
                    v.rows()
                )));
            }
            let options = AlignmentOptions { rcond, ridge };
            let map = fit_alignment_with(
                &v.slice_rows(0, alignment_size),
                &a.slice_rows(0, alignment_size),
                options,
            )?;
            let out = dir.join("alignment.emb1");
            save_alignment(&out, &map)?;
            println!("{}", serde_json::to_string_pretty(&map.diagnostics()).expect("serializable"));
            record_outputs(&dir, "align", &[out.clone(), out.with_extension("json")])?;
        }
        Command::Defend {
            input,
            spec,
            kind,
            lambda,
            epsilon,
            mechanism,
            seed,
            name,
        } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let spec: DefenseSpec = match (spec, kind) {
                (Some(path), _) => read_json(&path).map_err(|e| PipelineError::Config(e.to_string()))?,
                (None, Some(kind)) => DefenseSpec {
                    kind,
                    lambda,
                    epsilon,
                    mechanism,
                    seed,
                },
                (None, None) => {
                    return Err(PipelineError::Config("either --spec or --kind is required".into()))
                }
            };
            spec.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
            let out = dir.join(format!("{name}.emb1"));
            let defended = match emb1::read(&input)? {
                Emb1Matrix::F32(m) => Emb1Matrix::F32(apply_defense(&spec, &m)?),
                Emb1Matrix::F64(m) => Emb1Matrix::F64(apply_defense(&spec, &m)?),
            };
            emb1::write(&out, &defended)?;
            let mut files = vec![out.clone()];
            files.extend(copy_ids(&input, &out)?);
            record_outputs(&dir, "defend", &files)?;
        }
        Command::Attack { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir(&cli.output_dir, &cfg.output_dir)?;
            let report = run_attack(&cfg)?;
            print!("{}", report.to_table().lines().take(3).collect::<Vec<_>>().join("\n"));
            println!();
            let files = write_report(&dir, &report)?;
            record_outputs(&dir, "attack", &files)?;
        }
        Command::Sweep { config, b } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir(&cli.output_dir, &cfg.output_dir)?;
            let result = sweep(&cfg, &b)?;
            let csv = dir.join("sweep.csv");
            write_text(&csv, &result.to_csv())?;
            let mut files = vec![csv];
            for r in &result.reports {
                let sub = dir.join(format!("b{}", r.alignment_size));
                files.extend(write_report(&sub, r)?);
            }
            print!("{}", result.to_csv());
            record_outputs(&dir, "sweep", &files)?;
        }
        Command::TrainDecoder {
            corpus,
            embeddings,
            config,
            epochs,
            lr,
            hidden,
            seed,
            name,
        } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let mut cfg: ToyDecoderConfig = match config {
                Some(p) => read_json(&p).map_err(|e| PipelineError::Config(e.to_string()))?,
                None => ToyDecoderConfig::default(),
            };
            if let Some(v) = epochs {
                cfg.epochs = v;
            }
            if let Some(v) = lr {
                cfg.lr = v;
            }
            if let Some(v) = hidden {
                cfg.hidden = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let corpus = read_corpus(&corpus)?;
            embinv_pipeline::io::check_ids(&embeddings, &corpus)?;
            let e = emb1::read_f64(&embeddings)?;
            let trained = train_toy_decoder(&corpus, &e, &cfg)?;
            let out = dir.join(&name);
            save_decoder(&out, &trained.decoder, serde_json::to_value(cfg).ok())?;
            let loss = dir.join("decoder_loss.csv");
            let mut csv = String::from("epoch,loss\n");
            for (i, l) in trained.loss_history.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            write_text(&loss, &csv)?;
            if let Some(last) = trained.loss_history.last() {
                println!("final loss {last:.6}");
            }
            record_outputs(&dir, "train-decoder", &[out, loss])?;
        }
        Command::Classify {
            train,
            train_labels,
            dev,
            dev_labels,
            test,
            test_labels,
            defense,
            num_classes,
            hidden,
            lr,
            epochs,
            batch,
            seed,
        } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let classes = match num_classes {
                Some(c) => c,
                None => read_labels(&train_labels)?
                    .iter()
                    .map(|r| r.label + 1)
                    .max()
                    .unwrap_or(0),
            };
            let mut sets = [
                load_labeled(&train, &train_labels, classes)?,
                load_labeled(&dev, &dev_labels, classes)?,
                load_labeled(&test, &test_labels, classes)?,
            ];
            if let Some(p) = defense {
                let spec: DefenseSpec = read_json(&p).map_err(|e| PipelineError::Config(e.to_string()))?;
                for (k, set) in sets.iter_mut().enumerate() {
                    // Separate noise streams per split; keyed transforms share one key.
                    let s = if spec.is_keyed() { spec } else { spec.reseeded(k as u64 * 1_000_003) };
                    let d = apply_defense(&s, set.embeddings())?;
                    *set = set.with_embeddings(d)?;
                }
            }
            let cfg = ClassifierConfig {
                hidden,
                lr,
                epochs,
                batch,
                weight_decay: 0.0,
                seed,
            };
            let trained = train_classifier(&sets[0], &sets[1], &cfg)?;
            let report = evaluate_classifier(&trained.model, &sets[2])?;
            println!("ACC {:.2}  F1 {:.2}  (best epoch {})", report.acc, report.f1_macro, trained.best_epoch);
            let out = dir.join("classification.json");
            write_json(
                &out,
                &serde_json::json!({
                    "config": cfg,
                    "best_epoch": trained.best_epoch,
                    "history": trained.history,
                    "test": report,
                }),
            )?;
            record_outputs(&dir, "classify", &[out])?;
        }
        Command::Score {
            references,
            candidates,
            reference_entities,
            candidate_entities,
            entity_label,
        } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let refs = read_corpus(&references)?;
            let cands = read_corpus(&candidates)?;
            let by_id: std::collections::HashMap<&str, &str> = cands
                .records()
                .iter()
                .map(|r| (r.id.as_str(), r.text.as_str()))
                .collect();
            let entities = match (reference_entities, candidate_entities) {
                (Some(r), Some(c)) => Some((read_entities(&r)?, read_entities(&c)?)),
                (None, None) => None,
                _ => {
                    return Err(PipelineError::Config(
                        "entity scoring needs both --reference-entities and --candidate-entities".into(),
                    ))
                }
            };
            let label: Option<EntityLabel> = entity_label.map(|l| {
                serde_json::from_value(serde_json::Value::String(l)).expect("labels parse from any string")
            });
            let tok = Tokenizer::default();
            let mut rows = Vec::with_capacity(refs.len());
            for r in refs.records() {
                let cand = by_id.get(r.id.as_str()).ok_or_else(|| {
                    PipelineError::Data(format!("no candidate for id `{}`", r.id))
                })?;
                let (a, b) = (tok.tokenize(&r.text), tok.tokenize(cand));
                let entity = entities.as_ref().map(|(re, ce)| {
                    let empty = Vec::new();
                    entity_f1(
                        re.get(&r.id).unwrap_or(&empty),
                        ce.get(&r.id).unwrap_or(&empty),
                        label.as_ref(),
                    )
                });
                rows.push(ScoreRow {
                    id: r.id.clone(),
                    rouge_l: rouge_l(&a, &b),
                    rouge_1: rouge_1(&a, &b),
                    bleu_1: bleu_n(&a, &b, 1),
                    bleu_2: bleu_n(&a, &b, 2),
                    entity_f1: entity,
                });
            }
            let n = rows.len().max(1) as f64;
            let mean = |f: fn(&ScoreRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            let means = ScoreMeans {
                samples: rows.len(),
                rouge_l: mean(|r| r.rouge_l),
                rouge_1: mean(|r| r.rouge_1),
                bleu_1: mean(|r| r.bleu_1),
                bleu_2: mean(|r| r.bleu_2),
                entity_f1: entities
                    .as_ref()
                    .map(|_| rows.iter().filter_map(|r| r.entity_f1).sum::<f64>() / n),
            };
            println!(
                "BLEU1 {:.2}  BLEU2 {:.2}  Rouge-L {:.2}  Rouge1 {:.2}",
                means.bleu_1, means.bleu_2, means.rouge_l, means.rouge_1
            );
            let out = dir.join("scores.json");
            write_json(&out, &ScoreReport { per_sample: rows, mean: means })?;
            record_outputs(&dir, "score", &[out])?;
        }
        Command::Density { input, bins } => {
            let dir = out_dir(&cli.output_dir, &here)?;
            let m: DenseMatrix<f64> = emb1::read_f64(&input)?;
            let hist = emit_density(&m, bins)?;
            let out = dir.join("density.csv");
            write_text(&out, &density_csv(&hist))?;
            record_outputs(&dir, "density", &[out])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
