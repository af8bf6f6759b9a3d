#![allow(dead_code)]

use std::path::{Path, PathBuf};

use embinv_core::generator::Corpus;
use embinv_core::synthetic::{random_orthogonal, random_unit_rows, rotated_scaled, sentences};
use embinv_core::tensor::DenseMatrix;
use embinv_pipeline::emb1;
use embinv_pipeline::experiment::ExperimentConfig;
use embinv_pipeline::io::{ids_path, write_corpus, write_json};

pub struct Synthetic {
    pub corpus: Corpus,
    pub attack: DenseMatrix<f64>,
    pub victim: DenseMatrix<f64>,
}

/// Attack space of random unit rows; victim space `E_A · Q · D`.
pub fn rotation_setup(rows: usize, dim: usize, seed: u64) -> Synthetic {
    let attack = random_unit_rows(rows, dim, seed);
    let q = random_orthogonal(dim, seed + 1);
    let scales: Vec<f64> = (0..dim).map(|j| 0.5 + 1.5 * j as f64 / dim as f64).collect();
    let victim = rotated_scaled(&attack, &q, &scales).unwrap();
    let corpus = Corpus::from_texts(sentences(rows, seed)).unwrap();
    Synthetic {
        corpus,
        attack,
        victim,
    }
}

/// Writes corpus, victim and attack files (f64 EMB1 plus id sidecars).
pub fn write_setup(dir: &Path, s: &Synthetic) -> (PathBuf, PathBuf, PathBuf) {
    let corpus = dir.join("corpus.jsonl");
    let victim = dir.join("victim.emb1");
    let attack = dir.join("attack.emb1");
    write_corpus(&corpus, &s.corpus).unwrap();
    emb1::write_f64(&victim, &s.victim).unwrap();
    emb1::write_f64(&attack, &s.attack).unwrap();
    let ids: Vec<&str> = s.corpus.records().iter().map(|r| r.id.as_str()).collect();
    write_json(&ids_path(&victim), &ids).unwrap();
    write_json(&ids_path(&attack), &ids).unwrap();
    (victim, attack, corpus)
}

pub fn config(dir: &Path, s: &Synthetic, b: usize, align_pool: usize, eval: usize) -> ExperimentConfig {
    let (v, a, c) = write_setup(dir, s);
    let mut cfg = ExperimentConfig::new(v, a, c, b);
    cfg.align_pool = Some(align_pool);
    cfg.eval_size = Some(eval);
    cfg.output_dir = dir.join("out");
    cfg
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    (v[(n - 1) / 2] + v[n / 2]) / 2.0
}

/// Standard normal CDF. `erfc` uses the power series below 3 and a
/// continued fraction above.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        // Maclaurin series of erf.
        let mut sum = x;
        let mut term = x;
        let x2 = x * x;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -x2 / n;
            sum += term / (2.0 * n + 1.0);
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Lentz continued fraction for erfc.
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..200 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
    }
}
