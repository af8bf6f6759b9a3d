mod common;

use common::{config, median, normal_cdf, rotation_setup};
use embinv_core::defense::DefenseSpec;
use embinv_core::rng::NoiseRng;
use embinv_core::synthetic::{anisotropic_unit_rows, perturb, random_orthogonal, sentences};
use embinv_core::tensor::DenseMatrix;
use embinv_pipeline::experiment::{
    emit_density, run_attack, run_attack_on, sweep, sweep_on, write_report, ExperimentData, PairSelection,
};
use embinv_pipeline::io::{ids_path, write_json};
use embinv_pipeline::PipelineError;

#[test]
fn exact_rotation_recovers_every_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(120, 16, 3);
    let cfg = config(dir.path(), &s, 16, 40, 40);
    let report = run_attack(&cfg).unwrap();
    assert_eq!(report.per_sample.len(), 40);
    assert_eq!(report.aggregate.rouge_l, Some(100.0));
    assert!(report.aggregate.cosine.unwrap() > 0.999_999);
}

#[test]
fn strong_gaussian_noise_breaks_the_attack() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(120, 16, 3);
    let mut cfg = config(dir.path(), &s, 16, 40, 40);
    cfg.defense = Some(DefenseSpec::gaussian(1.0, 5));
    let report = run_attack(&cfg).unwrap();
    assert!(report.aggregate.cosine.unwrap() < 0.5, "{:?}", report.aggregate);
}

#[test]
fn zero_pairs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(30, 4, 1);
    let cfg = config(dir.path(), &s, 0, 10, 10);
    let err = run_attack(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn reports_are_deterministic_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(80, 8, 2);
    let mut cfg = config(dir.path(), &s, 4, 30, 20);
    cfg.defense = Some(DefenseSpec::gaussian(0.1, 1));
    cfg.seeds = vec![0, 1, 2];
    cfg.pair_selection = PairSelection::Random;
    let a = run_attack(&cfg).unwrap();
    let b = run_attack(&cfg).unwrap();
    assert_eq!(a.per_sample, b.per_sample);
    assert_eq!(a.aggregate, b.aggregate);
    assert_eq!(a.per_sample.len(), 60);

    let n = a.per_sample.len() as f64;
    let mean = |f: fn(&embinv_pipeline::experiment::SampleResult) -> Option<f64>| {
        a.per_sample.iter().map(|s| f(s).unwrap()).sum::<f64>() / n
    };
    let agg = &a.aggregate;
    for (got, want) in [
        (agg.rouge_l, mean(|s| s.rouge_l)),
        (agg.rouge_1, mean(|s| s.rouge_1)),
        (agg.bleu_1, mean(|s| s.bleu_1)),
        (agg.bleu_2, mean(|s| s.bleu_2)),
        (agg.cosine, mean(|s| s.cosine)),
    ] {
        assert!((got.unwrap() - want).abs() <= 1e-9);
    }

    let files = write_report(&dir.path().join("out"), &a).unwrap();
    assert!(files.iter().all(|f| f.exists()));
    let text = std::fs::read_to_string(&files[1]).unwrap();
    assert!(text.contains("Rouge-L"));
}

#[test]
fn eval_rows_never_overlap_the_pool() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(60, 4, 9);
    let cfg = config(dir.path(), &s, 10, 20, 15);
    let report = run_attack(&cfg).unwrap();
    let pool_ids: Vec<String> = (0..20).map(|i| i.to_string()).collect();
    assert!(report.per_sample.iter().all(|r| !pool_ids.contains(&r.id)));
}

#[test]
fn id_and_shape_problems_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(30, 4, 1);
    let cfg = config(dir.path(), &s, 4, 10, 10);
    let mut ids: Vec<String> = (0..30).map(|i| i.to_string()).collect();
    ids.swap(3, 4);
    write_json(&ids_path(&cfg.victim_embeddings), &ids).unwrap();
    let err = run_attack(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::IdMismatch { row: 3, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);

    let short = ExperimentData::new(s.corpus.clone(), s.victim.slice_rows(0, 29), s.attack.clone());
    assert!(matches!(short.unwrap_err(), PipelineError::DimMismatch { .. }));

    let mut missing = cfg.clone();
    missing.corpus = dir.path().join("nope.jsonl");
    assert_eq!(run_attack(&missing).unwrap_err().exit_code(), 2);
}

#[test]
fn sweep_single_value_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(40, 4, 1);
    let cfg = config(dir.path(), &s, 1, 20, 10);
    let r = sweep(&cfg, &[1]).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.to_csv().lines().count(), 2);
    assert!(r.to_csv().starts_with("b,seed,rouge_l,cosine\n"));
}

#[test]
fn sweep_deduplicates_and_checks_range() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotation_setup(40, 4, 1);
    let cfg = config(dir.path(), &s, 1, 20, 10);
    let r = sweep(&cfg, &[2, 1, 2]).unwrap();
    assert_eq!(r.b_values, vec![2, 1]);
    assert_eq!(r.rows.len(), 2);
    assert!(sweep(&cfg, &[21]).is_err());
}

#[test]
fn sweep_cosine_median_rises_with_pairs() {
    let dim = 32;
    let n = 400;
    let attack = anisotropic_unit_rows(n, dim, 0.8, 11);
    let q = random_orthogonal(dim, 12);
    let victim = perturb(&attack.matmul(&q).unwrap(), 0.05, 13);
    let corpus = embinv_core::generator::Corpus::from_texts(sentences(n, 11)).unwrap();
    let data = ExperimentData::new(corpus, victim, attack).unwrap();
    let mut cfg = embinv_pipeline::experiment::ExperimentConfig::new("", "", "", 1);
    cfg.align_pool = Some(200);
    cfg.eval_size = Some(100);
    cfg.seeds = (0..10).collect();
    cfg.pair_selection = PairSelection::Random;
    let r = sweep_on(&cfg, &data, &[1, 10, 100]).unwrap();
    let medians: Vec<f64> = [1usize, 10, 100]
        .iter()
        .map(|&b| median(r.rows.iter().filter(|x| x.b == b).map(|x| x.cosine.unwrap()).collect()))
        .collect();
    assert!(medians.windows(2).all(|w| w[1] >= w[0]), "{medians:?}");

    // Same numbers as running each b on its own.
    let mut single = cfg.clone();
    single.alignment_size = 10;
    let alone = run_attack_on(&single, &data).unwrap();
    assert_eq!(alone.per_sample, r.reports[1].per_sample);
}

#[test]
fn erfc_reference_values() {
    assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    assert!((normal_cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-12);
    assert!((normal_cdf(-2.0) - 0.022_750_131_948_179).abs() < 1e-12);
    assert!((normal_cdf(3.5) - 0.999_767_370_920_964).abs() < 1e-12);
}

#[test]
fn density_of_normal_samples_matches_the_cdf() {
    let n = 100_000;
    let mut rng = NoiseRng::new(2024);
    let m = DenseMatrix::from_vec(n, 1, rng.normal_vec(n)).unwrap();
    let bins = emit_density(&m, 40).unwrap();
    assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), n);
    for b in &bins {
        let p = normal_cdf(b.hi) - normal_cdf(b.lo);
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        let expected = n as f64 * p;
        assert!(
            (b.count as f64 - expected).abs() <= 3.0 * sd.max(1.0),
            "bin [{}, {}): {} vs {expected}",
            b.lo,
            b.hi,
            b.count
        );
    }
}
