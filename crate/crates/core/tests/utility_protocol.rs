use embinv_core::defense::{apply_defense, DefenseSpec};
use embinv_core::rng::NoiseRng;
use embinv_core::synthetic::{blobs, random_unit_rows};
use embinv_core::utility::{evaluate_classifier, train_classifier, ClassifierConfig, LabeledEmbeddings};

fn split(d: &LabeledEmbeddings, a: usize, b: usize) -> LabeledEmbeddings {
    LabeledEmbeddings::new(
        d.embeddings().slice_rows(a, b),
        d.labels()[a..b].to_vec(),
        d.num_classes(),
    )
    .unwrap()
}

fn train_eval(d: &LabeledEmbeddings, cuts: [usize; 3], cfg: &ClassifierConfig) -> f64 {
    let t = train_classifier(&split(d, 0, cuts[0]), &split(d, cuts[0], cuts[1]), cfg).unwrap();
    evaluate_classifier(&t.model, &split(d, cuts[1], cuts[2])).unwrap().acc
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn config() -> ClassifierConfig {
    ClassifierConfig {
        hidden: 64,
        lr: 1e-2,
        ..ClassifierConfig::default()
    }
}

#[test]
fn random_labels_stay_near_chance() {
    for seed in 0..10u64 {
        let mut r = NoiseRng::new(seed + 1000);
        let x = random_unit_rows(800, 8, seed);
        let labels = (0..800).map(|_| r.below(2)).collect();
        let d = LabeledEmbeddings::new(x, labels, 2).unwrap();
        let acc = train_eval(&d, [300, 400, 800], &config());
        assert!((35.0..=65.0).contains(&acc), "seed {seed}: {acc}");
    }
}

#[test]
fn gaussian_noise_costs_accuracy_in_order() {
    let (mut none, mut mild, mut heavy) = (vec![], vec![], vec![]);
    for seed in 0..5u64 {
        let d = blobs(4, 150, 16, 1.0, 0.5, seed).unwrap();
        let noised = |lambda| {
            d.with_embeddings(apply_defense(&DefenseSpec::gaussian(lambda, seed), d.embeddings()).unwrap())
                .unwrap()
        };
        none.push(train_eval(&d, [400, 500, 600], &config()));
        mild.push(train_eval(&noised(0.1), [400, 500, 600], &config()));
        heavy.push(train_eval(&noised(1.0), [400, 500, 600], &config()));
    }
    let (none, mild, heavy) = (median(none), median(mild), median(heavy));
    assert!(none >= mild && mild >= heavy - 2.0, "{none} {mild} {heavy}");
}

#[test]
fn shuffling_keeps_accuracy() {
    for seed in 0..3u64 {
        let d = blobs(3, 200, 16, 3.0, 0.4, seed).unwrap();
        let shuffled = d
            .with_embeddings(apply_defense(&DefenseSpec::shuffle(seed), d.embeddings()).unwrap())
            .unwrap();
        let base = train_eval(&d, [400, 500, 600], &config());
        let shuf = train_eval(&shuffled, [400, 500, 600], &config());
        assert!(base >= 99.0);
        assert!((base - shuf).abs() <= 1.0, "seed {seed}: {base} vs {shuf}");
    }
}

#[test]
fn six_epochs_one_checkpoint_each() {
    let d = blobs(2, 100, 4, 2.0, 0.5, 9).unwrap();
    let t = train_classifier(&split(&d, 0, 150), &split(&d, 150, 200), &config()).unwrap();
    assert_eq!(t.history.len(), 6);
    let best = t
        .history
        .iter()
        .map(|h| h.dev_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(t.history[t.best_epoch].dev_acc, best);
    assert!(t.history[..t.best_epoch].iter().all(|h| h.dev_acc < best));
}

#[test]
fn training_is_deterministic() {
    let d = blobs(2, 50, 4, 2.0, 0.5, 4).unwrap();
    let a = train_classifier(&split(&d, 0, 80), &split(&d, 80, 100), &config()).unwrap();
    let b = train_classifier(&split(&d, 0, 80), &split(&d, 80, 100), &config()).unwrap();
    assert_eq!(a.model, b.model);
}
