use embinv_core::generator::{train_toy_decoder, Corpus, ToyDecoderConfig};
use embinv_core::metrics::Tokenizer;
use embinv_core::synthetic::{random_unit_rows, sentences};

#[test]
fn overfits_ten_sentences() {
    let texts = sentences(10, 0);
    let corpus = Corpus::from_texts(texts.clone()).unwrap();
    let e = random_unit_rows(10, 16, 0);
    let cfg = ToyDecoderConfig {
        hidden: 32,
        lr: 1e-2,
        weight_decay: 1e-4,
        batch: 10,
        epochs: 300,
        seed: 0,
        tokenizer: Tokenizer::default(),
    };
    let trained = train_toy_decoder(&corpus, &e, &cfg).unwrap();
    let history = &trained.loss_history;
    assert!(*history.last().unwrap() < 0.05, "final loss {}", history.last().unwrap());
    for (epoch, w) in history.windows(2).enumerate().skip(10) {
        assert!(w[1] <= w[0], "loss rose after epoch {}", epoch + 1);
    }
    let exact = (0..10)
        .filter(|&i| trained.decoder.greedy_decode(e.row(i), 20).unwrap() == texts[i])
        .count();
    assert!(exact >= 9, "{exact}/10 decoded exactly");
}

#[test]
fn max_tokens_one_yields_at_most_one_token() {
    let texts = sentences(3, 1);
    let corpus = Corpus::from_texts(texts).unwrap();
    let e = random_unit_rows(3, 4, 1);
    let cfg = ToyDecoderConfig {
        hidden: 8,
        lr: 1e-2,
        epochs: 5,
        ..ToyDecoderConfig::default()
    };
    let t = train_toy_decoder(&corpus, &e, &cfg).unwrap();
    for i in 0..3 {
        let out = t.decoder.greedy_decode(e.row(i), 1).unwrap();
        assert!(out.split_whitespace().count() <= 1, "{out:?}");
    }
}
