use std::collections::HashMap;

use embinv_core::generator::Corpus;
use embinv_pipeline::client::{fetch_embeddings, EmbeddingCache, EmbeddingServiceClient, RetryPolicy};
use embinv_pipeline::stub::{hashed_embedding, StubConfig, StubServer};
use embinv_pipeline::PipelineError;

fn fixtures() -> HashMap<String, Vec<f64>> {
    HashMap::from([
        ("first text".to_string(), vec![0.5, -0.25, 1.0]),
        ("second text".to_string(), vec![0.0, 2.0, -1.5]),
        ("third text".to_string(), vec![0.125, 0.75, 3.0]),
    ])
}

fn corpus3() -> Corpus {
    Corpus::from_texts(["first text", "second text", "third text"]).unwrap()
}

fn fast_retry(client: &mut EmbeddingServiceClient) {
    client.retry = RetryPolicy {
        max_attempts: 3,
        backoff_ms: 1,
    };
}

#[test]
fn stub_fixtures_come_back_in_order() {
    let server = StubServer::start(StubConfig {
        dim: 3,
        fixtures: fixtures(),
        ..StubConfig::default()
    })
    .unwrap();
    let client = EmbeddingServiceClient::new(server.url(), "stub-model", None);
    let m = fetch_embeddings(&client, &corpus3(), None).unwrap();
    let f = fixtures();
    for (i, t) in ["first text", "second text", "third text"].iter().enumerate() {
        assert_eq!(m.row(i), f[*t].as_slice());
    }
}

#[test]
fn warm_cache_makes_no_requests() {
    let server = StubServer::start(StubConfig {
        dim: 3,
        fixtures: fixtures(),
        ..StubConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = EmbeddingCache::new(dir.path().join("cache")).unwrap();
    let cold = EmbeddingServiceClient::new(server.url(), "stub-model", None);
    let first = fetch_embeddings(&cold, &corpus3(), Some(&cache)).unwrap();
    assert_eq!(cold.request_count(), 1);

    let warm = EmbeddingServiceClient::new(server.url(), "stub-model", None);
    let second = fetch_embeddings(&warm, &corpus3(), Some(&cache)).unwrap();
    assert_eq!(warm.request_count(), 0);
    assert_eq!(server.request_count(), 1);
    assert_eq!(first, second);

    // Another model name misses the cache.
    let other = EmbeddingServiceClient::new(server.url(), "other-model", None);
    fetch_embeddings(&other, &corpus3(), Some(&cache)).unwrap();
    assert_eq!(other.request_count(), 1);
}

#[test]
fn empty_corpus_gives_zero_rows() {
    let client = EmbeddingServiceClient::new("http://127.0.0.1:9", "m", None);
    let m = fetch_embeddings(&client, &Corpus::default(), None).unwrap();
    assert_eq!(m.rows(), 0);
    assert_eq!(client.request_count(), 0);
}

#[test]
fn batches_respect_the_limit_and_keep_order() {
    let server = StubServer::start(StubConfig {
        dim: 5,
        max_batch: Some(4),
        ..StubConfig::default()
    })
    .unwrap();
    let texts: Vec<String> = (0..37).map(|i| format!("sentence number {i}")).collect();
    let corpus = Corpus::from_texts(texts.clone()).unwrap();
    let mut client = EmbeddingServiceClient::new(server.url(), "m", None);
    client.batch_size = 4;
    client.max_in_flight = 3;
    let m = fetch_embeddings(&client, &corpus, None).unwrap();
    assert_eq!(client.request_count(), 10);
    for (i, t) in texts.iter().enumerate() {
        let want: Vec<f64> = hashed_embedding(t, 5).iter().map(|&x| x as f32 as f64).collect();
        assert_eq!(m.row(i), want.as_slice());
    }
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::start(StubConfig {
        dim: 3,
        fixtures: fixtures(),
        fail_first: 2,
        ..StubConfig::default()
    })
    .unwrap();
    let mut client = EmbeddingServiceClient::new(server.url(), "m", None);
    fast_retry(&mut client);
    let m = fetch_embeddings(&client, &corpus3(), None).unwrap();
    assert_eq!(m.rows(), 3);
    assert_eq!(client.request_count(), 3);
}

#[test]
fn persistent_failure_lists_ids_and_keeps_partial_cache() {
    let server = StubServer::start(StubConfig {
        dim: 3,
        fixtures: fixtures(),
        required_key: Some("sekrit".into()),
        ..StubConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = EmbeddingCache::new(dir.path()).unwrap();
    let good = EmbeddingServiceClient::new(server.url(), "m", Some("sekrit".into()));
    let one = Corpus::from_texts(["first text"]).unwrap();
    fetch_embeddings(&good, &one, Some(&cache)).unwrap();

    let mut bad = EmbeddingServiceClient::new(server.url(), "m", Some("wrong".into()));
    fast_retry(&mut bad);
    bad.batch_size = 1;
    let err = fetch_embeddings(&bad, &corpus3(), Some(&cache)).unwrap_err();
    match &err {
        PipelineError::Network { failed_ids, .. } => assert_eq!(failed_ids, &["1", "2"]),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 4);
    // 401 is not retried.
    assert_eq!(bad.request_count(), 2);
    assert!(cache.get("m", "first text").is_some());
}

#[test]
fn debug_output_hides_the_key() {
    let client = EmbeddingServiceClient::new("http://x", "m", Some("top-secret-key".into()));
    let dbg = format!("{client:?}");
    assert!(!dbg.contains("top-secret-key"));
    assert!(dbg.contains("redacted"));
}
