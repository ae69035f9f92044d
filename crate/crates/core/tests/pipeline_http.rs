//! HTTP client against the in-process stub feature service.

use std::sync::Arc;
use std::time::Duration;

use metricforge::error::ExtractError;
use metricforge::model::SentencePair;
use metricforge::pipeline::stub::{stub_features, StubExtractor, StubServer, STUB_EXTRACTOR_VERSION};
use metricforge::pipeline::{
    acquire, extract_features, pair_digest, ExtractorEndpoint, FeatureExtractor, FeatureStore, HttpExtractor, RetryPolicy,
};

fn pairs(n: usize) -> Vec<SentencePair> {
    (0..n)
        .map(|i| SentencePair::new(format!("the quick brown fox {i}"), format!("a quick fox {i} jumps")).unwrap())
        .collect()
}

fn endpoint(server: &StubServer) -> ExtractorEndpoint {
    ExtractorEndpoint {
        retry: RetryPolicy {
            attempts: 3,
            backoff: Duration::from_millis(5),
        },
        ..ExtractorEndpoint::new(server.url())
    }
}

#[test]
fn health_reports_version() {
    let server = StubServer::start(Arc::new(StubExtractor::new())).unwrap();
    let client = HttpExtractor::new(endpoint(&server)).unwrap();
    let health = client.health().unwrap();
    assert_eq!(health.status, "ready");
    assert_eq!(health.extractor_version, STUB_EXTRACTOR_VERSION);
}

#[test]
fn http_features_match_direct_stub() {
    let server = StubServer::start(Arc::new(StubExtractor::new())).unwrap();
    let client = HttpExtractor::new(endpoint(&server)).unwrap();
    let batch = pairs(5);
    let resp = client.extract_batch(&batch).unwrap();
    assert_eq!(resp.extractor_version, STUB_EXTRACTOR_VERSION);
    for (p, f) in batch.iter().zip(&resp.features) {
        assert_eq!(*f, stub_features(p.reference(), p.candidate()));
    }
}

#[test]
fn batched_equals_one_at_a_time() {
    let server = StubServer::start(Arc::new(StubExtractor::new())).unwrap();
    let batch = pairs(23);

    let mut batched = FeatureStore::in_memory();
    let client = HttpExtractor::new(ExtractorEndpoint {
        max_batch: 8,
        max_in_flight: 3,
        ..endpoint(&server)
    })
    .unwrap();
    let a = extract_features(&batch, Some(&client), &mut batched).unwrap();

    let mut single = FeatureStore::in_memory();
    let one = HttpExtractor::new(ExtractorEndpoint {
        max_batch: 1,
        max_in_flight: 1,
        ..endpoint(&server)
    })
    .unwrap();
    let b = extract_features(&batch, Some(&one), &mut single).unwrap();
    assert_eq!(a, b);
    // 3 batched requests + 23 single ones
    assert_eq!(server.requests_served(), 3 + 23);
}

#[test]
fn retries_through_503() {
    let server = StubServer::start_with(Arc::new(StubExtractor::new()), 0, 2).unwrap();
    let client = HttpExtractor::new(endpoint(&server)).unwrap();
    let resp = client.extract_batch(&pairs(2)).unwrap();
    assert_eq!(resp.features.len(), 2);
    assert_eq!(server.requests_served(), 3);
}

#[test]
fn persistent_503_lists_unfetched_digests() {
    let server = StubServer::start_with(Arc::new(StubExtractor::new()), 0, 100).unwrap();
    let client = HttpExtractor::new(endpoint(&server)).unwrap();
    let batch = pairs(3);
    let mut cache = FeatureStore::in_memory();
    let acq = acquire(&batch, Some(&client), &mut cache).unwrap();
    assert_eq!(acq.fetched, 0);
    let want: Vec<String> = batch.iter().map(pair_digest).collect();
    assert_eq!(acq.unfetched(), want);
    match acq.into_result() {
        Err(ExtractError::Transport { attempts, unfetched, .. }) => {
            assert_eq!(attempts, 3);
            assert_eq!(unfetched, want);
        }
        other => panic!("{other:?}"),
    }
    assert!(cache.is_empty());
    assert_eq!(server.requests_served(), 3);
}

#[test]
fn oversized_batch_is_rejected_with_422() {
    let server = StubServer::start(Arc::new(StubExtractor::new().with_max_batch(4))).unwrap();
    let client = HttpExtractor::new(ExtractorEndpoint {
        max_batch: 8,
        ..endpoint(&server)
    })
    .unwrap();
    match client.extract_batch(&pairs(6)) {
        Err(ExtractError::Protocol(msg)) => {
            assert!(msg.contains("rejected request") && msg.contains("item 0"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
    // a 422 is not retried
    assert_eq!(server.requests_served(), 1);
}

#[test]
fn partial_outage_keeps_fetched_batches() {
    // the extractor fails its first batch; the server maps that to 503 and
    // the client's retries succeed
    let server = StubServer::start(Arc::new(StubExtractor::new().failing_first(1))).unwrap();
    let client = HttpExtractor::new(ExtractorEndpoint {
        max_batch: 2,
        max_in_flight: 1,
        ..endpoint(&server)
    })
    .unwrap();
    let mut cache = FeatureStore::in_memory();
    let acq = acquire(&pairs(4), Some(&client), &mut cache).unwrap();
    assert_eq!(acq.fetched, 4);
    assert!(acq.failures.is_empty());
    assert_eq!(server.requests_served(), 3);
}

#[test]
fn unreachable_endpoint_is_a_transport_failure() {
    let url = {
        let server = StubServer::start(Arc::new(StubExtractor::new())).unwrap();
        server.url()
    };
    let client = HttpExtractor::new(ExtractorEndpoint {
        retry: RetryPolicy {
            attempts: 2,
            backoff: Duration::from_millis(1),
        },
        timeout: Duration::from_secs(2),
        ..ExtractorEndpoint::new(url)
    })
    .unwrap();
    assert!(matches!(
        client.extract_batch(&pairs(1)),
        Err(ExtractError::Transport { attempts: 2, .. })
    ));
}

#[test]
fn endpoint_validation() {
    assert!(HttpExtractor::new(ExtractorEndpoint::new("ftp://x")).is_err());
    assert!(HttpExtractor::new(ExtractorEndpoint {
        max_batch: 0,
        ..ExtractorEndpoint::new("http://127.0.0.1:1")
    })
    .is_err());
}
