//! Serves the deterministic stub extractor over the feature wire protocol
//! and fetches through it with the HTTP client into a JSONL cache.
//!
//! With `--serve [PORT]` the server keeps running so the `metricforge`
//! binary can be pointed at it via `--endpoint` or METRICFORGE_ENDPOINT.

use std::sync::Arc;

use metricforge::model::SentencePair;
use metricforge::pipeline::stub::{StubExtractor, StubServer};
use metricforge::pipeline::{extract_features, ExtractorEndpoint, FeatureStore, HttpExtractor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.first().map(String::as_str) == Some("--serve") {
        let port = args.get(1).map(|p| p.parse()).transpose()?.unwrap_or(8750);
        let server = StubServer::start_with(Arc::new(StubExtractor::new()), port, 0)?;
        println!("serving stub features on {}", server.url());
        server.join();
        return Ok(());
    }

    let server = StubServer::start(Arc::new(StubExtractor::new().with_max_batch(4)))?;
    let mut endpoint = ExtractorEndpoint::new(server.url());
    endpoint.max_batch = 4;
    let client = HttpExtractor::new(endpoint)?;
    println!("health: {:?}", client.health()?);

    let pairs: Vec<SentencePair> = [
        ("The cat sat on the mat.", "A cat was sitting on the mat."),
        ("The cat sat on the mat.", "The cat sat on the mat."),
        ("It is raining today.", "Today it rains."),
        ("He bought three apples.", "He sold two pears."),
        ("Stocks fell sharply on Monday.", "On Monday stocks dropped a lot."),
    ]
    .into_iter()
    .map(|(r, c)| SentencePair::new(r, c))
    .collect::<Result<_, _>>()?;

    let dir = std::env::temp_dir().join(format!("metricforge-stub-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut cache = FeatureStore::open(dir.join("features.jsonl"), false)?;
    let records = extract_features(&pairs, Some(&client), &mut cache)?;
    for r in &records {
        let f = &r.features;
        println!(
            "{}  sem_sim {:.2}  mnli [{:.2} {:.2} {:.2}]  ppl {:.1}/{:.1}",
            &r.pair_digest[..12],
            f.sem_sim,
            f.mnli_contradiction,
            f.mnli_neutral,
            f.mnli_entailment,
            f.ppl_ref,
            f.ppl_cand
        );
    }
    println!("{} HTTP requests served; cache at {}", server.requests_served(), dir.display());

    // a second pass is served entirely from the cache
    let reopened = FeatureStore::open(dir.join("features.jsonl"), false)?;
    let mut cache = reopened;
    extract_features(&pairs, None, &mut cache)?;
    println!("offline re-read ok ({} records)", cache.len());
    Ok(())
}
