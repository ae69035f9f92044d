//! Writes a synthetic WMT-shaped DA corpus and a Flickr-style caption set,
//! and warms a feature cache for them with the stub extractor, so the
//! `metricforge` binary can be tried offline.
//!
//!     cargo run --example synthetic_corpus -- /tmp/mf
//!     cargo run --bin metricforge -- train --data /tmp/mf/wmt.tsv \
//!         --test-dataset wmt17 --cache /tmp/mf/features.jsonl --offline --out /tmp/mf/model.json

use std::path::PathBuf;

use metricforge::ingestion::{build_split, dataset_counts, parse_flickr_str, write_canonical_tsv, Dataset};
use metricforge::pipeline::stub::StubExtractor;
use metricforge::pipeline::{extract_features, FeatureStore};
use metricforge::model::SentencePair;
use metricforge::synthetic::{flickr_fixture, paper_shaped_corpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic-data".into()));
    std::fs::create_dir_all(&dir)?;

    let rows = paper_shaped_corpus(2024);
    write_canonical_tsv(dir.join("wmt.tsv"), &rows)?;
    for (d, n) in dataset_counts(&rows) {
        println!("{d}: {n} rows");
    }
    for test in [Dataset::Wmt17, Dataset::Wmt18, Dataset::Wmt19] {
        let split = build_split(&rows, test)?;
        println!("test {test}: train {} / test {}", split.train.len(), split.test.len());
    }

    let flickr = flickr_fixture(2024, 40, 200);
    std::fs::write(dir.join("expert.txt"), &flickr.expert)?;
    std::fs::write(dir.join("captions.tsv"), &flickr.captions)?;
    let judgments = parse_flickr_str(&flickr.expert, &flickr.captions, "flickr")?;
    println!("flickr: {} judged captions", judgments.len());

    let mut pairs: Vec<SentencePair> = rows.iter().map(|r| r.pair()).collect();
    for j in &judgments {
        for r in &j.references {
            pairs.push(SentencePair::new(r.clone(), j.candidate_caption.clone())?);
            pairs.push(SentencePair::identity(r.clone())?);
        }
    }
    pairs.extend(rows.iter().map(|r| SentencePair::identity(r.reference.clone())).collect::<Result<Vec<_>, _>>()?);

    let cache_path = dir.join("features.jsonl");
    let mut cache = FeatureStore::open(&cache_path, false)?;
    let before = cache.len();
    extract_features(&pairs, Some(&StubExtractor::new()), &mut cache)?;
    println!("cache {}: {} records ({} new)", cache_path.display(), cache.len(), cache.len() - before);
    Ok(())
}
