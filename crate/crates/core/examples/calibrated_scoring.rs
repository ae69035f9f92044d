//! End-to-end scoring: features, regressor, self-normalization, clamping.
//! The score of a reference against itself is exactly 1.

use metricforge::aggregator::{train, AggregatorKind, TrainConfig};
use metricforge::model::{FeatureMask, SentencePair};
use metricforge::pipeline::stub::StubExtractor;
use metricforge::pipeline::{extract_features, nubia_score, score_batch, FeatureStore, Scorer, SelfReference};
use metricforge::synthetic::{da_rows, DaCorpusSpec};
use metricforge::ingestion::Dataset;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let rows = da_rows(&mut rng, &DaCorpusSpec::new(Dataset::Wmt16, 200, 4));
    let stub = StubExtractor::new();
    let mut cache = FeatureStore::in_memory();
    let pairs: Vec<_> = rows.iter().map(|r| r.pair()).collect();
    let records = extract_features(&pairs, Some(&stub), &mut cache)?;
    let data: Vec<_> = records.iter().zip(&rows).map(|(r, row)| (r.features, row.human_score / 100.0)).collect();
    let model = train(&data, FeatureMask::NEURAL, AggregatorKind::Mlp, &TrainConfig::default())?;

    let reference = "A man is playing a guitar on the street.";
    for candidate in [
        reference,
        "A man plays a guitar on the street.",
        "street the on guitar a playing is man A",
        "Two dogs run through the snow.",
    ] {
        let pair = SentencePair::new(reference, candidate)?;
        let s = nubia_score(&model, &pair, Some(&stub), &mut cache)?;
        println!("{:.4} (raw {:+.4}, self {:.4})  {candidate}", s.score, s.raw, s.self_score);
    }

    // One self-score lookup serves every candidate of a shared reference.
    let fresh = StubExtractor::new();
    let mut cold = FeatureStore::in_memory();
    let batch: Vec<_> = (0..100)
        .map(|i| SentencePair::new(reference, format!("candidate number {i} on the street")))
        .collect::<Result<_, _>>()?;
    let scores = score_batch(&model, &batch, Some(&fresh), &mut cold)?.into_complete()?;
    println!("scored {} pairs with {} feature lookups", scores.len(), fresh.pairs_served());

    let by_candidate = Scorer::new(&model, Some(&stub)).with_self_reference(SelfReference::Candidate);
    let s = by_candidate.score(&SentencePair::new(reference, "A man plays guitar.")?, &mut cache)?;
    println!("candidate-self normalization: {:.4}", s.score);
    Ok(())
}
