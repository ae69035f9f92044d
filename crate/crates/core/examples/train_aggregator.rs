//! Trains the linear and neural aggregators on stub features of a synthetic
//! WMT-shaped corpus, then saves and reloads the network.

use metricforge::aggregator::{predict_raw, train, train_with_history, AggregatorKind, TrainConfig, TrainedAggregator};
use metricforge::ingestion::{build_split, Dataset};
use metricforge::model::{FeatureMask, FeatureVector};
use metricforge::pipeline::stub::StubExtractor;
use metricforge::pipeline::{extract_features, FeatureStore};
use metricforge::synthetic::paper_shaped_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = paper_shaped_corpus(5);
    let split = build_split(&rows, Dataset::Wmt17)?;
    let stub = StubExtractor::new();
    let mut cache = FeatureStore::in_memory();
    let pairs: Vec<_> = split.train.iter().map(|j| j.pair.clone()).collect();
    let records = extract_features(&pairs, Some(&stub), &mut cache)?;
    let data: Vec<(FeatureVector, f64)> = records
        .iter()
        .zip(&split.train)
        .map(|(r, j)| (r.features, j.human_score))
        .collect();
    println!("training rows: {}", data.len());

    let config = TrainConfig {
        epochs: 60,
        seed: 1,
        ..TrainConfig::default()
    };
    let lin = train(&data, FeatureMask::FULL, AggregatorKind::Linreg, &config)?;
    let coef = lin.effective_linear_coefficients().expect("linear model");
    // perplexities enter the model log-transformed by default
    for (name, w) in FeatureMask::FULL.feature_names().iter().zip(&coef.weights) {
        let name = if name.starts_with("ppl") { format!("ln({name})") } else { name.to_string() };
        println!("  {name:<20} {w:+.5}");
    }
    println!("  {:<20} {:+.5}", "intercept", coef.bias);

    let (nn, history) = train_with_history(&data, FeatureMask::FULL, AggregatorKind::Mlp, &config)?;
    for (epoch, mse) in history.epoch_mse.iter().enumerate().step_by(10) {
        println!("epoch {:>3}  mse {mse:.6}", epoch + 1);
    }

    let path = std::env::temp_dir().join("metricforge-example-model.json");
    nn.save(&path)?;
    let reloaded = TrainedAggregator::load(&path)?;
    assert_eq!(reloaded, nn);
    let probe = &records[0].features;
    println!(
        "saved {} (sha256 {}); prediction {:.4} vs target {:.4}",
        path.display(),
        reloaded.digest(),
        predict_raw(&reloaded, probe)?,
        data[0].1
    );
    Ok(())
}
