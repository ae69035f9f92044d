//! Feature ablation: one network per feature-group mask on the same split
//! and seed, reported in the usual seven-row order.

use metricforge::aggregator::{AggregatorKind, TrainConfig};
use metricforge::correlation::Protocol;
use metricforge::ingestion::{build_split, Dataset};
use metricforge::model::FeatureMask;
use metricforge::pipeline::stub::StubExtractor;
use metricforge::pipeline::{extract_features, run_ablation, AblationDataset, FeatureStore, FeaturedItem};
use metricforge::report::ReportTable;
use metricforge::synthetic::paper_shaped_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = paper_shaped_corpus(9);
    let split = build_split(&rows, Dataset::Wmt17)?;
    let test_rows: Vec<_> = rows.iter().filter(|r| r.dataset == Dataset::Wmt17).collect();

    let stub = StubExtractor::new();
    let mut cache = FeatureStore::in_memory();
    let train_pairs: Vec<_> = split.train.iter().map(|j| j.pair.clone()).collect();
    let test_pairs: Vec<_> = test_rows.iter().map(|r| r.pair()).collect();
    let train_fv = extract_features(&train_pairs, Some(&stub), &mut cache)?;
    let test_fv = extract_features(&test_pairs, Some(&stub), &mut cache)?;

    let dataset = AblationDataset {
        train: train_fv.iter().zip(&split.train).map(|(r, j)| (r.features, j.human_score)).collect(),
        test: test_rows
            .iter()
            .zip(&test_fv)
            .map(|(r, f)| FeaturedItem {
                group: r.lang_pair.clone(),
                segment_id: r.segment_id,
                candidate: r.candidate.clone(),
                features: vec![f.features],
                human: r.human_score,
            })
            .collect(),
        protocol: Protocol::Pearson,
    };
    let config = TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    };
    let rows = run_ablation(&dataset, &FeatureMask::ablation_preset(), AggregatorKind::Mlp, &config)?;
    let mut table = ReportTable::new(Protocol::Pearson);
    for row in &rows {
        table.push(row.mask.to_string(), row.report.as_ref());
    }
    print!("{}", table.render());
    Ok(())
}
