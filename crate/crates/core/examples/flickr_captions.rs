//! Multi-reference caption scoring: each candidate is scored against its
//! image's five gold captions and the best score counts. Correlation with
//! the averaged expert judgments uses tau-b.

use metricforge::aggregator::{train, AggregatorKind, TrainConfig};
use metricforge::baseline::{sentence_bleu, tokenize, BleuConfig};
use metricforge::correlation::{evaluate, EvalItem, Protocol};
use metricforge::ingestion::{parse_flickr_str, Dataset};
use metricforge::model::FeatureMask;
use metricforge::pipeline::stub::StubExtractor;
use metricforge::pipeline::{extract_features, FeatureStore, Scorer};
use metricforge::synthetic::{da_rows, flickr_fixture, DaCorpusSpec};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stub = StubExtractor::new();
    let mut cache = FeatureStore::in_memory();

    // the aggregator is trained on DA data, as for translation
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let rows = da_rows(&mut rng, &DaCorpusSpec::new(Dataset::Wmt16, 400, 4));
    let pairs: Vec<_> = rows.iter().map(|r| r.pair()).collect();
    let fv = extract_features(&pairs, Some(&stub), &mut cache)?;
    let data: Vec<_> = fv.iter().zip(&rows).map(|(r, row)| (r.features, row.human_score / 100.0)).collect();
    let model = train(&data, FeatureMask::NEURAL, AggregatorKind::Mlp, &TrainConfig::default())?;

    let fixture = flickr_fixture(1, 30, 120);
    let judgments = parse_flickr_str(&fixture.expert, &fixture.captions, "synthetic")?;
    let scorer = Scorer::new(&model, Some(&stub));
    let mut nubia = Vec::new();
    let mut bleu = Vec::new();
    for (i, j) in judgments.iter().enumerate() {
        let s = scorer.score_multi_reference(&j.references, &j.candidate_caption, &mut cache)?;
        let refs: Vec<_> = j.references.iter().map(|r| tokenize(r)).collect();
        let item = |metric| EvalItem {
            group: "captions".into(),
            segment_id: i as u64,
            candidate: j.candidate_caption.clone(),
            human: j.human_target(),
            metric,
        };
        nubia.push(item(s.score));
        bleu.push(item(sentence_bleu(&tokenize(&j.candidate_caption), &refs, BleuConfig::default())));
    }
    println!("{} judged captions, 5 references each", judgments.len());
    println!("NUBIA tau-b {:.3}", evaluate(Protocol::TauB, &nubia)?.aggregate.statistic);
    println!("BLEU  tau-b {:.3}", evaluate(Protocol::TauB, &bleu)?.aggregate.statistic);
    Ok(())
}
