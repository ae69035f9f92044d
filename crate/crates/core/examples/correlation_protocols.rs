//! The three evaluation protocols, with BLEU as the metric under test:
//! |Pearson| on DA scores, Kendall tau on DA-derived relative rankings, and
//! tau-b against averaged caption judgments.

use metricforge::baseline::{sentence_bleu, tokenize, BleuConfig};
use metricforge::correlation::{da_to_relative_ranking, evaluate, EvalItem, Protocol, DARR_THRESHOLD};
use metricforge::ingestion::{parse_flickr_str, rows_to_da_groups};
use metricforge::synthetic::{darr_corpus, flickr_fixture};

fn bleu(candidate: &str, references: &[&str]) -> f64 {
    let refs: Vec<_> = references.iter().map(|r| tokenize(r)).collect();
    sentence_bleu(&tokenize(candidate), &refs, BleuConfig::default())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = darr_corpus(11, 50, 5);
    let groups = rows_to_da_groups(&rows)?;
    let ranked = da_to_relative_ranking(&groups, DARR_THRESHOLD)?;
    println!("{} rows in {} segments -> {} ranked pairs (gap > {DARR_THRESHOLD})", rows.len(), groups.len(), ranked.len());

    let items: Vec<EvalItem> = rows
        .iter()
        .map(|r| EvalItem {
            group: r.lang_pair.clone(),
            segment_id: r.segment_id,
            candidate: r.candidate.clone(),
            human: r.human_score,
            metric: bleu(&r.candidate, &[&r.reference]),
        })
        .collect();
    for protocol in [Protocol::Pearson, Protocol::Darr] {
        let report = evaluate(protocol, &items)?;
        print!("{protocol:<8}");
        for (lang, g) in &report.per_lang {
            print!("  {lang} {:.3} (n={})", g.statistic, g.n);
        }
        println!("  AVG {:.3}", report.aggregate.statistic);
    }

    let flickr = flickr_fixture(11, 30, 150);
    let judgments = parse_flickr_str(&flickr.expert, &flickr.captions, "synthetic")?;
    let caption_items: Vec<EvalItem> = judgments
        .iter()
        .enumerate()
        .map(|(i, j)| EvalItem {
            group: "captions".into(),
            segment_id: i as u64,
            candidate: j.candidate_caption.clone(),
            human: j.human_target(),
            metric: bleu(&j.candidate_caption, &j.references.iter().map(String::as_str).collect::<Vec<_>>()),
        })
        .collect();
    let report = evaluate(Protocol::TauB, &caption_items)?;
    println!("tau_b     captions {:.3} (n={})", report.aggregate.statistic, report.aggregate.n);
    Ok(())
}
