//! Sentence BLEU and ROUGE-L on a few hand-picked pairs.

use metricforge::baseline::{bleu_stats, rouge_l, sentence_bleu, tokenize, BleuConfig, Smoothing};

fn main() {
    let reference = tokenize("The cat is on the mat.");
    let cases = [
        "The cat is on the mat.",
        "the the the the the the the",
        "There is a cat on the mat.",
        "mat the on is cat The",
        "A dog sleeps.",
    ];
    println!("{:<32} {:>8} {:>8} {:>8}", "candidate", "BLEU", "BLEU-raw", "ROUGE-L");
    for text in cases {
        let cand = tokenize(text);
        let refs = std::slice::from_ref(&reference);
        let smoothed = sentence_bleu(&cand, refs, BleuConfig::default());
        let raw = sentence_bleu(
            &cand,
            refs,
            BleuConfig {
                smoothing: Smoothing::Off,
                ..BleuConfig::default()
            },
        );
        println!("{text:<32} {smoothed:>8.4} {raw:>8.4} {:>8.4}", rouge_l(&cand, &reference));
    }

    // clipped counts: "the" appears twice in the reference
    let stats = bleu_stats(&tokenize("the the the the the the the"), &[tokenize("the cat is on the mat")], 4);
    let p1 = stats.matches[0];
    println!("unigram precision {}/{}", p1.clipped, p1.total);
}
