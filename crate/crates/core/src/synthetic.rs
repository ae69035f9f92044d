//! Seeded synthetic corpora for tests, examples and smoke runs.
//!
//! Candidates are perturbed copies of their reference: each word survives
//! with a per-candidate quality probability, and some candidates are then
//! scrambled by adjacent swaps. Human scores follow token overlap, so a
//! metric that ignores word order tracks them better than n-gram metrics.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingestion::{CanonicalDaRow, Dataset};
use crate::pipeline::stub::token_overlap;

const ONSETS: [&str; 12] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// The `i`-th pseudo-word of the synthetic vocabulary.
pub fn word(i: usize) -> String {
    let syllable = |k: usize| format!("{}{}", ONSETS[k % ONSETS.len()], VOWELS[(k / ONSETS.len()) % VOWELS.len()]);
    let n = ONSETS.len() * VOWELS.len();
    format!("{}{}", syllable(i % n), syllable(i / n + 7))
}

pub const VOCABULARY: usize = 400;

pub fn sentence(rng: &mut impl Rng, min_len: usize, max_len: usize) -> Vec<String> {
    let len = rng.random_range(min_len..=max_len);
    (0..len).map(|_| word(rng.random_range(0..VOCABULARY))).collect()
}

/// Keeps each word with probability `quality`, otherwise substitutes a random
/// word; with probability `scramble` also applies up to `len` adjacent swaps.
pub fn perturb(rng: &mut impl Rng, reference: &[String], quality: f64, scramble: f64) -> Vec<String> {
    let mut out: Vec<String> = reference
        .iter()
        .map(|w| {
            if rng.random_bool(quality.clamp(0.0, 1.0)) {
                w.clone()
            } else {
                word(rng.random_range(0..VOCABULARY))
            }
        })
        .collect();
    if out.len() > 1 && rng.random_bool(scramble) {
        for _ in 0..rng.random_range(1..=out.len()) {
            let i = rng.random_range(0..out.len() - 1);
            out.swap(i, i + 1);
        }
    }
    out
}

/// How the 0-100 human score is derived from a (reference, candidate) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HumanModel {
    /// 100 · overlap plus uniform noise in ±`noise`, clamped; rounded to a
    /// multiple of `quantum` when given.
    Overlap { noise: f64, quantum: Option<f64> },
    /// Exactly 100 · (intercept + slope · 5 · overlap): linear in the stub
    /// extractor's sem_sim.
    LinearSemSim { intercept: f64, slope: f64 },
}

impl HumanModel {
    pub fn score(&self, rng: &mut impl Rng, reference: &str, candidate: &str) -> f64 {
        let o = token_overlap(reference, candidate);
        match *self {
            HumanModel::Overlap { noise, quantum } => {
                let jitter = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 };
                let s = (100.0 * o + jitter).clamp(0.0, 100.0);
                match quantum {
                    Some(q) => ((s / q).round() * q).clamp(0.0, 100.0),
                    None => s,
                }
            }
            HumanModel::LinearSemSim { intercept, slope } => 100.0 * (intercept + slope * 5.0 * o),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaCorpusSpec {
    pub dataset: Dataset,
    pub lang_pairs: Vec<String>,
    pub segments: usize,
    /// Systems per segment, drawn uniformly from this range.
    pub systems: (usize, usize),
    /// Probability that a candidate is word-scrambled.
    pub scramble: f64,
    pub human: HumanModel,
}

impl DaCorpusSpec {
    pub fn new(dataset: Dataset, segments: usize, systems: usize) -> Self {
        Self {
            dataset,
            lang_pairs: ["cs-en", "de-en", "fi-en", "ru-en"].map(String::from).to_vec(),
            segments,
            systems: (systems, systems),
            scramble: 0.5,
            human: HumanModel::Overlap {
                noise: 10.0,
                quantum: None,
            },
        }
    }
}

/// DA rows: segment `i` belongs to language pair `i mod |lang_pairs|`.
pub fn da_rows(rng: &mut impl Rng, spec: &DaCorpusSpec) -> Vec<CanonicalDaRow> {
    let mut rows = Vec::new();
    let mut next_id = vec![1u64; spec.lang_pairs.len()];
    for i in 0..spec.segments {
        let lp = i % spec.lang_pairs.len();
        let segment_id = next_id[lp];
        next_id[lp] += 1;
        let reference = sentence(rng, 6, 16);
        let systems = rng.random_range(spec.systems.0..=spec.systems.1);
        let ref_text = reference.join(" ");
        for s in 0..systems {
            let quality = rng.random_range(0.0..=1.0);
            let candidate = perturb(rng, &reference, quality, spec.scramble).join(" ");
            let human_score = spec.human.score(rng, &ref_text, &candidate);
            rows.push(CanonicalDaRow {
                dataset: spec.dataset,
                lang_pair: spec.lang_pairs[lp].clone(),
                segment_id,
                system_id: format!("sys{s}"),
                reference: ref_text.clone(),
                candidate,
                human_score,
                n_annotators: rng.random_range(1..=15),
            });
        }
    }
    rows
}

/// wmt15/16/17 with 2000, 3360 and 3920 rows (4 systems per segment) plus
/// smaller wmt18 and wmt19 test sets.
pub fn paper_shaped_corpus(seed: u64) -> Vec<CanonicalDaRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [
        (Dataset::Wmt15, 500),
        (Dataset::Wmt16, 840),
        (Dataset::Wmt17, 980),
        (Dataset::Wmt18, 140),
        (Dataset::Wmt19, 160),
    ]
    .into_iter()
    .flat_map(|(d, segments)| da_rows(&mut rng, &DaCorpusSpec::new(d, segments, 4)))
    .collect()
}

/// `segments` segments with 2 to `max_systems` systems each and human
/// scores on a 5-point grid, so ties and exact 25-point gaps occur.
pub fn darr_corpus(seed: u64, segments: usize, max_systems: usize) -> Vec<CanonicalDaRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = DaCorpusSpec {
        systems: (2, max_systems.max(2)),
        human: HumanModel::Overlap {
            noise: 10.0,
            quantum: Some(5.0),
        },
        lang_pairs: vec!["de-en".into(), "zh-en".into()],
        ..DaCorpusSpec::new(Dataset::Wmt18, segments, 2)
    };
    da_rows(&mut rng, &spec)
}

/// Flickr-style expert and caption files as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlickrFixture {
    pub expert: String,
    pub captions: String,
}

/// `images` images with 5 gold captions each and `judged` expert-scored
/// candidate captions.
pub fn flickr_fixture(seed: u64, images: usize, judged: usize) -> FlickrFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut captions = String::new();
    let mut golds: Vec<Vec<Vec<String>>> = Vec::new();
    for img in 0..images {
        let base = sentence(&mut rng, 6, 12);
        let refs: Vec<Vec<String>> = (0..5).map(|_| perturb(&mut rng, &base, 0.7, 0.2)).collect();
        for (k, r) in refs.iter().enumerate() {
            captions.push_str(&format!("{:05}.jpg#{k}\t{}\n", img, r.join(" ")));
        }
        golds.push(refs);
    }
    let mut expert = String::new();
    for j in 0..judged {
        let img = j % images;
        let source = golds[img].choose(&mut rng).expect("five references");
        let quality = rng.random_range(0.0..=1.0);
        let candidate = perturb(&mut rng, source, quality, 0.5).join(" ");
        let best = golds[img]
            .iter()
            .map(|r| token_overlap(&r.join(" "), &candidate))
            .fold(0.0, f64::max);
        let scores: Vec<String> = (0..3)
            .map(|_| {
                let s = 1.0 + 3.0 * best + rng.random_range(-0.6..=0.6);
                (s.round().clamp(1.0, 4.0) as u8).to_string()
            })
            .collect();
        captions.push_str(&format!("cand{j:05}\t{candidate}\n"));
        expert.push_str(&format!("{:05}.jpg\tcand{j:05}\t{}\n", img, scores.join("\t")));
    }
    FlickrFixture { expert, captions }
}
