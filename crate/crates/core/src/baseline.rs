//! Sentence-level BLEU and ROUGE-L, the n-gram baselines reported beside
//! every learned metric, plus the canonical tokenizer shared with word counts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Identifies the tokenizer behaviour; recorded in feature-cache headers.
pub const TOKENIZER_VERSION: &str = "ws-punct-v1";

/// Lowercased word tokens produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

/// Characters stripped from both ends of every token: ASCII punctuation plus
/// typographic quotes, dashes, ellipsis and inverted marks.
pub fn is_edge_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{00AB}' | '\u{00BB}'
                | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00BF}' | '\u{00A1}'
        )
}

/// Lowercases, splits on Unicode whitespace and strips edge punctuation;
/// tokens that are pure punctuation disappear.
pub fn tokenize(text: &str) -> TokenSequence {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_edge_punctuation).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Word count under the canonical tokenizer.
pub fn count_words(text: &str) -> usize {
    tokenize(text).len()
}

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_length(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (a, b) = (a.tokens(), b.tokens());
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// ROUGE-L F1: precision LCS/|candidate|, recall LCS/|reference|.
/// Zero when either side is empty.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(candidate, reference);
    // 2PR/(P+R) reduces to 2·LCS/(|c|+|r|)
    (2 * lcs) as f64 / (candidate.len() + reference.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    Off,
    /// For orders n ≥ 2 whose clipped match count is zero, use
    /// (0 + 1) / (total + 1) instead of 0.
    #[default]
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::AddOne,
        }
    }
}

/// Clipped matches and candidate n-gram total for one order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramMatch {
    pub order: usize,
    pub clipped: u64,
    pub total: u64,
}

/// Sufficient statistics for sentence BLEU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    /// Only orders for which the candidate has at least one n-gram.
    pub matches: Vec<NgramMatch>,
    pub candidate_len: usize,
    /// Closest reference length, ties broken toward the shorter one.
    pub effective_ref_len: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Collects clipped n-gram counts against the per-n-gram maximum reference
/// count, for orders 1..=max_n that the candidate is long enough to contain.
///
/// Panics if `max_n` is zero.
pub fn bleu_stats(candidate: &TokenSequence, references: &[TokenSequence], max_n: usize) -> BleuStats {
    assert!(max_n >= 1, "max_n must be at least 1");
    let cand = candidate.tokens();
    let mut matches = Vec::new();
    for n in 1..=max_n.min(cand.len()) {
        let cand_counts = ngram_counts(cand, n);
        let mut max_ref: HashMap<&[String], u64> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r.tokens(), n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped = cand_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let total = (cand.len() + 1 - n) as u64;
        matches.push(NgramMatch {
            order: n,
            clipped,
            total,
        });
    }
    let c = cand.len();
    let effective_ref_len = references
        .iter()
        .map(TokenSequence::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0);
    BleuStats {
        matches,
        candidate_len: c,
        effective_ref_len,
    }
}

impl BleuStats {
    /// Precision of each included order as (numerator, denominator) after
    /// smoothing; `None` when an unsmoothed zero forces the score to 0.
    pub fn precisions(&self, smoothing: Smoothing) -> Option<Vec<(u64, u64)>> {
        self.matches
            .iter()
            .map(|m| match (m.clipped, smoothing) {
                (0, Smoothing::AddOne) if m.order >= 2 => Some((1, m.total + 1)),
                (0, _) => None,
                (k, _) => Some((k, m.total)),
            })
            .collect()
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len, self.effective_ref_len);
        if c == 0 {
            0.0
        } else if c < r {
            (1.0 - r as f64 / c as f64).exp()
        } else {
            1.0
        }
    }

    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.candidate_len == 0 || self.matches.is_empty() {
            return 0.0;
        }
        let Some(precisions) = self.precisions(smoothing) else {
            return 0.0;
        };
        let product: f64 = precisions.iter().map(|&(k, t)| k as f64 / t as f64).product();
        let geo = product.powf(1.0 / precisions.len() as f64);
        (geo * self.brevity_penalty()).clamp(0.0, 1.0)
    }
}

/// Sentence BLEU with uniform weights over the candidate's effective order
/// `min(max_n, |candidate|)`. An empty candidate or reference list scores 0.
pub fn sentence_bleu(candidate: &TokenSequence, references: &[TokenSequence], config: BleuConfig) -> f64 {
    if candidate.is_empty() || references.is_empty() {
        return 0.0;
    }
    bleu_stats(candidate, references, config.max_n).score(config.smoothing)
}
