//! Correlation statistics and the three evaluation protocols: absolute
//! Pearson on direct assessments, WMT-style Kendall tau on relative rankings
//! derived from DA gaps, and tau-b on averaged caption judgments.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, StatsError};
use crate::model::{EvalReport, GroupStatistic, RankedPair, StatisticKind};

/// Gap (on the 0-100 DA scale) a pair must strictly exceed to be ranked.
pub const DARR_THRESHOLD: f64 = 25.0;

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFew {
            need: 2,
            got: xs.len(),
        });
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Sample Pearson correlation (two-pass, centred).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_lengths(xs, ys)?;
    if is_constant(xs) {
        return Err(StatsError::Constant("xs"));
    }
    if is_constant(ys) {
        return Err(StatsError::Constant("ys"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Number of pairs within runs of equal adjacent values.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` with a stable merge sort and returns the number of inversions.
fn merge_sort_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += merge_sort_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau-b with tie corrections, in O(n log n) (Knight's algorithm).
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_lengths(xs, ys)?;
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(StatsError::Constant("NaN input"));
    }
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs_sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tied_x = tied_pairs(&xs_sorted);
    let tied_xy = tied_pairs(&pairs);

    let mut y_order: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; y_order.len()];
    let swaps = merge_sort_swaps(&mut y_order, &mut buf);
    let tied_y = tied_pairs(&y_order);

    let all = n * (n - 1) / 2;
    if all == tied_x {
        return Err(StatsError::AllTied("xs"));
    }
    if all == tied_y {
        return Err(StatsError::AllTied("ys"));
    }
    let numerator = all as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denominator = ((all - tied_x) as f64 * (all - tied_y) as f64).sqrt();
    Ok((numerator / denominator).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaEntry {
    pub system_id: String,
    pub candidate: String,
    /// Averaged DA score on the 0-100 scale.
    pub human_score: f64,
}

/// All systems' outputs for one source segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaSegmentGroup {
    pub dataset: String,
    pub lang_pair: String,
    pub segment_id: u64,
    pub reference: String,
    pub entries: Vec<DaEntry>,
}

/// Emits a ranked pair for every within-group pair whose DA gap strictly
/// exceeds `threshold`. Entries with identical candidate text cannot be
/// told apart by any metric and are never paired.
pub fn da_to_relative_ranking(
    groups: &[DaSegmentGroup],
    threshold: f64,
) -> Result<Vec<RankedPair>, ContractError> {
    if !(threshold > 0.0) {
        return Err(ContractError::InvalidConfig(format!(
            "daRR threshold must be positive, got {threshold}"
        )));
    }
    let mut out = Vec::new();
    for g in groups {
        for (i, a) in g.entries.iter().enumerate() {
            for b in &g.entries[i + 1..] {
                if (a.human_score - b.human_score).abs() <= threshold || a.candidate == b.candidate {
                    continue;
                }
                let (better, worse) = if a.human_score > b.human_score {
                    (a, b)
                } else {
                    (b, a)
                };
                out.push(RankedPair {
                    reference: g.reference.clone(),
                    better_candidate: better.candidate.clone(),
                    worse_candidate: worse.candidate.clone(),
                    lang_pair: g.lang_pair.clone(),
                    segment_id: g.segment_id,
                });
            }
        }
    }
    Ok(out)
}

/// Identifies one scored candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScoreKey {
    pub lang_pair: String,
    pub segment_id: u64,
    pub candidate: String,
}

impl ScoreKey {
    pub fn new(lang_pair: &str, segment_id: u64, candidate: &str) -> Self {
        Self {
            lang_pair: lang_pair.to_string(),
            segment_id,
            candidate: candidate.to_string(),
        }
    }
}

pub type MetricScores = HashMap<ScoreKey, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RankAgreement {
    pub concordant: usize,
    pub discordant: usize,
}

impl RankAgreement {
    pub fn tau(&self) -> Result<f64, StatsError> {
        let total = self.concordant + self.discordant;
        if total == 0 {
            return Err(StatsError::EmptyRanking);
        }
        Ok((self.concordant as f64 - self.discordant as f64) / total as f64)
    }
}

/// Counts concordant pairs (metric strictly prefers the better candidate);
/// metric ties count as discordant.
pub fn rank_agreement(ranked: &[RankedPair], scores: &MetricScores) -> Result<RankAgreement, StatsError> {
    let lookup = |rp: &RankedPair, cand: &str| {
        scores
            .get(&ScoreKey::new(&rp.lang_pair, rp.segment_id, cand))
            .copied()
            .ok_or_else(|| StatsError::MissingScore {
                lang_pair: rp.lang_pair.clone(),
                segment_id: rp.segment_id,
                candidate: cand.to_string(),
            })
    };
    let mut agreement = RankAgreement::default();
    for rp in ranked {
        let better = lookup(rp, &rp.better_candidate)?;
        let worse = lookup(rp, &rp.worse_candidate)?;
        if better > worse {
            agreement.concordant += 1;
        } else {
            agreement.discordant += 1;
        }
    }
    Ok(agreement)
}

/// WMT relative-ranking Kendall tau: (C − D) / (C + D).
pub fn kendall_wmt(ranked: &[RankedPair], scores: &MetricScores) -> Result<f64, StatsError> {
    if ranked.is_empty() {
        return Err(StatsError::EmptyRanking);
    }
    rank_agreement(ranked, scores)?.tau()
}

/// One scored item: its group label (language pair), human and metric scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub group: String,
    pub human: f64,
    pub metric: f64,
}

fn in_group(group: &str, e: StatsError) -> StatsError {
    StatsError::InGroup {
        group: group.to_string(),
        source: Box::new(e),
    }
}

fn grouped_report(
    items: &[ScoredItem],
    kind: StatisticKind,
    stat: impl Fn(&[f64], &[f64]) -> Result<f64, StatsError>,
) -> Result<EvalReport, StatsError> {
    let mut by_group: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for it in items {
        let e = by_group.entry(&it.group).or_default();
        e.0.push(it.human);
        e.1.push(it.metric);
    }
    let mut per_lang = BTreeMap::new();
    for (group, (h, m)) in &by_group {
        let statistic = stat(h, m).map_err(|e| in_group(group, e))?;
        per_lang.insert(group.to_string(), GroupStatistic { statistic, n: h.len() });
    }
    let human: Vec<f64> = items.iter().map(|i| i.human).collect();
    let metric: Vec<f64> = items.iter().map(|i| i.metric).collect();
    let aggregate = GroupStatistic {
        statistic: stat(&human, &metric).map_err(|e| in_group("AVG", e))?,
        n: items.len(),
    };
    Ok(EvalReport {
        statistic_kind: kind,
        per_lang,
        aggregate,
    })
}

/// Per-language |Pearson| and |Pearson| over the pooled union.
pub fn evaluate_da(items: &[ScoredItem]) -> Result<EvalReport, StatsError> {
    grouped_report(items, StatisticKind::AbsPearson, |h, m| {
        pearson(h, m).map(f64::abs)
    })
}

/// Per-group and pooled tau-b.
pub fn evaluate_tau_b(items: &[ScoredItem]) -> Result<EvalReport, StatsError> {
    grouped_report(items, StatisticKind::KendallTauB, kendall_tau_b)
}

/// Per-language and pooled WMT Kendall tau over ranked pairs.
pub fn evaluate_darr(ranked: &[RankedPair], scores: &MetricScores) -> Result<EvalReport, StatsError> {
    let mut by_lang: BTreeMap<&str, Vec<RankedPair>> = BTreeMap::new();
    for rp in ranked {
        by_lang.entry(&rp.lang_pair).or_default().push(rp.clone());
    }
    let mut per_lang = BTreeMap::new();
    for (lang, pairs) in &by_lang {
        let statistic = kendall_wmt(pairs, scores).map_err(|e| in_group(lang, e))?;
        per_lang.insert(lang.to_string(), GroupStatistic { statistic, n: pairs.len() });
    }
    let aggregate = GroupStatistic {
        statistic: kendall_wmt(ranked, scores).map_err(|e| in_group("AVG", e))?,
        n: ranked.len(),
    };
    Ok(EvalReport {
        statistic_kind: StatisticKind::KendallWmt,
        per_lang,
        aggregate,
    })
}

/// Evaluation protocol selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// |Pearson| against DA scores.
    Pearson,
    /// Kendall tau over DA-derived relative rankings.
    Darr,
    /// Tau-b against averaged judgments.
    TauB,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Pearson => "pearson",
            Protocol::Darr => "darr",
            Protocol::TauB => "tau_b",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = ContractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pearson" | "da" => Ok(Protocol::Pearson),
            "darr" => Ok(Protocol::Darr),
            "tau_b" | "taub" => Ok(Protocol::TauB),
            other => Err(ContractError::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

/// A candidate with its human judgment (native scale) and metric score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub group: String,
    pub segment_id: u64,
    pub candidate: String,
    pub human: f64,
    pub metric: f64,
}

/// Runs `protocol` over `items`. For daRR, items sharing (group, segment_id)
/// form one segment and `human` must be on the 0-100 scale.
pub fn evaluate(protocol: Protocol, items: &[EvalItem]) -> Result<EvalReport, StatsError> {
    let scored = || -> Vec<ScoredItem> {
        items
            .iter()
            .map(|i| ScoredItem {
                group: i.group.clone(),
                human: i.human,
                metric: i.metric,
            })
            .collect()
    };
    match protocol {
        Protocol::Pearson => evaluate_da(&scored()),
        Protocol::TauB => evaluate_tau_b(&scored()),
        Protocol::Darr => {
            let mut segments: BTreeMap<(&str, u64), DaSegmentGroup> = BTreeMap::new();
            let mut scores = MetricScores::new();
            for (n, it) in items.iter().enumerate() {
                segments
                    .entry((&it.group, it.segment_id))
                    .or_insert_with(|| DaSegmentGroup {
                        dataset: String::new(),
                        lang_pair: it.group.clone(),
                        segment_id: it.segment_id,
                        reference: String::new(),
                        entries: Vec::new(),
                    })
                    .entries
                    .push(DaEntry {
                        system_id: n.to_string(),
                        candidate: it.candidate.clone(),
                        human_score: it.human,
                    });
                scores.insert(ScoreKey::new(&it.group, it.segment_id, &it.candidate), it.metric);
            }
            let groups: Vec<DaSegmentGroup> = segments.into_values().collect();
            let ranked = da_to_relative_ranking(&groups, DARR_THRESHOLD).expect("positive threshold");
            evaluate_darr(&ranked, &scores)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(scores: &[f64]) -> DaSegmentGroup {
        DaSegmentGroup {
            dataset: "wmt18".into(),
            lang_pair: "de-en".into(),
            segment_id: 1,
            reference: "ref".into(),
            entries: scores
                .iter()
                .enumerate()
                .map(|(i, &s)| DaEntry {
                    system_id: format!("sys{i}"),
                    candidate: format!("cand {i}"),
                    human_score: s,
                })
                .collect(),
        }
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // cov 4, var 5 and 5
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pearson_degenerate_inputs() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(StatsError::TooFew { need: 2, got: 1 }));
        assert_eq!(pearson(&[0.1; 3], &[1.0, 2.0, 3.0]), Err(StatsError::Constant("xs")));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[7.0; 3]), Err(StatsError::Constant("ys")));
    }

    #[test]
    fn tau_b_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(kendall_tau_b(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&x, &rev).unwrap(), -1.0);
        // pairs over ([1,2,3,4],[1,2,2,4]): C = 5, D = 0, one tie in y only
        let expected = 5.0 / (6.0f64 * 5.0).sqrt();
        let got = kendall_tau_b(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert_eq!(kendall_tau_b(&[2.0; 4], &x[..4]), Err(StatsError::AllTied("xs")));
        assert_eq!(kendall_tau_b(&x[..4], &[2.0; 4]), Err(StatsError::AllTied("ys")));
    }

    #[test]
    fn ranking_threshold_is_strict() {
        assert_eq!(da_to_relative_ranking(&[group(&[80.0, 40.0])], 25.0).unwrap().len(), 1);
        assert_eq!(da_to_relative_ranking(&[group(&[60.0, 35.0])], 25.0).unwrap().len(), 0);
        let three = da_to_relative_ranking(&[group(&[100.0, 70.0, 40.0])], 25.0).unwrap();
        assert_eq!(three.len(), 3);
        assert!(da_to_relative_ranking(&[group(&[1.0])], 0.0).is_err());
    }

    #[test]
    fn ranking_orients_better_candidate() {
        let rp = &da_to_relative_ranking(&[group(&[10.0, 90.0])], 25.0).unwrap()[0];
        assert_eq!(rp.better_candidate, "cand 1");
        assert_eq!(rp.worse_candidate, "cand 0");
    }

    #[test]
    fn identical_candidates_are_not_ranked() {
        let mut g = group(&[90.0, 10.0]);
        g.entries[1].candidate = g.entries[0].candidate.clone();
        assert!(da_to_relative_ranking(&[g], 25.0).unwrap().is_empty());
    }

    fn ranked_with_scores(metric: &[(f64, f64)]) -> (Vec<RankedPair>, MetricScores) {
        let mut ranked = Vec::new();
        let mut scores = MetricScores::new();
        for (i, &(b, w)) in metric.iter().enumerate() {
            let rp = RankedPair {
                reference: "r".into(),
                better_candidate: format!("b{i}"),
                worse_candidate: format!("w{i}"),
                lang_pair: "de-en".into(),
                segment_id: i as u64,
            };
            scores.insert(ScoreKey::new("de-en", i as u64, &rp.better_candidate), b);
            scores.insert(ScoreKey::new("de-en", i as u64, &rp.worse_candidate), w);
            ranked.push(rp);
        }
        (ranked, scores)
    }

    #[test]
    fn kendall_wmt_examples() {
        let (r, s) = ranked_with_scores(&[(1.0, 0.0); 5]);
        assert_eq!(kendall_wmt(&r, &s).unwrap(), 1.0);
        let (r, s) = ranked_with_scores(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(kendall_wmt(&r, &s).unwrap(), 0.5);
        let (r, s) = ranked_with_scores(&[(1.0, 0.0), (1.0, 0.0), (0.5, 0.5), (0.5, 0.5)]);
        assert_eq!(kendall_wmt(&r, &s).unwrap(), 0.0);
    }

    #[test]
    fn kendall_wmt_errors() {
        assert_eq!(kendall_wmt(&[], &MetricScores::new()), Err(StatsError::EmptyRanking));
        let (r, mut s) = ranked_with_scores(&[(1.0, 0.0)]);
        s.remove(&ScoreKey::new("de-en", 0, "w0"));
        match kendall_wmt(&r, &s) {
            Err(StatsError::MissingScore { candidate, .. }) => assert_eq!(candidate, "w0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn evaluate_da_absolute_values() {
        let items: Vec<ScoredItem> = (0..10)
            .map(|i| ScoredItem {
                group: "cs-en".into(),
                human: i as f64 / 10.0,
                metric: 1.0 - i as f64 / 10.0,
            })
            .collect();
        let report = evaluate_da(&items).unwrap();
        assert!((report.aggregate.statistic - 1.0).abs() < 1e-12);
        assert_eq!(report.per_lang["cs-en"].n, 10);
    }

    #[test]
    fn evaluate_da_names_degenerate_group() {
        let mut items = vec![
            ScoredItem { group: "a".into(), human: 0.1, metric: 0.2 },
            ScoredItem { group: "a".into(), human: 0.3, metric: 0.1 },
        ];
        items.push(ScoredItem { group: "b".into(), human: 0.5, metric: 0.5 });
        match evaluate_da(&items) {
            Err(StatsError::InGroup { group, .. }) => assert_eq!(group, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
