//! Domain types shared across the toolkit: sentence pairs, the 8-feature
//! vector fed to the aggregator, feature masks, human-judged pairs and
//! evaluation reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ContractError;

/// A reference text and a candidate text, the atomic scoring unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    reference: String,
    candidate: String,
}

impl SentencePair {
    /// Both texts must be nonempty after trimming surrounding whitespace.
    pub fn new(
        reference: impl Into<String>,
        candidate: impl Into<String>,
    ) -> Result<Self, ContractError> {
        let reference = reference.into();
        let candidate = candidate.into();
        if reference.trim().is_empty() {
            return Err(ContractError::EmptyText("reference"));
        }
        if candidate.trim().is_empty() {
            return Err(ContractError::EmptyText("candidate"));
        }
        Ok(Self {
            reference,
            candidate,
        })
    }

    /// The pair (text, text), used for self-scores.
    pub fn identity(text: impl Into<String>) -> Result<Self, ContractError> {
        let text = text.into();
        Self::new(text.clone(), text)
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn candidate(&self) -> &str {
        &self.candidate
    }
}

/// MNLI class order on the wire and in [`FeatureVector`]:
/// 0 contradiction, 1 neutral, 2 entailment.
pub const MNLI_CLASSES: [&str; 3] = ["contradiction", "neutral", "entailment"];

/// Tolerance on the MNLI probability simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// The per-pair features consumed by the aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// STS-scale similarity, 0 to 5.
    pub sem_sim: f64,
    pub mnli_contradiction: f64,
    pub mnli_neutral: f64,
    pub mnli_entailment: f64,
    pub ppl_ref: f64,
    pub ppl_cand: f64,
    pub len_ref: u32,
    pub len_cand: u32,
}

/// One violated [`FeatureVector`] invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureViolation {
    NonFinite,
    SemSimRange,
    MnliProbabilityRange,
    MnliSimplex,
    PerplexityRange,
}

impl fmt::Display for FeatureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureViolation::NonFinite => "non-finite value",
            FeatureViolation::SemSimRange => "sem_sim range",
            FeatureViolation::MnliProbabilityRange => "mnli probability range",
            FeatureViolation::MnliSimplex => "mnli simplex",
            FeatureViolation::PerplexityRange => "perplexity range",
        })
    }
}

impl FeatureVector {
    pub fn mnli(&self) -> [f64; 3] {
        [
            self.mnli_contradiction,
            self.mnli_neutral,
            self.mnli_entailment,
        ]
    }

    /// Every violated invariant, empty when the vector is valid.
    pub fn validate(&self) -> Vec<FeatureViolation> {
        let mut out = Vec::new();
        let reals = [
            self.sem_sim,
            self.mnli_contradiction,
            self.mnli_neutral,
            self.mnli_entailment,
            self.ppl_ref,
            self.ppl_cand,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            out.push(FeatureViolation::NonFinite);
        }
        if !(0.0..=5.0).contains(&self.sem_sim) {
            out.push(FeatureViolation::SemSimRange);
        }
        let mnli = self.mnli();
        if mnli.iter().any(|p| !(0.0..=1.0).contains(p)) {
            out.push(FeatureViolation::MnliProbabilityRange);
        }
        let total: f64 = mnli.iter().sum();
        if !((total - 1.0).abs() <= SIMPLEX_TOLERANCE) {
            out.push(FeatureViolation::MnliSimplex);
        }
        if !(self.ppl_ref >= 1.0 && self.ppl_cand >= 1.0) {
            out.push(FeatureViolation::PerplexityRange);
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Feature groups in their fixed projection order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    /// Semantic similarity.
    #[serde(rename = "SS")]
    Ss,
    /// Logical inference (MNLI probabilities).
    #[serde(rename = "LI")]
    Li,
    /// Sentence intelligibility (perplexities).
    #[serde(rename = "SI")]
    Si,
    /// Word counts.
    #[serde(rename = "LEN")]
    Len,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Ss,
        FeatureGroup::Li,
        FeatureGroup::Si,
        FeatureGroup::Len,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureGroup::Ss => 1,
            FeatureGroup::Li => 3,
            FeatureGroup::Si => 2,
            FeatureGroup::Len => 2,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Ss => "SS",
            FeatureGroup::Li => "LI",
            FeatureGroup::Si => "SI",
            FeatureGroup::Len => "LEN",
        }
    }

    /// Names of the group's coordinates, in projection order.
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureGroup::Ss => &["sem_sim"],
            FeatureGroup::Li => &["mnli_contradiction", "mnli_neutral", "mnli_entailment"],
            FeatureGroup::Si => &["ppl_ref", "ppl_cand"],
            FeatureGroup::Len => &["len_ref", "len_cand"],
        }
    }

    fn values(self, fv: &FeatureVector) -> Vec<f64> {
        match self {
            FeatureGroup::Ss => vec![fv.sem_sim],
            FeatureGroup::Li => fv.mnli().to_vec(),
            FeatureGroup::Si => vec![fv.ppl_ref, fv.ppl_cand],
            FeatureGroup::Len => vec![f64::from(fv.len_ref), f64::from(fv.len_cand)],
        }
    }
}

impl FromStr for FeatureGroup {
    type Err = ContractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SS" => Ok(FeatureGroup::Ss),
            "LI" => Ok(FeatureGroup::Li),
            "SI" => Ok(FeatureGroup::Si),
            "LEN" => Ok(FeatureGroup::Len),
            other => Err(ContractError::UnknownFeatureGroup(other.to_string())),
        }
    }
}

/// A nonempty subset of feature groups.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureMask(u8);

impl FeatureMask {
    /// SS+LI+SI+LEN, the 8-dim configuration.
    pub const FULL: FeatureMask = FeatureMask(0b1111);
    /// SS+LI+SI, the 6-dim neural-only configuration.
    pub const NEURAL: FeatureMask = FeatureMask(0b0111);

    pub fn new(groups: &[FeatureGroup]) -> Result<Self, ContractError> {
        let bits = groups.iter().fold(0u8, |acc, g| acc | g.bit());
        if bits == 0 {
            return Err(ContractError::EmptyMask);
        }
        Ok(FeatureMask(bits))
    }

    pub fn contains(self, group: FeatureGroup) -> bool {
        self.0 & group.bit() != 0
    }

    pub fn groups(self) -> impl Iterator<Item = FeatureGroup> {
        FeatureGroup::ALL.into_iter().filter(move |g| self.contains(*g))
    }

    pub fn dim(self) -> usize {
        self.groups().map(FeatureGroup::dim).sum()
    }

    pub fn feature_names(self) -> Vec<&'static str> {
        self.groups().flat_map(|g| g.feature_names().iter().copied()).collect()
    }

    /// Whether projected coordinate `i` is a perplexity.
    pub fn perplexity_positions(self) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::new();
        for g in self.groups() {
            if g == FeatureGroup::Si {
                out.extend([offset, offset + 1]);
            }
            offset += g.dim();
        }
        out
    }

    /// The seven ablation configurations, in report order:
    /// LI, SI, SS, LI+SI, SS+LI, SS+SI, SS+LI+SI.
    pub fn ablation_preset() -> Vec<FeatureMask> {
        use FeatureGroup::*;
        [
            &[Li][..],
            &[Si],
            &[Ss],
            &[Li, Si],
            &[Ss, Li],
            &[Ss, Si],
            &[Ss, Li, Si],
        ]
        .iter()
        .map(|g| FeatureMask::new(g).expect("nonempty"))
        .collect()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.groups().map(FeatureGroup::name).collect();
        f.write_str(&names.join("+"))
    }
}

impl fmt::Debug for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureMask({self})")
    }
}

impl FromStr for FeatureMask {
    type Err = ContractError;

    /// Accepts group names separated by `,` or `+`, e.g. `SS,LI,SI`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let groups = s
            .split([',', '+'])
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<FeatureGroup>, _>>()?;
        FeatureMask::new(&groups)
    }
}

impl Serialize for FeatureMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.groups())
    }
}

impl<'de> Deserialize<'de> for FeatureMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let groups = Vec::<FeatureGroup>::deserialize(deserializer)?;
        FeatureMask::new(&groups).map_err(serde::de::Error::custom)
    }
}

/// Concatenates the included groups of `fv` in the fixed order SS, LI, SI, LEN.
pub fn project(fv: &FeatureVector, mask: FeatureMask) -> Vec<f64> {
    mask.groups().flat_map(|g| g.values(fv)).collect()
}

/// A human-scored pair; `human_score` is the DA average rescaled to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedPair {
    pub pair: SentencePair,
    pub human_score: f64,
    pub lang_pair: String,
    pub segment_id: u64,
    pub system_id: String,
}

/// A human-ordered candidate pair sharing one reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankedPair {
    pub reference: String,
    pub better_candidate: String,
    pub worse_candidate: String,
    pub lang_pair: String,
    pub segment_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    AbsPearson,
    KendallWmt,
    KendallTauB,
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatisticKind::AbsPearson => "|r|",
            StatisticKind::KendallWmt => "tau (daRR)",
            StatisticKind::KendallTauB => "tau-b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStatistic {
    pub statistic: f64,
    pub n: usize,
}

/// Correlation statistics per language pair plus the pooled aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub statistic_kind: StatisticKind,
    pub per_lang: BTreeMap<String, GroupStatistic>,
    pub aggregate: GroupStatistic,
}
