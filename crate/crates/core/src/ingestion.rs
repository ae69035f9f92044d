//! Human-judgment datasets: the canonical DA TSV, train/test splits, DA
//! segment grouping and Flickr8K-style expert caption judgments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::correlation::{DaEntry, DaSegmentGroup};
use crate::error::IngestError;
use crate::model::{JudgedPair, SentencePair};

pub const CANONICAL_COLUMNS: [&str; 8] = [
    "dataset",
    "lang_pair",
    "segment_id",
    "system_id",
    "reference",
    "candidate",
    "human_score",
    "n_annotators",
];

/// Exact first line of a canonical TSV file.
pub fn canonical_header() -> String {
    CANONICAL_COLUMNS.join("\t")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Wmt15,
    Wmt16,
    Wmt17,
    Wmt18,
    Wmt19,
}

impl Dataset {
    pub const ALL: [Dataset; 5] = [Dataset::Wmt15, Dataset::Wmt16, Dataset::Wmt17, Dataset::Wmt18, Dataset::Wmt19];

    pub fn tag(self) -> &'static str {
        match self {
            Dataset::Wmt15 => "wmt15",
            Dataset::Wmt16 => "wmt16",
            Dataset::Wmt17 => "wmt17",
            Dataset::Wmt18 => "wmt18",
            Dataset::Wmt19 => "wmt19",
        }
    }

    /// Datasets whose rows ever enter a training set.
    pub fn is_training_source(self) -> bool {
        self <= Dataset::Wmt17
    }

    /// Training sources strictly earlier than `self`.
    pub fn training_sources(self) -> Vec<Dataset> {
        Dataset::ALL
            .into_iter()
            .filter(|d| d.is_training_source() && *d < self)
            .collect()
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| format!("unknown dataset {s:?} (expected wmt15..wmt19)"))
    }
}

/// One row of the canonical DA file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalDaRow {
    pub dataset: Dataset,
    pub lang_pair: String,
    pub segment_id: u64,
    pub system_id: String,
    pub reference: String,
    pub candidate: String,
    /// Annotator average on the 0-100 scale.
    pub human_score: f64,
    pub n_annotators: u32,
}

impl CanonicalDaRow {
    pub fn pair(&self) -> SentencePair {
        SentencePair::new(self.reference.clone(), self.candidate.clone()).expect("validated row texts are nonblank")
    }

    /// First violated invariant as (column, message).
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        check_lang_pair(&self.lang_pair).map_err(|m| ("lang_pair", m))?;
        for (col, v) in [
            ("system_id", &self.system_id),
            ("reference", &self.reference),
            ("candidate", &self.candidate),
        ] {
            if v.trim().is_empty() {
                return Err((col, "empty field".into()));
            }
            if v.contains(['\t', '\n', '\r']) {
                return Err((col, "embedded tab or newline".into()));
            }
        }
        if self.lang_pair.contains(['\t', '\n', '\r']) {
            return Err(("lang_pair", "embedded tab or newline".into()));
        }
        if !(0.0..=100.0).contains(&self.human_score) {
            return Err(("human_score", format!("{} outside [0, 100]", self.human_score)));
        }
        if self.n_annotators == 0 {
            return Err(("n_annotators", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_judged(&self) -> JudgedPair {
        JudgedPair {
            pair: self.pair(),
            human_score: self.human_score / 100.0,
            lang_pair: self.lang_pair.clone(),
            segment_id: self.segment_id,
            system_id: self.system_id.clone(),
        }
    }
}

fn check_lang_pair(lp: &str) -> Result<(), String> {
    match lp.split_once('-') {
        Some((src, "en")) if !src.is_empty() && src != "en" && !src.contains('-') => Ok(()),
        Some((_, tgt)) if tgt != "en" => Err(format!("{lp:?}: target language must be en")),
        _ => Err(format!("{lp:?} is not a src-en language pair")),
    }
}

/// Parses canonical TSV text; `origin` names the source in errors.
pub fn parse_canonical_str(text: &str, origin: &str) -> Result<Vec<CanonicalDaRow>, IngestError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim_end_matches('\r')).unwrap_or("");
    if header != canonical_header() {
        return Err(IngestError::Header {
            path: origin.to_string(),
            message: format!("expected {:?}, found {header:?}", canonical_header()),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let err = |column: &str, message: String| IngestError::Row {
            path: origin.to_string(),
            line: lineno,
            column: column.to_string(),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != CANONICAL_COLUMNS.len() {
            return Err(err(
                "*",
                format!("expected {} tab-separated fields, found {}", CANONICAL_COLUMNS.len(), fields.len()),
            ));
        }
        let row = CanonicalDaRow {
            dataset: fields[0].parse().map_err(|m| err("dataset", m))?,
            lang_pair: fields[1].to_string(),
            segment_id: fields[2].parse().map_err(|e| err("segment_id", format!("{:?}: {e}", fields[2])))?,
            system_id: fields[3].to_string(),
            reference: fields[4].to_string(),
            candidate: fields[5].to_string(),
            human_score: fields[6]
                .parse()
                .map_err(|e| err("human_score", format!("{:?}: {e}", fields[6])))?,
            n_annotators: fields[7]
                .parse()
                .map_err(|e| err("n_annotators", format!("{:?}: {e}", fields[7])))?,
        };
        row.check().map_err(|(col, m)| err(col, m))?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_canonical_tsv(path: impl AsRef<Path>) -> Result<Vec<CanonicalDaRow>, IngestError> {
    let path = path.as_ref();
    parse_canonical_str(&read_to_string(path)?, &path.display().to_string())
}

/// Inverse of [`parse_canonical_str`]; rows are validated first.
pub fn serialize_canonical(rows: &[CanonicalDaRow]) -> Result<String, IngestError> {
    let mut out = canonical_header();
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        r.check().map_err(|(column, message)| IngestError::Row {
            path: "<serialize>".into(),
            line: i + 2,
            column: column.to_string(),
            message,
        })?;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.dataset, r.lang_pair, r.segment_id, r.system_id, r.reference, r.candidate, r.human_score, r.n_annotators
        ));
    }
    Ok(out)
}

pub fn write_canonical_tsv(path: impl AsRef<Path>, rows: &[CanonicalDaRow]) -> Result<(), IngestError> {
    let path = path.as_ref();
    fs::write(path, serialize_canonical(rows)?).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Human scores rescaled to [0, 1].
    pub train: Vec<JudgedPair>,
    pub test: Vec<JudgedPair>,
}

/// Test = rows of `test_dataset`; train = rows of every earlier dataset
/// among wmt15, wmt16 and wmt17.
pub fn build_split(rows: &[CanonicalDaRow], test_dataset: Dataset) -> Result<Split, IngestError> {
    let sources = test_dataset.training_sources();
    if sources.is_empty() {
        return Err(IngestError::Split(format!("no training data precedes {test_dataset}")));
    }
    let train: Vec<JudgedPair> = rows
        .iter()
        .filter(|r| sources.contains(&r.dataset))
        .map(CanonicalDaRow::to_judged)
        .collect();
    let test: Vec<JudgedPair> = rows
        .iter()
        .filter(|r| r.dataset == test_dataset)
        .map(CanonicalDaRow::to_judged)
        .collect();
    if train.is_empty() {
        let tags: Vec<&str> = sources.iter().map(|d| d.tag()).collect();
        return Err(IngestError::Split(format!("no rows from {} for training", tags.join(", "))));
    }
    if test.is_empty() {
        return Err(IngestError::Split(format!("no rows from {test_dataset} for testing")));
    }
    Ok(Split { train, test })
}

/// Groups rows by (dataset, lang_pair, segment_id), in first-seen order.
pub fn rows_to_da_groups(rows: &[CanonicalDaRow]) -> Result<Vec<DaSegmentGroup>, IngestError> {
    let mut index: HashMap<(Dataset, &str, u64), usize> = HashMap::new();
    let mut systems: HashSet<(Dataset, &str, u64, &str)> = HashSet::new();
    let mut groups: Vec<DaSegmentGroup> = Vec::new();
    for r in rows {
        if !systems.insert((r.dataset, &r.lang_pair, r.segment_id, &r.system_id)) {
            return Err(IngestError::Duplicate {
                dataset: r.dataset.to_string(),
                lang_pair: r.lang_pair.clone(),
                segment_id: r.segment_id,
                system_id: r.system_id.clone(),
            });
        }
        let slot = *index.entry((r.dataset, &r.lang_pair, r.segment_id)).or_insert_with(|| {
            groups.push(DaSegmentGroup {
                dataset: r.dataset.to_string(),
                lang_pair: r.lang_pair.clone(),
                segment_id: r.segment_id,
                reference: r.reference.clone(),
                entries: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].entries.push(DaEntry {
            system_id: r.system_id.clone(),
            candidate: r.candidate.clone(),
            human_score: r.human_score,
        });
    }
    Ok(groups)
}

pub const CAPTION_REFERENCES: usize = 5;
pub const EXPERT_SCORES: usize = 3;

/// One expert-judged caption with its image's gold captions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionJudgment {
    pub image_id: String,
    pub caption_id: String,
    pub candidate_caption: String,
    pub references: Vec<String>,
    pub expert_scores: [u8; EXPERT_SCORES],
}

impl CaptionJudgment {
    /// Mean of the three expert scores.
    pub fn human_target(&self) -> f64 {
        self.expert_scores.iter().map(|&s| f64::from(s)).sum::<f64>() / EXPERT_SCORES as f64
    }
}

/// `captions`: `caption_id<TAB>text` per line, where caption ids are
/// `<image_id>#<k>`. `expert`: `image_id caption_id s1 s2 s3` per line,
/// whitespace-separated, scores in 1..=4. An image's references are its
/// captions `#0` through `#4`.
pub fn parse_flickr_str(expert: &str, captions: &str, origin: &str) -> Result<Vec<CaptionJudgment>, IngestError> {
    let mut texts: HashMap<&str, &str> = HashMap::new();
    for (i, line) in captions.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, text)) = line.split_once('\t') else {
            return Err(IngestError::Row {
                path: format!("{origin} (captions)"),
                line: i + 1,
                column: "caption_id".into(),
                message: "expected caption_id<TAB>text".into(),
            });
        };
        if text.trim().is_empty() {
            return Err(IngestError::Row {
                path: format!("{origin} (captions)"),
                line: i + 1,
                column: "text".into(),
                message: "empty caption".into(),
            });
        }
        texts.insert(id.trim(), text.trim());
    }

    let mut out = Vec::new();
    for (i, line) in expert.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |column: &str, message: String| IngestError::Row {
            path: format!("{origin} (expert)"),
            line: i + 1,
            column: column.to_string(),
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 + EXPERT_SCORES {
            return Err(err(
                "*",
                format!("expected image_id, caption_id and {EXPERT_SCORES} scores, found {} fields", fields.len()),
            ));
        }
        let mut expert_scores = [0u8; EXPERT_SCORES];
        for (k, s) in fields[2..].iter().enumerate() {
            let v: u8 = s.parse().map_err(|e| err("score", format!("{s:?}: {e}")))?;
            if !(1..=4).contains(&v) {
                return Err(err("score", format!("{v} outside [1, 4]")));
            }
            expert_scores[k] = v;
        }
        let (image_id, caption_id) = (fields[0], fields[1]);
        let candidate = texts
            .get(caption_id)
            .ok_or_else(|| IngestError::Join(format!("line {}: unknown caption id {caption_id}", i + 1)))?;
        let references = (0..CAPTION_REFERENCES)
            .map(|k| {
                let id = format!("{image_id}#{k}");
                texts
                    .get(id.as_str())
                    .map(|t| t.to_string())
                    .ok_or_else(|| IngestError::Join(format!("line {}: missing reference caption {id}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(CaptionJudgment {
            image_id: image_id.to_string(),
            caption_id: caption_id.to_string(),
            candidate_caption: candidate.to_string(),
            references,
            expert_scores,
        });
    }
    Ok(out)
}

pub fn parse_flickr_judgments(
    expert_file: impl AsRef<Path>,
    captions_file: impl AsRef<Path>,
) -> Result<Vec<CaptionJudgment>, IngestError> {
    let expert_path = expert_file.as_ref();
    let expert = read_to_string(expert_path)?;
    let captions = read_to_string(captions_file.as_ref())?;
    parse_flickr_str(&expert, &captions, &expert_path.display().to_string())
}

/// Pairs for feature extraction: either a canonical DA file or a
/// two-column `reference<TAB>candidate` file with that header.
pub fn parse_pairs_str(text: &str, origin: &str) -> Result<Vec<SentencePair>, IngestError> {
    let header = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if header == canonical_header() {
        return Ok(parse_canonical_str(text, origin)?.iter().map(CanonicalDaRow::pair).collect());
    }
    if header != "reference\tcandidate" {
        return Err(IngestError::Header {
            path: origin.to_string(),
            message: format!("expected the canonical header or \"reference\\tcandidate\", found {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let err = |column: &str, message: String| IngestError::Row {
            path: origin.to_string(),
            line: i + 1,
            column: column.to_string(),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(err("*", format!("expected 2 tab-separated fields, found {}", fields.len())));
        }
        let pair = SentencePair::new(fields[0], fields[1]).map_err(|e| {
            err(if fields[0].trim().is_empty() { "reference" } else { "candidate" }, e.to_string())
        })?;
        out.push(pair);
    }
    Ok(out)
}

pub fn parse_pairs_tsv(path: impl AsRef<Path>) -> Result<Vec<SentencePair>, IngestError> {
    let path = path.as_ref();
    parse_pairs_str(&read_to_string(path)?, &path.display().to_string())
}

/// Row counts per dataset.
pub fn dataset_counts(rows: &[CanonicalDaRow]) -> BTreeMap<Dataset, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.dataset).or_default() += 1;
    }
    m
}
