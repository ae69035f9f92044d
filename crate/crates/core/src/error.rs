use std::path::PathBuf;

use thiserror::Error;

use crate::model::FeatureViolation;

/// Violated preconditions on domain values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("{0} text is empty")]
    EmptyText(&'static str),
    #[error("feature mask must include at least one group")]
    EmptyMask,
    #[error("unknown feature group `{0}` (expected SS, LI, SI or LEN)")]
    UnknownFeatureGroup(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Degenerate inputs to the correlation statistics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("{0} is constant")]
    Constant(&'static str),
    #[error("all pairs are tied in {0}")]
    AllTied(&'static str),
    #[error("no ranked pairs to evaluate")]
    EmptyRanking,
    #[error("no metric score for candidate {candidate:?} (lang {lang_pair}, segment {segment_id})")]
    MissingScore {
        lang_pair: String,
        segment_id: u64,
        candidate: String,
    },
    #[error("group {group}: {source}")]
    InGroup {
        group: String,
        #[source]
        source: Box<StatsError>,
    },
}

/// Failures while fitting or applying an aggregator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("normal equations are singular even with ridge regularization")]
    Singular,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("row {index}: invalid features ({})", join_violations(.violations))]
    InvalidFeatures {
        index: usize,
        violations: Vec<FeatureViolation>,
    },
    #[error("row {index}: target {value} outside [0, 1]")]
    TargetRange { index: usize, value: f64 },
    #[error(transparent)]
    Contract(#[from] ContractError),
}

fn join_violations(v: &[FeatureViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Failures while acquiring features.
#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("transport failure after {attempts} attempts ({message}); unfetched pairs: {}", .unfetched.join(", "))]
    Transport {
        attempts: u32,
        message: String,
        unfetched: Vec<String>,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("offline and not cached: {}", .0.join(", "))]
    CacheMiss(Vec<String>),
    #[error("extractor version mismatch: cache has {expected}, got {found}")]
    VersionMismatch { expected: String, found: String },
    #[error("pair {digest}: invalid features ({})", join_violations(.violations))]
    InvalidFeatures {
        digest: String,
        violations: Vec<FeatureViolation>,
    },
    #[error("feature cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while parsing judgment datasets or building splits.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: malformed header: {message}")]
    Header { path: String, message: String },
    #[error("{path}:{line}: column {column}: {message}")]
    Row {
        path: String,
        line: usize,
        column: String,
        message: String,
    },
    #[error("duplicate entry for system {system_id} in {dataset}/{lang_pair} segment {segment_id}")]
    Duplicate {
        dataset: String,
        lang_pair: String,
        segment_id: u64,
        system_id: String,
    },
    #[error("split error: {0}")]
    Split(String),
    #[error("join error: {0}")]
    Join(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Top-level error carrying the process exit code for the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    /// 1 usage, 2 data, 3 extraction, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Contract(_) => 1,
            Error::Ingest(_) | Error::Io { .. } | Error::ModelFormat(_) => 2,
            Error::Extract(_) => 3,
            Error::Stats(_) => 4,
            Error::Train(TrainError::Contract(_)) => 1,
            Error::Train(TrainError::InvalidFeatures { .. } | TrainError::TargetRange { .. }) => 2,
            Error::Train(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
