//! Append-only JSON-Lines feature cache.
//!
//! The first line is a [`CacheHeader`]; every following line is one
//! [`FeatureRecord`]. Records are keyed by [`pair_digest`].

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{pair_digest, FeatureRecord, PAIR_DIGEST_SCHEME};
use crate::baseline::TOKENIZER_VERSION;
use crate::error::ExtractError;

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format_version: u32,
    pub extractor_version: String,
    pub tokenizer_version: String,
    /// How `pair_digest` is computed.
    pub pair_digest: String,
}

impl CacheHeader {
    pub fn new(extractor_version: &str) -> Self {
        Self {
            format_version: CACHE_FORMAT_VERSION,
            extractor_version: extractor_version.to_string(),
            tokenizer_version: TOKENIZER_VERSION.to_string(),
            pair_digest: PAIR_DIGEST_SCHEME.to_string(),
        }
    }
}

/// Feature records in memory, optionally backed by a JSONL file that
/// receives every new record. All writes go through `&mut self`.
#[derive(Debug, Default)]
pub struct FeatureStore {
    path: Option<PathBuf>,
    header: Option<CacheHeader>,
    records: HashMap<String, FeatureRecord>,
    allow_mixed: bool,
    writer: Option<File>,
}

impl FeatureStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; new records are appended to it. Records
    /// whose extractor version differs from the header are rejected unless
    /// `allow_mixed`.
    pub fn open(path: impl AsRef<Path>, allow_mixed: bool) -> Result<Self, ExtractError> {
        let path = path.as_ref().to_path_buf();
        let mut store = FeatureStore {
            path: Some(path.clone()),
            allow_mixed,
            ..Self::default()
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(e.into()),
        };
        let cache_err = |line: usize, message: String| ExtractError::Cache {
            path: path.clone(),
            message: format!("line {line}: {message}"),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let Some(header) = &store.header else {
                let header: CacheHeader =
                    serde_json::from_str(&line).map_err(|e| cache_err(lineno, format!("bad header: {e}")))?;
                if header.format_version != CACHE_FORMAT_VERSION {
                    return Err(cache_err(lineno, format!("unsupported format_version {}", header.format_version)));
                }
                if header.pair_digest != PAIR_DIGEST_SCHEME {
                    return Err(cache_err(lineno, format!("unknown digest scheme {}", header.pair_digest)));
                }
                store.header = Some(header);
                continue;
            };
            let record: FeatureRecord =
                serde_json::from_str(&line).map_err(|e| cache_err(lineno, format!("bad record: {e}")))?;
            if record.extractor_version != header.extractor_version && !allow_mixed {
                return Err(ExtractError::VersionMismatch {
                    expected: header.extractor_version.clone(),
                    found: record.extractor_version,
                });
            }
            if pair_digest(&record.pair) != record.pair_digest {
                return Err(cache_err(lineno, "digest does not match pair".into()));
            }
            if !record.features.is_valid() {
                return Err(cache_err(lineno, "invalid features".into()));
            }
            store.records.insert(record.pair_digest.clone(), record);
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn header(&self) -> Option<&CacheHeader> {
        self.header.as_ref()
    }

    pub fn extractor_version(&self) -> Option<&str> {
        self.header.as_ref().map(|h| h.extractor_version.as_str())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, digest: &str) -> Option<&FeatureRecord> {
        self.records.get(digest)
    }

    pub fn contains(&self, digest: &str) -> bool {
        self.records.contains_key(digest)
    }

    /// Records sorted by digest.
    pub fn records(&self) -> Vec<&FeatureRecord> {
        let mut v: Vec<&FeatureRecord> = self.records.values().collect();
        v.sort_by(|a, b| a.pair_digest.cmp(&b.pair_digest));
        v
    }

    fn append_line(&mut self, line: &str) -> Result<(), ExtractError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if self.writer.is_none() {
            self.writer = Some(OpenOptions::new().create(true).append(true).open(path)?);
        }
        let w = self.writer.as_mut().expect("opened above");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Adds a record, persisting it when file-backed. Existing digests are
    /// left untouched.
    pub fn insert(&mut self, record: FeatureRecord) -> Result<(), ExtractError> {
        if self.records.contains_key(&record.pair_digest) {
            return Ok(());
        }
        match &self.header {
            Some(h) if h.extractor_version != record.extractor_version && !self.allow_mixed => {
                return Err(ExtractError::VersionMismatch {
                    expected: h.extractor_version.clone(),
                    found: record.extractor_version,
                });
            }
            Some(_) => {}
            None => {
                let header = CacheHeader::new(&record.extractor_version);
                let line = serde_json::to_string(&header).expect("header serializes");
                self.append_line(&line)?;
                self.header = Some(header);
            }
        }
        let line = serde_json::to_string(&record).expect("record serializes");
        self.append_line(&line)?;
        self.records.insert(record.pair_digest.clone(), record);
        Ok(())
    }
}
