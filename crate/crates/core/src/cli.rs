//! The `metricforge` command line: extract, train, eval and ablate.
//!
//! Every run writes one [`RunManifest`], to `--manifest PATH` or as a
//! `manifest: {...}` line on stderr. Exit codes: 0 success, 1 usage,
//! 2 data, 3 extraction, 4 numeric.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::aggregator::{sha256_hex, train, AggregatorKind, TrainConfig, TrainedAggregator};
use crate::baseline::{rouge_l, sentence_bleu, tokenize, BleuConfig};
use crate::correlation::{evaluate, EvalItem, Protocol};
use crate::error::{Error, ExtractError, IngestError, StatsError};
use crate::ingestion::{
    build_split, parse_canonical_str, parse_flickr_str, parse_pairs_str, CanonicalDaRow, Dataset,
};
use crate::model::{FeatureMask, FeatureVector, SentencePair};
use crate::pipeline::{
    acquire, pair_digest, run_ablation, AblationDataset, ExtractorEndpoint, FeatureExtractor, FeatureStore,
    FeaturedItem, HttpExtractor, ScoreResult, Scorer, SelfReference,
};
use crate::report::ReportTable;

pub const ENDPOINT_ENV: &str = "METRICFORGE_ENDPOINT";

#[derive(Debug, Parser)]
#[command(name = "metricforge", version, about = "Train, calibrate and evaluate learned text-quality metrics")]
pub struct Cli {
    /// TOML file whose keys mirror the long flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch features for every pair into the cache.
    Extract(ExtractCmd),
    /// Train an aggregator on the split preceding --test-dataset.
    Train(TrainCmd),
    /// Correlate model scores with human judgments.
    Eval(EvalCmd),
    /// Train and evaluate one model per feature mask.
    Ablate(AblateCmd),
}

#[derive(Debug, Args)]
struct ExtractionArgs {
    /// Feature service base URL.
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// JSONL feature cache.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Use cached features only.
    #[arg(long)]
    offline: bool,
    /// Accept cache records from other extractor versions.
    #[arg(long)]
    allow_mixed: bool,
    #[arg(long)]
    max_batch: Option<usize>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Feature groups, e.g. SS,LI,SI or SS,LI,SI,LEN.
    #[arg(long)]
    mask: Option<String>,
    /// nn or lreg.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long)]
    hidden_layers: Option<usize>,
}

#[derive(Debug, Args)]
struct ExtractCmd {
    /// Canonical DA TSV or a `reference<TAB>candidate` TSV.
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

#[derive(Debug, Args)]
struct TrainCmd {
    /// Canonical DA TSV files.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// wmt16..wmt19; training uses the earlier datasets.
    #[arg(long)]
    test_dataset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

#[derive(Debug, Args)]
struct EvalCmd {
    #[arg(long)]
    model: PathBuf,
    /// Canonical DA TSV, or the expert judgment file when --captions is set.
    #[arg(long)]
    test: PathBuf,
    /// Caption texts (`caption_id<TAB>text`); switches to caption judgments.
    #[arg(long)]
    captions: Option<PathBuf>,
    /// pearson, darr or tau_b; inferred from the test data when omitted.
    #[arg(long)]
    protocol: Option<String>,
    /// Add BLEU and ROUGE-L rows.
    #[arg(long)]
    baselines: bool,
    /// CSV of human_score,nubia,bleu,rouge_l per test item.
    #[arg(long)]
    dump_scatter: Option<PathBuf>,
    /// Emit the table as JSON: to stdout instead of the text table, or to
    /// the given path beside it.
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    json: Option<PathBuf>,
    /// Text paired with itself for normalization: reference or candidate.
    #[arg(long)]
    self_reference: Option<String>,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

#[derive(Debug, Args)]
struct AblateCmd {
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long)]
    test_dataset: Option<String>,
    /// `preset:table5` or masks separated by `;`, e.g. `SS;SS,LI`.
    #[arg(long)]
    masks: Vec<String>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    json: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

/// Contents of `--config`. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub endpoint: Option<String>,
    pub cache: Option<PathBuf>,
    pub offline: Option<bool>,
    pub allow_mixed: Option<bool>,
    pub max_batch: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub mask: Option<String>,
    pub kind: Option<String>,
    pub test_dataset: Option<String>,
    pub protocol: Option<String>,
    pub masks: Option<Vec<String>>,
    pub self_reference: Option<String>,
    pub train: Option<TrainConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            context: format!("reading config {}", path.display()),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Provenance record written once per run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    /// SHA-256 of the resolved settings below.
    pub config_digest: String,
    pub config: serde_json::Value,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub model_digest: Option<String>,
    pub extractor_version: Option<String>,
    pub seed: Option<u64>,
    pub train_rows: Option<usize>,
    pub test_rows: Option<usize>,
    /// Unix seconds; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

struct Run<'a> {
    config: FileConfig,
    manifest: RunManifest,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
    let context = context.into();
    move |source| Error::Io { context, source }
}

impl Run<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> Result<(), Error> {
        writeln!(self.out, "{}", line.as_ref()).map_err(io_err("writing stdout"))
    }

    fn warn(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.err, "warning: {}", line.as_ref());
    }

    fn settle_config(&mut self, settings: serde_json::Value) {
        self.manifest.config_digest = sha256_hex(settings.to_string().as_bytes());
        self.manifest.config = settings;
    }

    /// Reads an input file and records its digest.
    fn read_input(&mut self, path: &Path) -> Result<String, Error> {
        let bytes = fs::read(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|e| {
            Error::Ingest(IngestError::Row {
                path: path.display().to_string(),
                line: 0,
                column: "*".into(),
                message: format!("not UTF-8: {e}"),
            })
        })
    }

    fn read_rows(&mut self, paths: &[PathBuf]) -> Result<Vec<CanonicalDaRow>, Error> {
        let mut rows = Vec::new();
        for p in paths {
            let text = self.read_input(p)?;
            rows.extend(parse_canonical_str(&text, &p.display().to_string())?);
        }
        Ok(rows)
    }

    fn features(&mut self, args: &ExtractionArgs) -> Result<Features, Error> {
        let c = &self.config;
        let endpoint = args.endpoint.clone().or_else(|| c.endpoint.clone());
        let offline = args.offline || c.offline.unwrap_or(false);
        let allow_mixed = args.allow_mixed || c.allow_mixed.unwrap_or(false);
        let cache_path = args.cache.clone().or_else(|| c.cache.clone());
        let store = match &cache_path {
            Some(p) => FeatureStore::open(p, allow_mixed)?,
            None => FeatureStore::in_memory(),
        };
        let extractor = match (&endpoint, offline) {
            (Some(url), false) => {
                let mut ep = ExtractorEndpoint::new(url.clone());
                if let Some(v) = args.max_batch.or(c.max_batch) {
                    ep.max_batch = v;
                }
                if let Some(v) = args.max_in_flight.or(c.max_in_flight) {
                    ep.max_in_flight = v;
                }
                if let Some(v) = args.timeout_secs.or(c.timeout_secs) {
                    ep.timeout = Duration::from_secs(v);
                }
                Some(HttpExtractor::new(ep)?)
            }
            (None, false) => {
                self.warn(format!("no endpoint (--endpoint or {ENDPOINT_ENV}); using cached features only"));
                None
            }
            (_, true) => None,
        };
        Ok(Features {
            store,
            extractor,
            settings: json!({
                "endpoint": if offline { None } else { endpoint },
                "cache": cache_path,
                "offline": offline,
                "allow_mixed": allow_mixed,
            }),
        })
    }

    fn train_config(&self, m: &ModelArgs) -> TrainConfig {
        let mut c = self.config.train.clone().unwrap_or_default();
        if let Some(v) = m.seed {
            c.seed = v;
        }
        if let Some(v) = m.epochs {
            c.epochs = v;
        }
        if let Some(v) = m.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = m.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = m.hidden_width {
            c.hidden_width = v;
        }
        if let Some(v) = m.hidden_layers {
            c.hidden_layers = v;
        }
        c
    }

    fn mask(&self, m: &ModelArgs) -> Result<FeatureMask, Error> {
        match m.mask.as_ref().or(self.config.mask.as_ref()) {
            Some(s) => Ok(s.parse()?),
            None => Ok(FeatureMask::FULL),
        }
    }

    fn kind(&self, m: &ModelArgs) -> Result<AggregatorKind, Error> {
        match m.kind.as_ref().or(self.config.kind.as_ref()) {
            Some(s) => s.parse().map_err(|e: crate::error::ContractError| usage(e.to_string())),
            None => Ok(AggregatorKind::Mlp),
        }
    }

    fn test_dataset(&self, flag: &Option<String>) -> Result<Dataset, Error> {
        flag.as_ref()
            .or(self.config.test_dataset.as_ref())
            .ok_or_else(|| usage("--test-dataset is required"))?
            .parse()
            .map_err(usage)
    }

    fn protocol(&self, flag: &Option<String>, inferred: Protocol) -> Result<Protocol, Error> {
        match flag.as_ref().or(self.config.protocol.as_ref()) {
            Some(s) => Ok(s.parse()?),
            None => Ok(inferred),
        }
    }

    /// Emits `table` per the `--json` setting.
    fn emit_table(&mut self, table: &ReportTable, json_target: &Option<PathBuf>) -> Result<(), Error> {
        match json_target {
            Some(p) if p.as_os_str() == "-" => self.say(table.to_json().trim_end()),
            Some(p) => {
                self.say(table.render().trim_end())?;
                fs::write(p, table.to_json()).map_err(io_err(format!("writing {}", p.display())))
            }
            None => self.say(table.render().trim_end()),
        }
    }
}

struct Features {
    store: FeatureStore,
    extractor: Option<HttpExtractor>,
    settings: serde_json::Value,
}

impl Features {
    /// Features for `pairs` in input order; any unfetched pair is an error.
    fn fetch(&mut self, pairs: &[SentencePair]) -> Result<Vec<FeatureVector>, Error> {
        let extractor = self.extractor.as_ref().map(|e| e as &dyn FeatureExtractor);
        acquire(pairs, extractor, &mut self.store)?.into_result()?;
        Ok(pairs
            .iter()
            .map(|p| self.store.get(&pair_digest(p)).expect("acquired").features)
            .collect())
    }
}

fn default_protocol(dataset: Option<Dataset>) -> Protocol {
    match dataset {
        Some(Dataset::Wmt18 | Dataset::Wmt19) => Protocol::Darr,
        _ => Protocol::Pearson,
    }
}

/// Language pair, prefixed with the dataset when several are present.
fn group_labels(rows: &[CanonicalDaRow]) -> Vec<String> {
    let mixed = rows.iter().any(|r| r.dataset != rows[0].dataset);
    rows.iter()
        .map(|r| {
            if mixed {
                format!("{}/{}", r.dataset, r.lang_pair)
            } else {
                r.lang_pair.clone()
            }
        })
        .collect()
}

fn cmd_extract(run: &mut Run, cmd: &ExtractCmd) -> Result<(), Error> {
    let mut features = run.features(&cmd.extraction)?;
    run.settle_config(json!({ "pairs": cmd.pairs, "extraction": features.settings }));
    let text = run.read_input(&cmd.pairs)?;
    let pairs = parse_pairs_str(&text, &cmd.pairs.display().to_string())?;
    let extractor = features.extractor.as_ref().map(|e| e as &dyn FeatureExtractor);
    let acq = acquire(&pairs, extractor, &mut features.store)?;
    run.manifest.extractor_version = features.store.extractor_version().map(String::from);
    run.say(format!("{} fetched, {} cached", acq.fetched, acq.cached))?;
    let missing = acq.unfetched().len();
    if missing > 0 {
        run.say(format!("{missing} unfetched"))?;
    }
    Ok(acq.into_result()?)
}

fn cmd_train(run: &mut Run, cmd: &TrainCmd) -> Result<(), Error> {
    let test_dataset = run.test_dataset(&cmd.test_dataset)?;
    let mask = run.mask(&cmd.model)?;
    let kind = run.kind(&cmd.model)?;
    let config = run.train_config(&cmd.model);
    config.validate()?;
    let mut features = run.features(&cmd.extraction)?;
    run.settle_config(json!({
        "data": cmd.data,
        "test_dataset": test_dataset,
        "mask": mask,
        "kind": kind,
        "train": config,
        "extraction": features.settings,
    }));
    run.manifest.seed = Some(config.seed);

    let rows = run.read_rows(&cmd.data)?;
    let split = build_split(&rows, test_dataset)?;
    run.manifest.train_rows = Some(split.train.len());
    run.manifest.test_rows = Some(split.test.len());
    let pairs: Vec<SentencePair> = split.train.iter().map(|j| j.pair.clone()).collect();
    let fvs = features.fetch(&pairs)?;
    run.manifest.extractor_version = features.store.extractor_version().map(String::from);
    let dataset: Vec<(FeatureVector, f64)> = fvs.into_iter().zip(split.train.iter().map(|j| j.human_score)).collect();

    let model = train(&dataset, mask, kind, &config)?;
    model.save(&cmd.out)?;
    let digest = model.digest();
    run.manifest.model_digest = Some(digest.clone());

    let sources: Vec<String> = test_dataset
        .training_sources()
        .iter()
        .map(|d| format!("{d} {}", rows.iter().filter(|r| r.dataset == *d).count()))
        .collect();
    run.say(format!("train n = {} ({})", split.train.len(), sources.join(", ")))?;
    run.say(format!("test n = {} ({test_dataset})", split.test.len()))?;
    run.say(format!("mask {mask}, kind {kind}, seed {}", config.seed))?;
    if let Some(lin) = model.effective_linear_coefficients() {
        let log = matches!(model.perplexity_transform, crate::aggregator::PerplexityTransform::Log);
        for (name, w) in mask.feature_names().iter().zip(&lin.weights) {
            let name = if log && name.starts_with("ppl") { format!("ln({name})") } else { name.to_string() };
            run.say(format!("coefficient {name} = {w}"))?;
        }
        run.say(format!("intercept = {}", lin.bias))?;
    }
    run.say(format!("model {} sha256 {digest}", cmd.out.display()))
}

/// One evaluated candidate: human judgment, pairs to score (one per
/// reference) and its baseline scores.
struct Candidate {
    group: String,
    segment_id: u64,
    candidate: String,
    human: f64,
    pairs: Vec<SentencePair>,
    bleu: f64,
    rouge_l: f64,
}

fn baseline_scores(candidate: &str, references: &[&str]) -> (f64, f64) {
    let cand = tokenize(candidate);
    let refs: Vec<_> = references.iter().map(|r| tokenize(r)).collect();
    let bleu = sentence_bleu(&cand, &refs, BleuConfig::default());
    let rouge = refs.iter().map(|r| rouge_l(&cand, r)).fold(0.0, f64::max);
    (bleu, rouge)
}

fn eval_candidates_from_rows(rows: &[CanonicalDaRow]) -> Vec<Candidate> {
    let labels = group_labels(rows);
    rows.iter()
        .zip(labels)
        .map(|(r, group)| {
            let (bleu, rouge_l) = baseline_scores(&r.candidate, &[&r.reference]);
            Candidate {
                group,
                segment_id: r.segment_id,
                candidate: r.candidate.clone(),
                human: r.human_score,
                pairs: vec![r.pair()],
                bleu,
                rouge_l,
            }
        })
        .collect()
}

fn cmd_eval(run: &mut Run, cmd: &EvalCmd) -> Result<(), Error> {
    let self_reference = match cmd.self_reference.as_ref().or(run.config.self_reference.as_ref()) {
        None => SelfReference::Reference,
        Some(s) if s == "reference" => SelfReference::Reference,
        Some(s) if s == "candidate" => SelfReference::Candidate,
        Some(s) => return Err(usage(format!("--self-reference must be reference or candidate, got {s:?}"))),
    };
    let model_text = run.read_input(&cmd.model)?;
    let model = TrainedAggregator::from_json(&model_text)?;
    run.manifest.model_digest = Some(model.digest());

    let test_text = run.read_input(&cmd.test)?;
    let origin = cmd.test.display().to_string();
    let (candidates, inferred) = match &cmd.captions {
        Some(captions_path) => {
            let captions = run.read_input(captions_path)?;
            let judgments = parse_flickr_str(&test_text, &captions, &origin)?;
            let candidates = judgments
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let refs: Vec<&str> = j.references.iter().map(String::as_str).collect();
                    let (bleu, rouge_l) = baseline_scores(&j.candidate_caption, &refs);
                    let pairs = j
                        .references
                        .iter()
                        .map(|r| SentencePair::new(r.clone(), j.candidate_caption.clone()))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Candidate {
                        group: "flickr8k".into(),
                        segment_id: i as u64,
                        candidate: j.candidate_caption.clone(),
                        human: j.human_target(),
                        pairs,
                        bleu,
                        rouge_l,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            (candidates, Protocol::TauB)
        }
        None => {
            let rows = parse_canonical_str(&test_text, &origin)?;
            let dataset = rows.first().map(|r| r.dataset);
            (eval_candidates_from_rows(&rows), default_protocol(dataset))
        }
    };
    if candidates.is_empty() {
        return Err(Error::Ingest(IngestError::Split(format!("{origin} has no test items"))));
    }
    let protocol = run.protocol(&cmd.protocol, inferred)?;
    let mut features = run.features(&cmd.extraction)?;
    run.settle_config(json!({
        "model": cmd.model,
        "test": cmd.test,
        "captions": cmd.captions,
        "protocol": protocol,
        "baselines": cmd.baselines,
        "self_reference": self_reference,
        "extraction": features.settings,
    }));
    run.manifest.test_rows = Some(candidates.len());

    let pairs: Vec<SentencePair> = candidates.iter().flat_map(|c| c.pairs.iter().cloned()).collect();
    let scorer = Scorer {
        model: &model,
        extractor: features.extractor.as_ref().map(|e| e as &dyn FeatureExtractor),
        self_reference,
    };
    let scores = scorer.score_batch(&pairs, &mut features.store)?;
    run.manifest.extractor_version = features.store.extractor_version().map(String::from);
    let scores: Vec<ScoreResult> = scores.into_complete()?;
    let warnings = scores.iter().filter(|s| s.warning.is_some()).count();
    if warnings > 0 {
        run.warn(format!("{warnings} pairs had a degenerate self-score; normalization skipped"));
    }

    let mut raw = Vec::with_capacity(candidates.len());
    let mut calibrated = Vec::with_capacity(candidates.len());
    let mut offset = 0;
    for c in &candidates {
        let mine = &scores[offset..offset + c.pairs.len()];
        offset += c.pairs.len();
        raw.push(mine.iter().map(|s| s.raw).fold(f64::NEG_INFINITY, f64::max));
        calibrated.push(mine.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max));
    }
    let items = |metric: &dyn Fn(usize) -> f64| -> Vec<EvalItem> {
        candidates
            .iter()
            .enumerate()
            .map(|(i, c)| EvalItem {
                group: c.group.clone(),
                segment_id: c.segment_id,
                candidate: c.candidate.clone(),
                human: c.human,
                metric: metric(i),
            })
            .collect()
    };
    let mut rows: Vec<(&str, Result<_, StatsError>)> = vec![
        ("NUBIA (raw)", evaluate(protocol, &items(&|i| raw[i]))),
        ("NUBIA (calibrated)", evaluate(protocol, &items(&|i| calibrated[i]))),
    ];
    if cmd.baselines {
        rows.push(("BLEU", evaluate(protocol, &items(&|i| candidates[i].bleu))));
        rows.push(("ROUGE-L", evaluate(protocol, &items(&|i| candidates[i].rouge_l))));
    }
    let mut table = ReportTable::new(protocol);
    for (name, r) in &rows {
        table.push(*name, r.as_ref());
    }

    if let Some(path) = &cmd.dump_scatter {
        let mut csv = String::from("human_score,nubia,bleu,rouge_l\n");
        for (c, s) in candidates.iter().zip(&calibrated) {
            csv.push_str(&format!("{},{},{},{}\n", c.human, s, c.bleu, c.rouge_l));
        }
        fs::write(path, csv).map_err(io_err(format!("writing {}", path.display())))?;
    }
    run.emit_table(&table, &cmd.json)?;
    match rows.into_iter().find_map(|(_, r)| r.err()) {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn parse_masks(specs: &[String]) -> Result<Vec<FeatureMask>, Error> {
    let mut out = Vec::new();
    for spec in specs {
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            match part.strip_prefix("preset:") {
                Some("table5") => out.extend(FeatureMask::ablation_preset()),
                Some(other) => return Err(usage(format!("unknown mask preset {other:?}"))),
                None => out.push(part.parse()?),
            }
        }
    }
    if out.is_empty() {
        return Err(usage("no masks given"));
    }
    Ok(out)
}

fn cmd_ablate(run: &mut Run, cmd: &AblateCmd) -> Result<(), Error> {
    let test_dataset = run.test_dataset(&cmd.test_dataset)?;
    let mask_specs = if !cmd.masks.is_empty() {
        cmd.masks.clone()
    } else {
        run.config.masks.clone().unwrap_or_else(|| vec!["preset:table5".into()])
    };
    let masks = parse_masks(&mask_specs)?;
    let kind = run.kind(&cmd.model)?;
    let config = run.train_config(&cmd.model);
    config.validate()?;
    let protocol = run.protocol(&cmd.protocol, default_protocol(Some(test_dataset)))?;
    let mut features = run.features(&cmd.extraction)?;
    run.settle_config(json!({
        "data": cmd.data,
        "test_dataset": test_dataset,
        "masks": masks,
        "kind": kind,
        "protocol": protocol,
        "train": config,
        "extraction": features.settings,
    }));
    run.manifest.seed = Some(config.seed);

    let rows = run.read_rows(&cmd.data)?;
    let split = build_split(&rows, test_dataset)?;
    let test_rows: Vec<CanonicalDaRow> = rows.iter().filter(|r| r.dataset == test_dataset).cloned().collect();
    run.manifest.train_rows = Some(split.train.len());
    run.manifest.test_rows = Some(test_rows.len());

    let train_pairs: Vec<SentencePair> = split.train.iter().map(|j| j.pair.clone()).collect();
    let test_pairs: Vec<SentencePair> = test_rows.iter().map(CanonicalDaRow::pair).collect();
    let all: Vec<SentencePair> = train_pairs.iter().chain(&test_pairs).cloned().collect();
    let fvs = features.fetch(&all)?;
    run.manifest.extractor_version = features.store.extractor_version().map(String::from);
    let (train_fv, test_fv) = fvs.split_at(train_pairs.len());

    let dataset = AblationDataset {
        train: train_fv.iter().copied().zip(split.train.iter().map(|j| j.human_score)).collect(),
        test: test_rows
            .iter()
            .zip(group_labels(&test_rows))
            .zip(test_fv)
            .map(|((r, group), fv)| FeaturedItem {
                group,
                segment_id: r.segment_id,
                candidate: r.candidate.clone(),
                features: vec![*fv],
                human: r.human_score,
            })
            .collect(),
        protocol,
    };
    let results = run_ablation(&dataset, &masks, kind, &config)?;
    let mut table = ReportTable::new(protocol);
    for row in &results {
        table.push(row.mask.to_string(), row.report.as_ref());
    }
    run.emit_table(&table, &cmd.json)?;
    match results.into_iter().find_map(|r| r.report.err()) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Extract(_) => "extract",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Ablate(_) => "ablate",
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let mut run = Run {
        config: FileConfig::default(),
        manifest: RunManifest {
            command: command_name(&cli.command).to_string(),
            timestamp: timestamp(),
            ..RunManifest::default()
        },
        out,
        err,
    };
    let result = (|| {
        if let Some(path) = &cli.config {
            run.config = FileConfig::load(path)?;
        }
        match &cli.command {
            Command::Extract(c) => cmd_extract(&mut run, c),
            Command::Train(c) => cmd_train(&mut run, c),
            Command::Eval(c) => cmd_eval(&mut run, c),
            Command::Ablate(c) => cmd_ablate(&mut run, c),
        }
    })();
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(run.err, "error: {e}");
            if let Error::Extract(ExtractError::CacheMiss(d)) = e {
                let _ = writeln!(run.err, "{} pairs missing from the cache; rerun with an endpoint", d.len());
            }
            e.exit_code()
        }
    };
    run.manifest.status = if code == 0 { "ok" } else { "error" }.into();
    run.manifest.error = result.err().map(|e| e.to_string());
    run.manifest.exit_code = code;
    let text = serde_json::to_string(&run.manifest).expect("manifest serializes");
    match &cli.manifest {
        Some(path) => {
            if let Err(e) = fs::write(path, text + "\n") {
                let _ = writeln!(run.err, "error: writing manifest {}: {e}", path.display());
                return if code == 0 { 2 } else { code };
            }
        }
        None => {
            let _ = writeln!(run.err, "manifest: {text}");
        }
    }
    code
}

/// Entry point for the binary.
pub fn main_with_args() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
