//! Run orchestration: a directory per run, phases advanced in order, with
//! review gates pausing the pipeline until resolved.

mod io;
mod pipeline;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{BroadTermLexicon, ClaimError};
use crate::corpus::{self, CorpusError, EntityAliasTable, Portfolio};
use crate::gates::{self, GateError, GateId, GateLog, PayloadBounds, ReviewGate, ReviewSubmission};
use crate::ltr::{self, LabelRecord, LtrError, RankerModel, TrainParams};
use crate::needgraph::{self, NeedError, NeedGraphConfig, PatternSet, SourceDoc};
use crate::nexus::{NexusConfig, NexusError};
use crate::params::{FeatureVector, GniTable, MarketData, ParamConfig, ParamError};
use crate::strata::{BandsConfig, KeyPattern, ProfileSet, StrataError};

pub use io::{read_json, read_jsonl, to_json, to_jsonl, write_atomic};
pub use pipeline::{
    compute_vectors, CategoriesDoc, CategoryView, FeatureValue, PrunedDoc, RankingDoc, RankingEntry, SelectionDoc,
    VectorLine,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("run config: {0}")]
    Config(String),
    #[error("input {name}: {message}")]
    Input { name: String, message: String },
    #[error("artifact {name}: {message}")]
    Artifact { name: String, message: String },
    #[error("run is {actual:?}; {operation} needs {expected}")]
    WrongPhase { actual: Phase, operation: &'static str, expected: &'static str },
    #[error("selection matches no category")]
    EmptySelection,
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("{phase:?} failed: {source}")]
    Phase { phase: Phase, source: Box<ServiceError> },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Strata(#[from] StrataError),
    #[error(transparent)]
    Ltr(#[from] LtrError),
    #[error(transparent)]
    Need(#[from] NeedError),
    #[error(transparent)]
    Nexus(#[from] NexusError),
    #[error(transparent)]
    Claims(#[from] ClaimError),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

/// Coarse classification used for HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NotFound,
    Conflict,
    Invalid,
    Internal,
}

impl ServiceError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ServiceError::UnknownRun(_) => ErrorKind::NotFound,
            ServiceError::WrongPhase { .. } => ErrorKind::Conflict,
            ServiceError::Gate(
                GateError::GateOrderViolation { .. }
                | GateError::GateAlreadyResolved(_)
                | GateError::GateAlreadyOpen(_)
                | GateError::NotOpened(_)
                | GateError::VersionConflict { .. },
            ) => ErrorKind::Conflict,
            ServiceError::Io { .. } | ServiceError::Artifact { .. } => ErrorKind::Internal,
            ServiceError::Phase { source, .. } => match source.kind() {
                ErrorKind::Internal => ErrorKind::Internal,
                _ => ErrorKind::Invalid,
            },
            _ => ErrorKind::Invalid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Ingested,
    Categorized,
    Ranked,
    GatePostRanking,
    Matched,
    GatePostMatch,
    Reported,
    GateFinal,
    Complete,
    /// A gate was rejected; the run stops without final outputs.
    Rejected,
    Failed,
}

impl Phase {
    pub fn gate(self) -> Option<GateId> {
        match self {
            Phase::GatePostRanking => Some(GateId::PostRanking),
            Phase::GatePostMatch => Some(GateId::PostMatch),
            Phase::GateFinal => Some(GateId::FinalOntology),
            _ => None,
        }
    }

    pub fn of_gate(g: GateId) -> Phase {
        match g {
            GateId::PostRanking => Phase::GatePostRanking,
            GateId::PostMatch => Phase::GatePostMatch,
            GateId::FinalOntology => Phase::GateFinal,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Complete | Phase::Rejected)
    }
}

/// Input file locations in `run.toml`, relative to that file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub portfolio: PathBuf,
    pub market: PathBuf,
    pub gni: PathBuf,
    pub needs_corpus: PathBuf,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub aliases: Option<PathBuf>,
    #[serde(default)]
    pub patterns: Option<PathBuf>,
    #[serde(default)]
    pub broad_terms: Option<PathBuf>,
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
}

/// Names under `runs/<id>/inputs/`, one per input slot.
pub const PORTFOLIO_FILE: &str = "portfolio.jsonl";
pub const MARKET_FILE: &str = "market.json";
pub const GNI_FILE: &str = "gni.csv";
pub const NEEDS_FILE: &str = "needs_corpus.jsonl";
pub const MODEL_FILE: &str = "model.json";
pub const ALIASES_FILE: &str = "aliases.csv";
pub const PATTERNS_FILE: &str = "patterns.txt";
pub const BROAD_TERMS_FILE: &str = "broad_terms.txt";
pub const PARAMS_FILE: &str = "params.toml";
pub const PROFILES_FILE: &str = "profiles.toml";
pub const RUN_CONFIG_FILE: &str = "run.toml";

impl InputPaths {
    fn slots(&self) -> Vec<(&'static str, Option<&PathBuf>)> {
        vec![
            (PORTFOLIO_FILE, Some(&self.portfolio)),
            (MARKET_FILE, Some(&self.market)),
            (GNI_FILE, Some(&self.gni)),
            (NEEDS_FILE, Some(&self.needs_corpus)),
            (MODEL_FILE, self.model.as_ref()),
            (ALIASES_FILE, self.aliases.as_ref()),
            (PATTERNS_FILE, self.patterns.as_ref()),
            (BROAD_TERMS_FILE, self.broad_terms.as_ref()),
            (PARAMS_FILE, self.params.as_ref()),
            (PROFILES_FILE, self.profiles.as_ref()),
        ]
    }
}

fn default_profile() -> String {
    "QuickMonetization".into()
}
fn default_top_n() -> usize {
    30
}
fn default_match_cap() -> usize {
    50
}

/// `run.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub evaluation_date: NaiveDate,
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Category key patterns. Absent means the run pauses for a selection.
    #[serde(default)]
    pub select_categories: Option<Vec<String>>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub bounds: PayloadBounds,
    /// Most match candidates put in front of the PostMatch reviewer.
    #[serde(default = "default_match_cap")]
    pub post_match_cap: usize,
    pub inputs: InputPaths,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub needs: NeedGraphConfig,
    #[serde(default)]
    pub nexus: NexusConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.bounds;
        if b.min > b.max || self.top_n < b.min || self.top_n > b.max {
            return Err(ServiceError::Config(format!("top_n {} outside bounds {}..={}", self.top_n, b.min, b.max)));
        }
        if self.post_match_cap == 0 {
            return Err(ServiceError::Config("post_match_cap must be positive".into()));
        }
        if let Some(pats) = &self.select_categories {
            for p in pats {
                p.parse::<KeyPattern>()?;
            }
        }
        self.needs.validate()?;
        let n = &self.nexus;
        if (n.alpha + n.beta - 1.0).abs() > 1e-9 || n.alpha < 0.0 || n.beta < 0.0 {
            return Err(NexusError::WeightsNotNormalized(n.alpha + n.beta).into());
        }
        Ok(())
    }
}

fn input_err(name: &str) -> impl Fn(String) -> ServiceError + '_ {
    move |message| ServiceError::Input { name: name.to_string(), message }
}

/// Every parsed input of a run.
pub struct Inputs {
    pub cfg: RunConfig,
    pub portfolio_text: String,
    pub market: MarketData,
    pub gni: GniTable,
    pub docs: Vec<SourceDoc>,
    pub model: Option<RankerModel<f64>>,
    pub aliases: EntityAliasTable,
    pub patterns: PatternSet,
    pub lexicon: BroadTermLexicon,
    pub params: ParamConfig,
    pub profiles: ProfileSet,
}

impl Inputs {
    /// Parses and validates raw input bytes keyed by their run file name.
    pub fn parse(cfg: RunConfig, files: &BTreeMap<&'static str, Vec<u8>>) -> Result<Self> {
        let text = |name: &'static str| -> Result<Option<String>> {
            files
                .get(name)
                .map(|b| String::from_utf8(b.clone()).map_err(|e| input_err(name)(e.to_string())))
                .transpose()
        };
        let required =
            |name: &'static str| -> Result<String> { text(name)?.ok_or_else(|| input_err(name)("missing".into())) };
        let portfolio_text = required(PORTFOLIO_FILE)?;
        corpus::parse_portfolio(&portfolio_text, cfg.evaluation_date)?;
        let market: MarketData =
            serde_json::from_str(&required(MARKET_FILE)?).map_err(|e| input_err(MARKET_FILE)(e.to_string()))?;
        let gni = GniTable::from_csv_reader(required(GNI_FILE)?.as_bytes())?;
        let docs = needgraph::parse_needs_corpus(required(NEEDS_FILE)?.as_bytes())?;
        let model = text(MODEL_FILE)?.map(|s| RankerModel::<f64>::from_json(&s)).transpose()?;
        let aliases = match text(ALIASES_FILE)? {
            Some(s) => EntityAliasTable::from_csv_reader(s.as_bytes())?,
            None => EntityAliasTable::default(),
        };
        let patterns = match text(PATTERNS_FILE)? {
            Some(s) => PatternSet::parse(&s)?,
            None => PatternSet::default(),
        };
        let lexicon = text(BROAD_TERMS_FILE)?.map_or_else(BroadTermLexicon::starter, |s| BroadTermLexicon::parse(&s));
        let params = match text(PARAMS_FILE)? {
            Some(s) => ParamConfig::from_toml_str(&s)?,
            None => ParamConfig::default(),
        };
        let profiles = match text(PROFILES_FILE)? {
            Some(s) => ProfileSet::from_toml_str(&s)?,
            None => ProfileSet::default(),
        };
        profiles.resolve(&cfg.profile)?;
        Ok(Inputs { cfg, portfolio_text, market, gni, docs, model, aliases, patterns, lexicon, params, profiles })
    }

    pub fn model(&self) -> Result<&RankerModel<f64>> {
        self.model.as_ref().ok_or_else(|| input_err(MODEL_FILE)("no ranking model configured".into()))
    }

    /// Legal-status filtered, name-normalized portfolio.
    pub fn clean_portfolio(&self) -> Result<(Portfolio, Vec<corpus::DroppedRecord>)> {
        let p = corpus::parse_portfolio(&self.portfolio_text, self.cfg.evaluation_date)?;
        let (kept, dropped) = corpus::verify_legal_status(p);
        Ok((corpus::normalize_entities(kept, &self.aliases), dropped))
    }
}

/// Reads `run.toml` and every file it names. Returns the raw bytes keyed by
/// run file name, `run.toml` included.
pub fn read_sources(config_path: &Path) -> Result<(RunConfig, BTreeMap<&'static str, Vec<u8>>)> {
    read_sources_except(config_path, &[])
}

fn read_sources_except(config_path: &Path, skip: &[&str]) -> Result<(RunConfig, BTreeMap<&'static str, Vec<u8>>)> {
    let unreadable = |name: &str, path: &Path| {
        let name = name.to_string();
        let path = path.display().to_string();
        move |e: std::io::Error| ServiceError::Input { name, message: format!("{path}: {e}") }
    };
    let raw = fs::read(config_path).map_err(unreadable(RUN_CONFIG_FILE, config_path))?;
    let cfg = RunConfig::from_toml_str(&String::from_utf8_lossy(&raw))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut files = BTreeMap::new();
    for (name, path) in cfg.inputs.slots() {
        if let Some(p) = path.filter(|_| !skip.contains(&name)) {
            let full = base.join(p);
            files.insert(name, fs::read(&full).map_err(unreadable(name, &full))?);
        }
    }
    files.insert(RUN_CONFIG_FILE, raw);
    Ok((cfg, files))
}

pub fn load_inputs(config_path: &Path) -> Result<Inputs> {
    let (cfg, files) = read_sources(config_path)?;
    Inputs::parse(cfg, &files)
}

/// Like [`load_inputs`] but ignores the model slot, which training produces.
pub fn load_training_inputs(config_path: &Path) -> Result<Inputs> {
    let (cfg, files) = read_sources_except(config_path, &[MODEL_FILE])?;
    Inputs::parse(cfg, &files)
}

/// Deterministic id from the input digests.
pub fn run_id_for(digests: &BTreeMap<String, String>) -> String {
    let joined: String = digests.iter().map(|(k, v)| format!("{k}:{v}\n")).collect();
    format!("run-{}", &corpus::sha256_hex(joined.as_bytes())[..12])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Phase the run was leaving when the error occurred; resumption restarts there.
    pub phase: Phase,
    pub message: String,
}

/// `runs/<id>/run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub run_id: String,
    pub phase: Phase,
    /// SHA-256 of every input file, fixed at creation.
    pub digests: BTreeMap<String, String>,
    /// Artifact path relative to the run directory, with the phase that wrote it.
    pub artifacts: BTreeMap<String, Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdvanceOptions {
    /// Approve every gate as soon as it opens.
    pub auto_approve: bool,
    /// Stop once the run reaches this phase.
    pub stop_after: Option<Phase>,
}

/// A directory of runs. Writes to one run are serialized; reads never lock.
pub struct RunStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into(), locks: Mutex::new(HashMap::new()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    fn lock(&self, run_id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table").entry(run_id.to_string()).or_default().clone()
    }

    fn valid_id(run_id: &str) -> bool {
        !run_id.is_empty() && run_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    }

    pub fn load_run(&self, run_id: &str) -> Result<Run> {
        if !Self::valid_id(run_id) {
            return Err(ServiceError::UnknownRun(run_id.to_string()));
        }
        let path = self.run_dir(run_id).join("run.json");
        if !path.exists() {
            return Err(ServiceError::UnknownRun(run_id.to_string()));
        }
        read_json(&path)
    }

    pub fn list_runs(&self) -> Result<Vec<Run>> {
        let mut out = vec![];
        let Ok(entries) = fs::read_dir(&self.root) else {
            return Ok(out);
        };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("run.json").exists())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort();
        for id in ids {
            out.push(self.load_run(&id)?);
        }
        Ok(out)
    }

    /// Creates a run from `run.toml`, copying and digesting its inputs and
    /// ingesting the portfolio. Identical inputs map to the same run id, in
    /// which case the existing run is returned untouched.
    pub fn create_run(&self, config_path: &Path) -> Result<Run> {
        let (cfg, files) = read_sources(config_path)?;
        let inputs = Inputs::parse(cfg, &files)?;
        let digests: BTreeMap<String, String> =
            files.iter().map(|(k, v)| (k.to_string(), corpus::sha256_hex(v))).collect();
        let run_id = run_id_for(&digests);
        let lock = self.lock(&run_id);
        let _guard = lock.lock().expect("run lock");
        if let Ok(existing) = self.load_run(&run_id) {
            return Ok(existing);
        }
        let dir = self.run_dir(&run_id);
        for (name, bytes) in &files {
            write_atomic(&dir.join("inputs").join(name), bytes)?;
        }
        let mut run = Run { run_id, phase: Phase::Ingested, digests, artifacts: BTreeMap::new(), failure: None };
        pipeline::ingest(self, &mut run, &inputs)?;
        self.save_run(&run)?;
        Ok(run)
    }

    pub(crate) fn save_run(&self, run: &Run) -> Result<()> {
        write_atomic(&self.run_dir(&run.run_id).join("run.json"), to_json(run).as_bytes())
    }

    pub(crate) fn write_artifact(&self, run: &mut Run, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.run_dir(&run.run_id).join(rel), bytes)?;
        run.artifacts.insert(rel.to_string(), run.phase);
        Ok(())
    }

    pub fn inputs(&self, run_id: &str) -> Result<Inputs> {
        let dir = self.run_dir(run_id).join("inputs");
        let cfg = RunConfig::from_toml_str(&io::read_text(&dir.join(RUN_CONFIG_FILE))?)?;
        let mut files = BTreeMap::new();
        for (name, _) in cfg.inputs.slots() {
            let p = dir.join(name);
            if p.exists() {
                files.insert(name, fs::read(&p).map_err(io::io_err(&p))?);
            }
        }
        Inputs::parse(cfg, &files)
    }

    /// Advances the run until it completes, stops, or a gate needs a reviewer.
    pub fn advance(&self, run_id: &str, opts: AdvanceOptions) -> Result<Run> {
        let lock = self.lock(run_id);
        let _guard = lock.lock().expect("run lock");
        let run = self.load_run(run_id)?;
        self.advance_locked(run, opts)
    }

    fn advance_locked(&self, mut run: Run, opts: AdvanceOptions) -> Result<Run> {
        if let Some(f) = run.failure.take() {
            run.phase = f.phase;
        }
        if run.phase.is_terminal() {
            return Ok(run);
        }
        let inputs = self.inputs(&run.run_id)?;
        while opts.stop_after != Some(run.phase) {
            let from = run.phase;
            match pipeline::step(self, &mut run, &inputs, opts) {
                Ok(Some(next)) => {
                    run.phase = next;
                    self.save_run(&run)?;
                    if next.is_terminal() {
                        break;
                    }
                }
                Ok(None) => {
                    self.save_run(&run)?;
                    break;
                }
                Err(e) => {
                    run.phase = Phase::Failed;
                    run.failure = Some(Failure { phase: from, message: e.to_string() });
                    self.save_run(&run)?;
                    return Err(ServiceError::Phase { phase: from, source: Box::new(e) });
                }
            }
        }
        Ok(run)
    }

    pub fn gate_log(&self, run_id: &str, gate: GateId) -> Result<GateLog> {
        self.load_run(run_id)?;
        let path = self.run_dir(run_id).join(pipeline::gate_path(gate));
        if !path.exists() {
            return Err(GateError::NotOpened(gate).into());
        }
        read_json(&path)
    }

    /// Resolves the open version of a gate, then lets the pipeline continue
    /// to the next pause.
    pub fn review(&self, run_id: &str, sub: &ReviewSubmission) -> Result<(ReviewGate, Run)> {
        let lock = self.lock(run_id);
        let _guard = lock.lock().expect("run lock");
        let run = self.load_run(run_id)?;
        let mut log = match self.gate_log(run_id, sub.gate_id) {
            Ok(l) => l,
            Err(ServiceError::Gate(GateError::NotOpened(g))) => {
                return Err(GateError::GateOrderViolation { gate: g, prior: g.prior().unwrap_or(g) }.into())
            }
            Err(e) => return Err(e),
        };
        let resolved = gates::submit_review(&mut log, sub)?.clone();
        let rel = pipeline::gate_path(sub.gate_id);
        write_atomic(&self.run_dir(run_id).join(&rel), log.to_json().as_bytes())?;
        let run = self.advance_locked(run, AdvanceOptions::default())?;
        Ok((resolved, run))
    }

    /// Opens a new version of a resolved gate over the same payload and
    /// rewinds the run to it. Artifacts produced after the gate are removed;
    /// gate histories are kept.
    pub fn reopen(&self, run_id: &str, gate: GateId) -> Result<(ReviewGate, Run)> {
        let lock = self.lock(run_id);
        let _guard = lock.lock().expect("run lock");
        let mut run = self.load_run(run_id)?;
        let gate_phase = Phase::of_gate(gate);
        let reached = match &run.failure {
            Some(f) => f.phase > gate_phase,
            None => run.phase > gate_phase,
        };
        let mut log = self.gate_log(run_id, gate)?;
        if log.is_open() {
            return Err(GateError::GateAlreadyOpen(gate).into());
        }
        if !reached && run.phase != Phase::Rejected {
            return Err(ServiceError::WrongPhase {
                actual: run.phase,
                operation: "reopen",
                expected: "a run past the gate",
            });
        }
        let current = log.current().expect("resolved gate has a version").clone();
        let mut book = BTreeMap::new();
        for g in GateId::ALL {
            if let Ok(l) = self.gate_log(run_id, g) {
                book.insert(g, l);
            }
        }
        book.insert(gate, log);
        gates::open_gate(&mut book, gate, &current.payload_ref, current.payload)?;
        log = book.remove(&gate).expect("inserted");
        let dir = self.run_dir(run_id);
        write_atomic(&dir.join(pipeline::gate_path(gate)), log.to_json().as_bytes())?;
        let stale: Vec<String> = run
            .artifacts
            .iter()
            .filter(|(path, phase)| **phase > gate_phase && !path.starts_with("gates/"))
            .map(|(p, _)| p.clone())
            .collect();
        for rel in stale {
            let p = dir.join(&rel);
            if p.exists() {
                fs::remove_file(&p).map_err(io::io_err(&p))?;
            }
            run.artifacts.remove(&rel);
        }
        run.phase = gate_phase;
        run.failure = None;
        self.save_run(&run)?;
        Ok((log.current().expect("opened").clone(), run))
    }

    /// Records the category selection and continues to the PostRanking gate.
    pub fn select(&self, run_id: &str, patterns: &[String], profile: Option<&str>) -> Result<(SelectionDoc, Run)> {
        let lock = self.lock(run_id);
        let _guard = lock.lock().expect("run lock");
        let mut run = self.load_run(run_id)?;
        if run.phase != Phase::Categorized {
            return Err(ServiceError::WrongPhase {
                actual: run.phase,
                operation: "selection",
                expected: "Categorized",
            });
        }
        let inputs = self.inputs(run_id)?;
        let doc = pipeline::write_selection(self, &mut run, &inputs, patterns, profile)?;
        self.save_run(&run)?;
        let run = self.advance_locked(run, AdvanceOptions::default())?;
        Ok((doc, run))
    }

    pub fn categories(&self, run_id: &str, profile: Option<&str>) -> Result<CategoriesDoc> {
        pipeline::categories_view(self, run_id, profile)
    }

    pub fn ranking(&self, run_id: &str, profile: Option<&str>) -> Result<RankingDoc> {
        pipeline::ranking_view(self, run_id, profile)
    }

    pub fn matches(&self, run_id: &str) -> Result<Vec<crate::nexus::MatchCandidate>> {
        self.load_run(run_id)?;
        let p = self.run_dir(run_id).join("matches.jsonl");
        if !p.exists() {
            return Ok(vec![]);
        }
        read_jsonl(&p)
    }

    pub fn reports(&self, run_id: &str) -> Result<Vec<crate::nexus::OntologyReport>> {
        self.load_run(run_id)?;
        pipeline::read_reports(&self.run_dir(run_id))
    }

    pub fn pruned(&self, run_id: &str) -> Result<PrunedDoc> {
        let run = self.load_run(run_id)?;
        if run.phase != Phase::Complete {
            return Err(ServiceError::WrongPhase { actual: run.phase, operation: "pruned list", expected: "Complete" });
        }
        read_json(&self.run_dir(run_id).join("pruned.json"))
    }

    /// Feedback labels from the current PostRanking decisions, keyed by each
    /// patent's category.
    pub fn export_labels(&self, run_id: &str) -> Result<Vec<LabelRecord>> {
        let log = match self.gate_log(run_id, GateId::PostRanking) {
            Ok(l) => l,
            Err(ServiceError::Gate(GateError::NotOpened(_))) => return Ok(vec![]),
            Err(e) => return Err(e),
        };
        let ranking: RankingDoc = read_json(&self.run_dir(run_id).join("ranking.json"))?;
        let query_of: BTreeMap<String, String> =
            ranking.entries.into_iter().map(|e| (e.patent_id, e.category)).collect();
        Ok(gates::export_feedback_labels(&log, &query_of))
    }
}

/// Base labels with feedback applied: a feedback label replaces every base
/// label for the same patent.
pub fn merge_labels(base: &[LabelRecord], feedback: &[LabelRecord]) -> Vec<LabelRecord> {
    let overridden: BTreeSet<&str> = feedback.iter().map(|l| l.patent_id.as_str()).collect();
    let mut out: Vec<LabelRecord> = base
        .iter()
        .filter(|l| !overridden.contains(l.patent_id.as_str()))
        .cloned()
        .chain(feedback.iter().cloned())
        .collect();
    out.sort();
    out
}

/// Trains a ranker on labels over the feature vectors of `inputs`' portfolio.
pub fn train_model(inputs: &Inputs, labels: &[LabelRecord], hyper: &TrainParams) -> Result<RankerModel<f64>> {
    let (portfolio, _) = inputs.clean_portfolio()?;
    let vectors: BTreeMap<String, FeatureVector<f64>> = compute_vectors(&portfolio, inputs)?;
    let ts = ltr::TrainingSet::from_labels(labels, &vectors)?;
    Ok(ltr::train(&ts, hyper)?)
}
