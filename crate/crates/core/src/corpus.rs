//! Ingestion, legal-status filtering and entity normalization.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed records: {}", format_rejections(.0))]
    MalformedRecord(Vec<RejectedLine>),
    #[error("duplicate patent_id {id} on lines {first_line} and {second_line}")]
    DuplicateId { id: String, first_line: usize, second_line: usize },
    #[error("portfolio is empty")]
    EmptyPortfolio,
    #[error("alias table: {0}")]
    AliasTable(String),
}

fn format_rejections(r: &[RejectedLine]) -> String {
    r.iter().map(|l| format!("line {}: {}", l.line, l.reason)).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LegalStatus {
    Granted,
    Pending,
    Expired,
    Abandoned,
    Lapsed,
    Invalidated,
}

impl LegalStatus {
    pub fn is_in_force(self) -> bool {
        matches!(self, LegalStatus::Granted | LegalStatus::Pending)
    }
}

impl fmt::Display for LegalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimText {
    pub number: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventorRef {
    pub name: String,
    #[serde(default)]
    pub canonical_name: String,
    #[serde(default)]
    pub h_index: f64,
    /// Number of distinct collaborators, at least 1 (the inventor).
    #[serde(default = "one")]
    pub collaborations: f64,
    /// Share of the inventor's litigated patents upheld, in [0,1].
    #[serde(default)]
    pub litigation_success: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JurisdictionStatus {
    Granted,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jurisdiction {
    pub country: String,
    pub status: JurisdictionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardCitation {
    pub citing_id: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reassignment {
    pub date: NaiveDate,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LitigationOutcome {
    PlaintiffWin,
    Settlement,
    DefendantWin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LitigationEvent {
    pub outcome: LitigationOutcome,
    /// Case value in USD.
    pub case_value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    #[serde(default)]
    pub n102: u32,
    #[serde(default)]
    pub n103: u32,
    #[serde(default)]
    pub n112: u32,
}

/// One normalized patent document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub description: String,
    pub claims: Vec<ClaimText>,
    pub filing_date: NaiveDate,
    pub grant_date: Option<NaiveDate>,
    pub expiry_date: Option<NaiveDate>,
    pub legal_status: LegalStatus,
    pub assignee_raw: String,
    #[serde(default)]
    pub assignee_canonical: String,
    #[serde(default)]
    pub inventors: Vec<InventorRef>,
    pub cpc_codes: Vec<String>,
    #[serde(default)]
    pub family_members: Vec<String>,
    #[serde(default)]
    pub jurisdictions: Vec<Jurisdiction>,
    #[serde(default)]
    pub forward_citations: Vec<ForwardCitation>,
    #[serde(default)]
    pub backward_citations: Vec<String>,
    #[serde(default)]
    pub examiner_citations: Vec<String>,
    #[serde(default)]
    pub reassignments: Vec<Reassignment>,
    #[serde(default)]
    pub litigation_events: Vec<LitigationEvent>,
    #[serde(default)]
    pub rejection_events: RejectionCounts,
    #[serde(default)]
    pub cip_flag: bool,
    #[serde(default)]
    pub direct_metrics: BTreeMap<String, f64>,
    /// Optional inputs that were absent from the source line.
    #[serde(default)]
    pub missing_data: Vec<String>,
}

impl PatentRecord {
    pub fn primary_cpc(&self) -> &str {
        self.cpc_codes.first().map(String::as_str).unwrap_or("")
    }

    fn validate(&self) -> Result<(), String> {
        if self.patent_id.trim().is_empty() {
            return Err("patent_id is empty".into());
        }
        if let Some(grant) = self.grant_date {
            if self.filing_date > grant {
                return Err(format!("filing_date {} after grant_date {grant}", self.filing_date));
            }
        }
        if let Some(expiry) = self.expiry_date {
            let lower = self.grant_date.unwrap_or(self.filing_date);
            if lower > expiry {
                return Err(format!("expiry_date {expiry} precedes {lower}"));
            }
        }
        if let Some(ev) = self.litigation_events.iter().find(|e| !(e.case_value >= 0.0 && e.case_value.is_finite())) {
            return Err(format!("case_value {} is negative or not finite", ev.case_value));
        }
        Ok(())
    }
}

const REQUIRED_FIELDS: &[&str] = &[
    "patent_id",
    "title",
    "claims",
    "filing_date",
    "grant_date",
    "expiry_date",
    "legal_status",
    "assignee_raw",
    "cpc_codes",
];

const OPTIONAL_EVENT_FIELDS: &[&str] = &[
    "family_members",
    "jurisdictions",
    "forward_citations",
    "backward_citations",
    "examiner_citations",
    "reassignments",
    "litigation_events",
    "rejection_events",
    "inventors",
    "direct_metrics",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub records: Vec<PatentRecord>,
    pub evaluation_date: NaiveDate,
    /// SHA-256 of the source file.
    pub provenance: String,
}

impl Portfolio {
    pub fn get(&self, patent_id: &str) -> Option<&PatentRecord> {
        self.records.iter().find(|r| r.patent_id == patent_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn parse_line(line: &str) -> Result<PatentRecord, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("bad JSON: {e}"))?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    if let Some(missing) = REQUIRED_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
        return Err(format!("missing required field `{missing}`"));
    }
    let absent: Vec<String> =
        OPTIONAL_EVENT_FIELDS.iter().filter(|f| !obj.contains_key(**f)).map(|f| f.to_string()).collect();
    let mut record: PatentRecord = serde_json::from_value(value).map_err(|e| format!("schema violation: {e}"))?;
    record.missing_data = absent;
    record.validate()?;
    Ok(record)
}

/// Parse JSONL text into a portfolio. Every malformed line is collected
/// before failing so the caller sees all rejections at once.
pub fn parse_portfolio(text: &str, evaluation_date: NaiveDate) -> Result<Portfolio, CorpusError> {
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(rec) => {
                if let Some(&first_line) = seen.get(&rec.patent_id) {
                    return Err(CorpusError::DuplicateId { id: rec.patent_id, first_line, second_line: line_no });
                }
                seen.insert(rec.patent_id.clone(), line_no);
                records.push(rec);
            }
            Err(reason) => rejected.push(RejectedLine { line: line_no, reason }),
        }
    }
    if !rejected.is_empty() {
        return Err(CorpusError::MalformedRecord(rejected));
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyPortfolio);
    }
    Ok(Portfolio { records, evaluation_date, provenance: sha256_hex(text.as_bytes()) })
}

pub fn ingest_portfolio(path: &Path, evaluation_date: NaiveDate) -> Result<Portfolio, CorpusError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_portfolio(&text, evaluation_date)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub patent_id: String,
    pub reason: String,
}

/// Split a portfolio into records in force (granted or pending) and the rest.
pub fn verify_legal_status(p: Portfolio) -> (Portfolio, Vec<DroppedRecord>) {
    let Portfolio { records, evaluation_date, provenance } = p;
    let (kept, dropped): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| r.legal_status.is_in_force());
    let dropped = dropped
        .into_iter()
        .map(|r| DroppedRecord { reason: r.legal_status.to_string(), patent_id: r.patent_id })
        .collect();
    (Portfolio { records: kept, evaluation_date, provenance }, dropped)
}

pub const DEFAULT_LEGAL_SUFFIXES: &[&str] = &["CORP", "INC", "LTD", "LLC", "CO", "GMBH"];

/// Alias patterns and legal suffixes used to canonicalize names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityAliasTable {
    entries: Vec<(String, String)>,
    suffixes: Vec<String>,
}

impl Default for EntityAliasTable {
    fn default() -> Self {
        EntityAliasTable {
            entries: Vec::new(),
            suffixes: DEFAULT_LEGAL_SUFFIXES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Uppercase, replace punctuation with spaces, collapse whitespace.
pub fn clean_name(raw: &str) -> String {
    let replaced: String =
        raw.chars().map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' }).collect();
    replaced.split_whitespace().map(|w| w.to_uppercase()).collect::<Vec<_>>().join(" ")
}

impl EntityAliasTable {
    pub fn new<I>(entries: I, suffixes: Vec<String>) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = EntityAliasTable {
            entries: Vec::new(),
            suffixes: suffixes.iter().map(|s| clean_name(s)).filter(|s| !s.is_empty()).collect(),
        };
        let mut seen = BTreeMap::new();
        for (pattern, canonical) in entries {
            let canonical = canonical.trim().to_string();
            if canonical.is_empty() {
                return Err(CorpusError::AliasTable(format!("empty canonical for pattern `{pattern}`")));
            }
            let key = table.strip_suffixes(&clean_name(&pattern));
            if key.is_empty() {
                return Err(CorpusError::AliasTable(format!("pattern `{pattern}` normalizes to nothing")));
            }
            if seen.insert(key.clone(), canonical.clone()).is_some() {
                return Err(CorpusError::AliasTable(format!("duplicate pattern `{key}`")));
            }
            table.entries.push((key, canonical));
        }
        // A canonical name that is itself a pattern must map to itself,
        // otherwise normalization would not be idempotent.
        for (_, canonical) in &table.entries {
            let key = table.strip_suffixes(&clean_name(canonical));
            if let Some(target) = seen.get(&key) {
                if target != canonical {
                    return Err(CorpusError::AliasTable(format!(
                        "canonical `{canonical}` is also a pattern for `{target}`"
                    )));
                }
            }
        }
        Ok(table)
    }

    /// Read `pattern,canonical` rows (header required).
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CorpusError::AliasTable(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "pattern" || &headers[1] != "canonical" {
            return Err(CorpusError::AliasTable("header must be `pattern,canonical`".into()));
        }
        let mut rows = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| CorpusError::AliasTable(e.to_string()))?;
            rows.push((row[0].to_string(), row[1].to_string()));
        }
        Self::new(rows, DEFAULT_LEGAL_SUFFIXES.iter().map(|s| s.to_string()).collect())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file =
            std::fs::File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        Self::from_csv_reader(file)
    }

    pub fn with_suffixes(mut self, suffixes: Vec<String>) -> Result<Self, CorpusError> {
        let entries = std::mem::take(&mut self.entries);
        Self::new(entries, suffixes)
    }

    fn strip_suffixes(&self, cleaned: &str) -> String {
        let mut words: Vec<&str> = cleaned.split(' ').filter(|w| !w.is_empty()).collect();
        while words.len() > 1 && self.suffixes.iter().any(|s| s == words[words.len() - 1]) {
            words.pop();
        }
        words.join(" ")
    }

    /// Canonical form of a raw entity name.
    pub fn canonicalize(&self, raw: &str) -> String {
        let key = self.strip_suffixes(&clean_name(raw));
        self.entries.iter().find(|(pattern, _)| *pattern == key).map(|(_, canonical)| canonical.clone()).unwrap_or(key)
    }
}

/// Fill `assignee_canonical` and inventor canonical names.
pub fn normalize_entities(mut p: Portfolio, aliases: &EntityAliasTable) -> Portfolio {
    for rec in &mut p.records {
        rec.assignee_canonical = aliases.canonicalize(&rec.assignee_raw);
        for inv in &mut rec.inventors {
            inv.canonical_name = clean_name(&inv.name);
        }
    }
    p
}
