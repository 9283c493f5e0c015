//! Claim parsing and Seed Profile construction.
//!
//! The parser is a small surface grammar: preamble, transitional phrase,
//! then limitations separated by semicolons or enumeration markers. It is
//! total on non-empty text; anything it cannot place falls back to
//! `Unknown` fields rather than failing.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClaimText, PatentRecord, Portfolio};
use crate::text::{self, IdfTable};

#[derive(Debug, Error, PartialEq)]
pub enum ClaimError {
    #[error("claim {0} is empty")]
    EmptyClaim(u32),
    #[error("patent {0} has no parsable independent claim")]
    NoIndependentClaims(String),
    #[error("io error reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transitional {
    Comprising,
    ConsistingOf,
    ConsistingEssentiallyOf,
    Unknown,
}

impl Transitional {
    pub fn phrase(self) -> &'static str {
        match self {
            Transitional::Comprising => "comprising",
            Transitional::ConsistingOf => "consisting of",
            Transitional::ConsistingEssentiallyOf => "consisting essentially of",
            Transitional::Unknown => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimKind {
    Product,
    Process,
    Composition,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedClaim {
    pub claim_number: u32,
    pub preamble: String,
    pub transitional: Transitional,
    pub limitations: Vec<String>,
    pub is_independent: bool,
    pub claim_kind: ClaimKind,
}

impl ParsedClaim {
    pub fn full_text(&self) -> String {
        let mut s = self.preamble.clone();
        for l in &self.limitations {
            s.push(' ');
            s.push_str(l);
        }
        s
    }
}

static TRANSITIONAL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(consisting\s+essentially\s+of|consisting\s+of|comprising|comprises|including)\b").unwrap()
});
static DEPENDENCY_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bclaims?\s+\d+").unwrap());
static ENUMERATION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)\(?(?:[a-h]|[ivx]{1,4}|\d{1,2})\)\s").unwrap());
static NUMERIC_RANGE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(\d+(?:\.\d+)?\s*[%a-zµ°]*\s*(?:to|-|–|and)\s*\d+(?:\.\d+)?|\b(?:at least|at most|less than|greater than|more than|no more than|no less than|between)\s+(?:about\s+)?\d)",
    )
    .unwrap()
});

const PROCESS_NOUNS: &[&str] = &["method", "process", "procedure"];
const COMPOSITION_NOUNS: &[&str] = &["composition", "compound", "formulation", "mixture", "alloy"];
const PRODUCT_NOUNS: &[&str] = &[
    "apparatus",
    "system",
    "device",
    "medium",
    "media",
    "circuit",
    "array",
    "machine",
    "controller",
    "memory",
    "chip",
    "assembly",
    "product",
    "article",
    "module",
    "package",
    "structure",
];

/// Specific material names; a limitation naming one is harder to avoid.
pub const MATERIAL_TERMS: &[&str] = &[
    "aluminum",
    "carbon",
    "ceramic",
    "copper",
    "germanium",
    "glass",
    "gold",
    "graphene",
    "hafnium",
    "nickel",
    "nitride",
    "oxide",
    "polymer",
    "polysilicon",
    "silicon",
    "silver",
    "steel",
    "tantalum",
    "titanium",
    "tungsten",
];

fn kind_of(head: &str) -> ClaimKind {
    for tok in text::raw_tokens(head) {
        if PROCESS_NOUNS.contains(&tok.as_str()) {
            return ClaimKind::Process;
        }
        if COMPOSITION_NOUNS.contains(&tok.as_str()) {
            return ClaimKind::Composition;
        }
        if PRODUCT_NOUNS.contains(&tok.as_str()) {
            return ClaimKind::Product;
        }
    }
    ClaimKind::Unknown
}

fn clean_segment(s: &str) -> String {
    let mut t = s.trim().trim_end_matches(['.', ',', ';', ':']).trim().to_string();
    for suffix in [" and", " or"] {
        if t.to_lowercase().ends_with(suffix) {
            t.truncate(t.len() - suffix.len());
        }
    }
    if t.to_lowercase().starts_with("and ") {
        t = t[4..].to_string();
    }
    t.trim().trim_end_matches(',').trim().to_string()
}

fn split_limitations(body: &str) -> Vec<String> {
    body.split([';', '\n'])
        .flat_map(|seg| ENUMERATION_RE.split(seg).map(str::to_string).collect::<Vec<_>>())
        .map(|s| clean_segment(&s))
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn parse_claim(text: &str, number: u32) -> Result<ParsedClaim, ClaimError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ClaimError::EmptyClaim(number));
    }
    let is_independent = !DEPENDENCY_RE.is_match(text);
    let (preamble, transitional, limitations, head) = match TRANSITIONAL_RE.find(text) {
        Some(m) => {
            let phrase = m.as_str().to_lowercase();
            let transitional = if phrase.contains("essentially") {
                Transitional::ConsistingEssentiallyOf
            } else if phrase.starts_with("consisting") {
                Transitional::ConsistingOf
            } else {
                Transitional::Comprising
            };
            let preamble = text[..m.start()].trim().trim_end_matches([',', ':']).trim().to_string();
            let body = text[m.end()..].trim_start_matches([':', ',', ' ', '\n', '\t']);
            let mut limitations = split_limitations(body);
            if limitations.is_empty() {
                limitations.push(clean_segment(body));
                limitations.retain(|l| !l.is_empty());
            }
            let head = preamble.clone();
            (preamble, transitional, limitations, head)
        }
        None => {
            let body = clean_segment(text);
            let head = text.split(',').next().unwrap_or(text).to_string();
            (String::new(), Transitional::Unknown, vec![body], head)
        }
    };
    let mut limitations = limitations;
    if limitations.is_empty() {
        limitations.push(clean_segment(text));
    }
    Ok(ParsedClaim {
        claim_number: number,
        claim_kind: kind_of(&head),
        preamble,
        transitional,
        limitations,
        is_independent,
    })
}

/// Terms that read on many embodiments ("means", "member", ...).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BroadTermLexicon {
    terms: Vec<String>,
}

pub const STARTER_BROAD_TERMS: &[&str] =
    &["means", "member", "element", "mechanism", "unit", "component", "assembly", "circuitry"];

impl BroadTermLexicon {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty() && !t.starts_with('#'))
            .collect();
        BroadTermLexicon { terms: set.into_iter().collect() }
    }

    pub fn starter() -> Self {
        Self::new(STARTER_BROAD_TERMS)
    }

    pub fn parse(text: &str) -> Self {
        Self::new(text.lines())
    }

    pub fn load(path: &Path) -> Result<Self, ClaimError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| ClaimError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    /// Number of lexicon hits in `text`, matched on whole token sequences.
    pub fn hits(&self, text: &str) -> usize {
        let tokens = text::raw_tokens(text);
        self.terms
            .iter()
            .map(|term| {
                let pat = text::raw_tokens(term);
                if pat.is_empty() || pat.len() > tokens.len() {
                    return 0;
                }
                tokens.windows(pat.len()).filter(|w| *w == pat.as_slice()).count()
            })
            .sum()
    }
}

/// Logistic blend of broad-term hits, limitation count and claim openness.
pub fn breadth_score(c: &ParsedClaim, lexicon: &BroadTermLexicon) -> f64 {
    let hits = lexicon.hits(&c.full_text()) as f64;
    let extra_limitations = c.limitations.len().saturating_sub(1) as f64;
    let open = if c.transitional == Transitional::Comprising { 0.5 } else { 0.0 };
    let z = hits - 0.25 * extra_limitations + open;
    1.0 / (1.0 + (-z).exp())
}

fn is_indispensable(limitation: &str) -> bool {
    NUMERIC_RANGE_RE.is_match(limitation)
        || text::raw_tokens(limitation).iter().any(|t| MATERIAL_TERMS.contains(&t.as_str()))
}

/// Weighted limitation count, with numeric ranges and named materials
/// counting double.
pub fn weighted_limitation_count(c: &ParsedClaim) -> f64 {
    c.limitations.iter().map(|l| if is_indispensable(l) { 2.0 } else { 1.0 }).sum()
}

/// `1 - 1/w` over the weighted limitation count `w`: 0 for a single plain
/// limitation, approaching 1 as the claim accumulates constraints a
/// competitor can step around.
pub fn design_around_score(c: &ParsedClaim) -> f64 {
    let w = weighted_limitation_count(c);
    if w <= 0.0 {
        0.0
    } else {
        1.0 - 1.0 / w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProfile {
    pub patent_id: String,
    pub solution_summary: String,
    pub problem_statement: String,
    pub breadth_score: f64,
    pub design_around_score: f64,
    pub key_terms: Vec<String>,
    pub claim_kind: ClaimKind,
    pub independent_claims: usize,
    pub mapping_confidence: String,
}

impl SeedProfile {
    /// Text compared against need descriptions: the problem the patent solves.
    pub fn match_text(&self) -> &str {
        &self.problem_statement
    }
}

const PROBLEM_CUES: &[&str] = &["a need exists", "there is a need", "problem of", "disadvantage"];
const DESCRIPTION_WINDOW: usize = 2000;

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        cur.push(c);
        let boundary = matches!(c, '.' | '!' | '?') && chars.get(i + 1).map(|n| n.is_whitespace()).unwrap_or(true);
        if boundary {
            let s = cur.trim().to_string();
            if !s.is_empty() {
                out.push(s);
            }
            cur.clear();
        }
    }
    let s = cur.trim().to_string();
    if !s.is_empty() {
        out.push(s);
    }
    out
}

/// Problem statement from cue phrases in the abstract and the head of the
/// description, else the first abstract sentence.
pub fn extract_problem_statement(record: &PatentRecord) -> String {
    let head: String = record.description.chars().take(DESCRIPTION_WINDOW).collect();
    let text = format!("{} {}", record.abstract_text, head);
    for sentence in sentences(&text) {
        let lower = sentence.to_lowercase();
        for cue in PROBLEM_CUES {
            if let Some(pos) = lower.find(cue) {
                let rest = sentence[pos + cue.len()..]
                    .trim_start_matches([' ', ':', ','])
                    .trim_end_matches(['.', '!', '?'])
                    .trim();
                let rest =
                    ["for ", "to ", "in ", "of "].iter().find_map(|p| rest.strip_prefix(p)).unwrap_or(rest).trim();
                if !rest.is_empty() {
                    return rest.to_string();
                }
                return sentence.trim_end_matches(['.', '!', '?']).to_string();
            }
        }
    }
    sentences(&record.abstract_text)
        .into_iter()
        .next()
        .map(|s| s.trim_end_matches(['.', '!', '?']).to_string())
        .unwrap_or_else(|| record.title.clone())
}

pub fn seed_document(record: &PatentRecord) -> String {
    let mut doc = record.abstract_text.clone();
    for c in &record.claims {
        doc.push(' ');
        doc.push_str(&c.text);
    }
    doc
}

/// Parses all claims of a record, skipping empty ones.
pub fn parse_claims(claims: &[ClaimText]) -> Vec<ParsedClaim> {
    claims.iter().filter_map(|c| parse_claim(&c.text, c.number).ok()).collect()
}

/// Turns a patent into a Seed Profile. The default implementation is
/// [`PatternSeedAnalyzer`]; learned analyzers can be dropped in behind it.
pub trait SeedAnalyzer {
    fn analyze(&self, record: &PatentRecord) -> Result<SeedProfile, ClaimError>;
}

pub const KEY_TERM_COUNT: usize = 20;

pub struct PatternSeedAnalyzer {
    idf: IdfTable,
    lexicon: BroadTermLexicon,
}

impl PatternSeedAnalyzer {
    /// IDF statistics over claims + abstract of every record in `corpus`.
    pub fn new(corpus: &Portfolio, lexicon: BroadTermLexicon) -> Self {
        let docs: Vec<String> = corpus.records.iter().map(seed_document).collect();
        PatternSeedAnalyzer { idf: IdfTable::from_documents(docs.iter().map(String::as_str)), lexicon }
    }
}

impl SeedAnalyzer for PatternSeedAnalyzer {
    fn analyze(&self, record: &PatentRecord) -> Result<SeedProfile, ClaimError> {
        build_seed_profile(record, &self.idf, &self.lexicon)
    }
}

pub fn build_seed_profile(
    record: &PatentRecord,
    idf: &IdfTable,
    lexicon: &BroadTermLexicon,
) -> Result<SeedProfile, ClaimError> {
    let independent: Vec<ParsedClaim> = parse_claims(&record.claims).into_iter().filter(|c| c.is_independent).collect();
    if independent.is_empty() {
        return Err(ClaimError::NoIndependentClaims(record.patent_id.clone()));
    }
    let scored: Vec<(f64, f64, &ParsedClaim)> =
        independent.iter().map(|c| (breadth_score(c, lexicon), design_around_score(c), c)).collect();
    let (best_breadth, _, broadest) = scored
        .iter()
        .copied()
        .fold(None::<(f64, f64, &ParsedClaim)>, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        })
        .expect("non-empty");
    let min_design_around = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let claim_kind = independent.iter().map(|c| c.claim_kind).min().unwrap_or(ClaimKind::Unknown);

    let lead: Vec<&str> = broadest.limitations.iter().take(2).map(String::as_str).collect();
    let solution_summary = if broadest.transitional == Transitional::Unknown {
        format!("{}: {}", record.title, lead.join("; "))
    } else {
        format!("{}: {} {} {}", record.title, broadest.preamble, broadest.transitional.phrase(), lead.join("; "))
    };

    Ok(SeedProfile {
        patent_id: record.patent_id.clone(),
        solution_summary,
        problem_statement: extract_problem_statement(record),
        breadth_score: best_breadth,
        design_around_score: min_design_around,
        key_terms: text::top_terms(idf, &seed_document(record), KEY_TERM_COUNT),
        claim_kind,
        independent_claims: independent.len(),
        mapping_confidence: "heuristic".to_string(),
    })
}
