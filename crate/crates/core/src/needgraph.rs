//! Need knowledge graph: pattern-based triple extraction from market text,
//! clustering of triples into need nodes, and term-overlap lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EntityAliasTable;
use crate::params::demand_snr;
use crate::text::{content_tokens, jaccard, token_set};

#[derive(Debug, Error)]
pub enum NeedError {
    #[error("unknown source type {0}")]
    UnknownSourceType(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("pattern line {line}: {reason}")]
    BadPattern { line: usize, reason: String },
    #[error("needs corpus line {line}: {reason}")]
    BadDocument { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid need-graph config: {0}")]
    Config(String),
}

pub type Result<T, E = NeedError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Seeks,
    Needs,
    InvestingIn,
    StrugglesWith,
    ConstrainedBy,
}

impl FromStr for Relation {
    type Err = NeedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Seeks" => Ok(Relation::Seeks),
            "Needs" => Ok(Relation::Needs),
            "InvestingIn" => Ok(Relation::InvestingIn),
            "StrugglesWith" => Ok(Relation::StrugglesWith),
            "ConstrainedBy" => Ok(Relation::ConstrainedBy),
            other => Err(NeedError::UnknownRelation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceType {
    RegulatoryFiling,
    EarningsCall,
    MarketReport,
    News,
    Blog,
}

impl FromStr for SourceType {
    type Err = NeedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "RegulatoryFiling" => Ok(SourceType::RegulatoryFiling),
            "EarningsCall" => Ok(SourceType::EarningsCall),
            "MarketReport" => Ok(SourceType::MarketReport),
            "News" => Ok(SourceType::News),
            "Blog" => Ok(SourceType::Blog),
            other => Err(NeedError::UnknownSourceType(other.to_string())),
        }
    }
}

fn default_authority() -> BTreeMap<SourceType, f64> {
    use SourceType::*;
    [(RegulatoryFiling, 1.0), (EarningsCall, 0.9), (MarketReport, 0.7), (News, 0.5), (Blog, 0.4)].into_iter().collect()
}

/// Authority score of a source type under the default table.
pub fn authority_of(source_type: &str) -> Result<f64> {
    let t: SourceType = source_type.parse()?;
    Ok(default_authority()[&t])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeedGraphConfig {
    pub authority: BTreeMap<SourceType, f64>,
    /// Minimum Jaccard overlap with a node's founding phrase to join it.
    pub merge_jaccard: f64,
    /// Mentions are counted over this many days ending at the reference date.
    pub window_days: i64,
    /// Expected mentions per window for an unremarkable need.
    pub noise_baseline: f64,
    pub demand_floor_db: f64,
}

impl Default for NeedGraphConfig {
    fn default() -> Self {
        NeedGraphConfig {
            authority: default_authority(),
            merge_jaccard: 0.6,
            window_days: 730,
            noise_baseline: 1.0,
            demand_floor_db: -60.0,
        }
    }
}

impl NeedGraphConfig {
    pub fn validate(&self) -> Result<()> {
        for (t, a) in &self.authority {
            if !(0.0..=1.0).contains(a) {
                return Err(NeedError::Config(format!("authority for {t:?} is {a}")));
            }
        }
        if !(self.noise_baseline > 0.0) || self.window_days <= 0 || !(0.0..=1.0).contains(&self.merge_jaccard) {
            return Err(NeedError::Config(
                "noise baseline and window must be positive, merge threshold in [0,1]".into(),
            ));
        }
        Ok(())
    }

    pub fn authority(&self, t: SourceType) -> f64 {
        self.authority.get(&t).copied().unwrap_or_else(|| default_authority()[&t])
    }
}

/// One line of `needs_corpus.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDoc {
    pub doc_id: String,
    pub source_type: SourceType,
    pub date: NaiveDate,
    pub text: String,
}

pub fn parse_needs_corpus<R: BufRead>(reader: R) -> Result<Vec<SourceDoc>> {
    let mut docs = vec![];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| NeedError::Io { path: "needs corpus".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| NeedError::BadDocument { line: i + 1, reason: e.to_string() })?;
        if let Some(t) = raw.get("source_type").and_then(|v| v.as_str()) {
            t.parse::<SourceType>()?;
        }
        let doc: SourceDoc =
            serde_json::from_value(raw).map_err(|e| NeedError::BadDocument { line: i + 1, reason: e.to_string() })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_needs_corpus(path: &Path) -> Result<Vec<SourceDoc>> {
    let f = std::fs::File::open(path).map_err(|source| NeedError::Io { path: path.display().to_string(), source })?;
    parse_needs_corpus(std::io::BufReader::new(f))
}

const ENTITY_RE: &str = r"\b(?P<ent>[A-Z][A-Za-z0-9&'\-]*(?:[ \t]+[A-Z][A-Za-z0-9&'\-]*)*)";
const PHRASE_RE: &str = r"(?P<phrase>[^.;!?\n]+?)(?:[.;!?](?:\s|$)|\n|$)";

#[derive(Debug, Clone)]
pub struct Pattern {
    pub relation: Relation,
    pub template: String,
    regex: Regex,
}

impl Pattern {
    /// `template` holds literal text around the `<ENT>` and `<PHRASE>` slots.
    pub fn new(relation: Relation, template: &str) -> std::result::Result<Self, String> {
        let ent = template.find("<ENT>").ok_or("missing <ENT> slot")?;
        let phrase = template.find("<PHRASE>").ok_or("missing <PHRASE> slot")?;
        if phrase < ent {
            return Err("<ENT> must precede <PHRASE>".into());
        }
        let before = &template[..ent];
        let middle = &template[ent + 5..phrase];
        let after = &template[phrase + 8..];
        if !after.trim().is_empty() {
            return Err("<PHRASE> must end the template".into());
        }
        let literal = |s: &str| s.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+");
        let mut re = String::new();
        if !before.trim().is_empty() {
            re.push_str(&literal(before));
            re.push_str(r"\s+");
        }
        re.push_str(ENTITY_RE);
        re.push_str(r"\s+");
        re.push_str(&literal(middle));
        re.push_str(r"\s+");
        re.push_str(PHRASE_RE);
        let regex = Regex::new(&re).map_err(|e| e.to_string())?;
        Ok(Pattern { relation, template: template.to_string(), regex })
    }
}

/// Ordered list of surface patterns (`patterns.txt`).
#[derive(Debug, Clone)]
pub struct PatternSet {
    pub patterns: Vec<Pattern>,
}

pub const DEFAULT_PATTERNS: &str = "\
StrugglesWith | <ENT> is struggling with <PHRASE>
Seeks | <ENT> seeks <PHRASE>
Needs | <ENT> needs <PHRASE>
InvestingIn | <ENT> is investing in <PHRASE>
ConstrainedBy | <ENT> lacks <PHRASE>
ConstrainedBy | <ENT> is constrained by <PHRASE>
";

impl Default for PatternSet {
    fn default() -> Self {
        PatternSet::parse(DEFAULT_PATTERNS).expect("built-in patterns are valid")
    }
}

impl PatternSet {
    /// Lines `Relation | template`; blank lines and `#` comments skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut patterns = vec![];
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| NeedError::BadPattern { line: i + 1, reason };
            let (rel, template) = line.split_once('|').ok_or_else(|| bad("expected `Relation | template`".into()))?;
            let relation: Relation = rel.parse().map_err(|e: NeedError| bad(e.to_string()))?;
            patterns.push(Pattern::new(relation, template.trim()).map_err(bad)?);
        }
        if patterns.is_empty() {
            return Err(NeedError::BadPattern { line: 0, reason: "no patterns".into() });
        }
        Ok(PatternSet { patterns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| NeedError::Io { path: path.display().to_string(), source })?;
        Self::parse(&s)
    }
}

const URGENCY_TERMS: &[&str] = &[
    "bottleneck",
    "critical",
    "critically",
    "immediate",
    "immediately",
    "pressing",
    "severe",
    "shortage",
    "urgent",
    "urgently",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: Relation,
    pub object: String,
    pub source_doc: String,
    pub source_type: SourceType,
    pub observed_date: NaiveDate,
    /// Byte offset of the match in the source text.
    pub offset: usize,
    /// Urgency-lexicon words found in the object phrase.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urgency: Vec<String>,
}

/// Applies every pattern left to right without overlap. At each point the
/// earliest match wins; equal starts go to the earlier pattern.
pub fn extract_triples(doc: &SourceDoc, patterns: &PatternSet, aliases: &EntityAliasTable) -> Vec<Triple> {
    let text = doc.text.as_str();
    let mut out = vec![];
    let mut pos = 0;
    while pos < text.len() {
        let best = patterns
            .patterns
            .iter()
            .filter_map(|p| p.regex.captures_at(text, pos).map(|c| (p, c)))
            .min_by_key(|(_, c)| c.get(0).map_or(usize::MAX, |m| m.start()));
        let Some((pattern, caps)) = best else { break };
        let whole = caps.get(0).expect("group 0 always present");
        let object = caps["phrase"].trim().to_string();
        let tokens = content_tokens(&object);
        out.push(Triple {
            subject: aliases.canonicalize(&caps["ent"]),
            relation: pattern.relation,
            urgency: URGENCY_TERMS.iter().filter(|u| tokens.iter().any(|t| t == *u)).map(|u| u.to_string()).collect(),
            object,
            source_doc: doc.doc_id.clone(),
            source_type: doc.source_type,
            observed_date: doc.date,
            offset: caps.get(1).map_or(whole.start(), |m| m.start()),
        });
        pos = whole.end().max(pos + 1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRef {
    pub source_doc: String,
    pub offset: usize,
    pub relation: Relation,
    pub object: String,
    pub source_type: SourceType,
    pub observed_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedNode {
    pub need_id: String,
    pub entity: String,
    pub description: String,
    pub supporting_triples: Vec<TripleRef>,
    pub authority: f64,
    pub demand_db: f64,
    pub mentions_in_window: usize,
    pub first_seen: NaiveDate,
    pub last_seen: NaiveDate,
    pub key_terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urgency: Vec<String>,
}

impl NeedNode {
    /// Supporting triple with the highest authority, earliest on ties.
    pub fn strongest_source(&self, cfg: &NeedGraphConfig) -> &TripleRef {
        self.supporting_triples
            .iter()
            .fold(None, |best: Option<&TripleRef>, t| match best {
                Some(b) if cfg.authority(b.source_type) >= cfg.authority(t.source_type) => Some(b),
                _ => Some(t),
            })
            .expect("need node has at least one triple")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NeedGraph {
    pub reference_date: Option<NaiveDate>,
    pub nodes: Vec<NeedNode>,
}

impl NeedGraph {
    pub fn get(&self, need_id: &str) -> Option<&NeedNode> {
        self.nodes.iter().find(|n| n.need_id == need_id)
    }
}

/// Clusters triples into need nodes. Triples are visited in (entity, date,
/// document, offset) order; each joins the first node of the same entity
/// whose founding phrase it overlaps at `merge_jaccard` or more.
pub fn build_graph(triples: &[Triple], cfg: &NeedGraphConfig, reference_date: NaiveDate) -> NeedGraph {
    let mut sorted: Vec<&Triple> = triples.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.subject, a.observed_date, &a.source_doc, a.offset).cmp(&(
            &b.subject,
            b.observed_date,
            &b.source_doc,
            b.offset,
        ))
    });
    struct Cluster<'a> {
        founding: BTreeSet<String>,
        members: Vec<&'a Triple>,
    }
    let mut clusters: Vec<Cluster> = vec![];
    for t in sorted {
        let tokens = token_set(&t.object);
        let home = clusters
            .iter_mut()
            .find(|c| c.members[0].subject == t.subject && jaccard(&c.founding, &tokens) >= cfg.merge_jaccard);
        match home {
            Some(c) => c.members.push(t),
            None => clusters.push(Cluster { founding: tokens, members: vec![t] }),
        }
    }
    let window_start = reference_date - chrono::Duration::days(cfg.window_days);
    let nodes = clusters
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let first = c.members[0];
            let in_window = c
                .members
                .iter()
                .filter(|t| t.observed_date > window_start && t.observed_date <= reference_date)
                .count();
            let key_terms: BTreeSet<String> = c.members.iter().flat_map(|t| token_set(&t.object)).collect();
            let urgency: BTreeSet<String> = c.members.iter().flat_map(|t| t.urgency.iter().cloned()).collect();
            NeedNode {
                need_id: format!("N{:03}", i + 1),
                entity: first.subject.clone(),
                description: first.object.clone(),
                supporting_triples: c
                    .members
                    .iter()
                    .map(|t| TripleRef {
                        source_doc: t.source_doc.clone(),
                        offset: t.offset,
                        relation: t.relation,
                        object: t.object.clone(),
                        source_type: t.source_type,
                        observed_date: t.observed_date,
                    })
                    .collect(),
                authority: c.members.iter().map(|t| cfg.authority(t.source_type)).fold(0.0, f64::max),
                demand_db: demand_snr(in_window as f64, cfg.noise_baseline, cfg.demand_floor_db)
                    .expect("noise baseline validated positive"),
                mentions_in_window: in_window,
                first_seen: c.members.iter().map(|t| t.observed_date).min().expect("nonempty"),
                last_seen: c.members.iter().map(|t| t.observed_date).max().expect("nonempty"),
                key_terms: key_terms.into_iter().collect(),
                urgency: urgency.into_iter().collect(),
            }
        })
        .collect();
    NeedGraph { reference_date: Some(reference_date), nodes }
}

/// Extracts from every document and builds the graph.
pub fn build_from_corpus(
    docs: &[SourceDoc],
    patterns: &PatternSet,
    aliases: &EntityAliasTable,
    cfg: &NeedGraphConfig,
    reference_date: NaiveDate,
) -> NeedGraph {
    let triples: Vec<Triple> = docs.iter().flat_map(|d| extract_triples(d, patterns, aliases)).collect();
    build_graph(&triples, cfg, reference_date)
}

/// Nodes with nonzero Jaccard overlap between `key_terms` and the node's
/// terms, best first, ties by need id.
pub fn query_needs<'g>(graph: &'g NeedGraph, key_terms: &[String]) -> Vec<(&'g NeedNode, f64)> {
    let query: BTreeSet<&str> = key_terms.iter().map(String::as_str).collect();
    let mut scored: Vec<(&NeedNode, f64)> = graph
        .nodes
        .iter()
        .map(|n| {
            let terms: BTreeSet<&str> = n.key_terms.iter().map(String::as_str).collect();
            (n, jaccard(&query, &terms))
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.need_id.cmp(&b.0.need_id)));
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn doc(id: &str, t: SourceType, date: &str, text: &str) -> SourceDoc {
        SourceDoc { doc_id: id.into(), source_type: t, date: d(date), text: text.into() }
    }

    fn aliases() -> EntityAliasTable {
        EntityAliasTable::new(
            [
                ("Hanul Electronics".to_string(), "HANUL ELECTRONICS".to_string()),
                ("Hanul".to_string(), "HANUL ELECTRONICS".to_string()),
            ],
            crate::corpus::DEFAULT_LEGAL_SUFFIXES.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn struggling_example() {
        let t = extract_triples(
            &doc("d1", SourceType::News, "2024-01-01", "Company X is struggling with battery degradation."),
            &PatternSet::default(),
            &EntityAliasTable::default(),
        );
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].subject, "COMPANY X");
        assert_eq!(t[0].relation, Relation::StrugglesWith);
        assert_eq!(t[0].object, "battery degradation");
    }

    #[test]
    fn no_trigger_no_triples() {
        let t = extract_triples(
            &doc("d1", SourceType::News, "2024-01-01", "Quarterly results were flat."),
            &PatternSet::default(),
            &EntityAliasTable::default(),
        );
        assert!(t.is_empty());
    }

    #[test]
    fn earnings_call_phrase_and_alias() {
        let text = "On the call, Hanul seeks partners for reducing battery degradation at high charge rates. \
                    Hanul Electronics needs urgent capacity; Other Corp lacks staff.";
        let t = extract_triples(
            &doc("e1", SourceType::EarningsCall, "2024-05-01", text),
            &PatternSet::default(),
            &aliases(),
        );
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].subject, "HANUL ELECTRONICS");
        assert!(t[0].object.contains("reducing battery degradation at high charge rates"));
        assert_eq!(t[1].relation, Relation::Needs);
        assert_eq!(t[1].urgency, vec!["urgent"]);
        assert_eq!(t[2].subject, "OTHER");
        assert_eq!(t[2].relation, Relation::ConstrainedBy);
        assert!(t[0].offset < t[1].offset && t[1].offset < t[2].offset);
    }

    #[test]
    fn authority_table() {
        assert_eq!(authority_of("RegulatoryFiling").unwrap(), 1.0);
        assert_eq!(authority_of("Blog").unwrap(), 0.4);
        assert_eq!(authority_of("EarningsCall").unwrap(), 0.9);
        assert!(matches!(authority_of("Tweet"), Err(NeedError::UnknownSourceType(_))));
    }

    #[test]
    fn pattern_file_errors() {
        assert!(PatternSet::parse("Wants | <ENT> wants <PHRASE>").is_err());
        assert!(PatternSet::parse("Needs | <ENT> needs").is_err());
        assert!(PatternSet::parse("# only a comment\n").is_err());
        let p = PatternSet::parse("Needs | <ENT> requires <PHRASE>").unwrap();
        assert_eq!(p.patterns.len(), 1);
    }

    fn triple(subject: &str, object: &str, t: SourceType, date: &str, doc: &str) -> Triple {
        Triple {
            subject: subject.into(),
            relation: Relation::Needs,
            object: object.into(),
            source_doc: doc.into(),
            source_type: t,
            observed_date: d(date),
            offset: 0,
            urgency: vec![],
        }
    }

    #[test]
    fn graph_merging() {
        let cfg = NeedGraphConfig::default();
        let one =
            build_graph(&[triple("A", "fast memory", SourceType::Blog, "2024-01-01", "d1")], &cfg, d("2025-01-01"));
        assert_eq!(one.nodes.len(), 1);
        assert_eq!(one.nodes[0].authority, 0.4);
        assert_eq!(one.nodes[0].demand_db, 0.0);

        let two = build_graph(
            &[
                triple("A", "fast memory", SourceType::Blog, "2024-01-01", "d1"),
                triple("A", "fast memory", SourceType::RegulatoryFiling, "2024-02-01", "d2"),
                triple("B", "fast memory", SourceType::News, "2024-02-01", "d3"),
            ],
            &cfg,
            d("2025-01-01"),
        );
        assert_eq!(two.nodes.len(), 2);
        assert_eq!(two.nodes[0].supporting_triples.len(), 2);
        assert_eq!(two.nodes[0].authority, 1.0);
        assert_eq!(two.nodes[0].first_seen, d("2024-01-01"));
        assert_eq!(two.nodes[0].last_seen, d("2024-02-01"));
        assert!((two.nodes[0].demand_db - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn query_ranking() {
        let cfg = NeedGraphConfig::default();
        let g = build_graph(
            &[
                triple("A", "fast memory arrays", SourceType::Blog, "2024-01-01", "d1"),
                triple("B", "battery cooling", SourceType::Blog, "2024-01-01", "d2"),
            ],
            &cfg,
            d("2025-01-01"),
        );
        let terms = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(query_needs(&g, &terms(&["quantum"])).is_empty());
        let r = query_needs(&g, &terms(&["battery", "cooling"]));
        assert_eq!(r[0].0.entity, "B");
        assert_eq!(r[0].1, 1.0);
    }

    #[test]
    fn corpus_parsing_rejects_unknown_source() {
        let ok = r#"{"doc_id":"a","source_type":"Blog","date":"2024-01-01","text":"x"}"#;
        assert_eq!(parse_needs_corpus(ok.as_bytes()).unwrap().len(), 1);
        let bad = r#"{"doc_id":"a","source_type":"Tweet","date":"2024-01-01","text":"x"}"#;
        assert!(matches!(parse_needs_corpus(bad.as_bytes()), Err(NeedError::UnknownSourceType(_))));
    }

    fn sentence() -> impl Strategy<Value = String> {
        (
            prop::sample::select(vec!["Acme", "Hanul Electronics", "Zenith Motors"]),
            prop::sample::select(vec!["needs", "seeks", "is struggling with", "lacks", "reported"]),
            prop::collection::vec(prop::sample::select(vec!["memory", "battery", "yield", "thermal", "cost"]), 1..5),
        )
            .prop_map(|(e, v, words)| format!("{e} {v} {}.", words.join(" ")))
    }

    proptest! {
        #[test]
        fn concatenation_is_union(a in prop::collection::vec(sentence(), 0..5), b in prop::collection::vec(sentence(), 0..5)) {
            let p = PatternSet::default();
            let al = aliases();
            let (ta, tb) = (a.join(" "), b.join(" "));
            let joined = format!("{ta}\n{tb}");
            let strip = |ts: Vec<Triple>| ts.into_iter().map(|t| (t.subject, t.relation, t.object)).collect::<Vec<_>>();
            let mut expected = strip(extract_triples(&doc("x", SourceType::News, "2024-01-01", &ta), &p, &al));
            expected.extend(strip(extract_triples(&doc("x", SourceType::News, "2024-01-01", &tb), &p, &al)));
            prop_assert_eq!(strip(extract_triples(&doc("x", SourceType::News, "2024-01-01", &joined), &p, &al)), expected);
        }

        #[test]
        fn every_triple_in_one_node(objs in prop::collection::vec((0usize..3, prop::collection::vec(prop::sample::select(vec!["a1", "b2", "c3", "d4"]), 1..4)), 1..20)) {
            let triples: Vec<Triple> = objs.iter().enumerate().map(|(i, (e, w))| {
                let mut t = triple(&format!("E{e}"), &w.join(" "), SourceType::News, "2024-06-01", &format!("d{i:02}"));
                t.offset = i;
                t
            }).collect();
            let g = build_graph(&triples, &NeedGraphConfig::default(), d("2025-01-01"));
            prop_assert!(g.nodes.len() <= triples.len());
            let total: usize = g.nodes.iter().map(|n| n.supporting_triples.len()).sum();
            prop_assert_eq!(total, triples.len());
        }

        #[test]
        fn demand_strictly_increases(n in 1usize..30) {
            let cfg = NeedGraphConfig::default();
            let make = |k: usize| {
                let ts: Vec<Triple> = (0..k).map(|i| triple("A", "fast memory", SourceType::News, "2024-06-01", &format!("d{i:03}"))).collect();
                build_graph(&ts, &cfg, d("2025-01-01")).nodes[0].demand_db
            };
            prop_assert!(make(n + 1) > make(n));
        }
    }
}
