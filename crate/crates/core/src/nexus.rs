//! Need-Seed matching, fit scoring and opportunity reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::SeedProfile;
use crate::corpus::PatentRecord;
use crate::needgraph::{query_needs, NeedGraph, NeedNode, SourceType};
use crate::params::{FeatureVector, MarketData, Param};
use crate::strata::cpc_prefix;
use crate::text::{cosine, IdfTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NexusError {
    #[error("no text to compare for {0}")]
    EmptyText(String),
    #[error("need graph is empty")]
    EmptyGraph,
    #[error("alpha + beta = {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("{name} = {value} outside [0, 1]")]
    InputOutOfRange { name: &'static str, value: f64 },
    #[error("no record for {0}")]
    UnknownPatent(String),
}

pub type Result<T, E = NexusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NexusConfig {
    pub alpha: f64,
    pub beta: f64,
    pub threshold: f64,
    /// Needs considered per seed, taken from the term-overlap lookup.
    pub candidates_per_seed: usize,
    pub risk: RiskThresholds,
}

impl Default for NexusConfig {
    fn default() -> Self {
        NexusConfig { alpha: 0.7, beta: 0.3, threshold: 0.5, candidates_per_seed: 10, risk: RiskThresholds::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskThresholds {
    pub min_breadth: f64,
    pub max_design_around: f64,
    pub min_remaining_life: f64,
    pub max_competitors: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds { min_breadth: 0.4, max_design_around: 0.6, min_remaining_life: 5.0, max_competitors: 10.0 }
    }
}

/// IDF statistics over seed problem statements and need descriptions.
pub fn matching_idf(seeds: &[SeedProfile], graph: &NeedGraph) -> IdfTable {
    IdfTable::from_documents(
        seeds.iter().map(|s| s.match_text()).chain(graph.nodes.iter().map(|n| n.description.as_str())),
    )
}

/// TF-IDF cosine between a seed's problem statement and a need description.
pub fn relevance(seed: &SeedProfile, need: &NeedNode, idf: &IdfTable) -> Result<f64> {
    let a = idf.vectorize(seed.match_text());
    if a.is_empty() {
        return Err(NexusError::EmptyText(seed.patent_id.clone()));
    }
    let b = idf.vectorize(&need.description);
    if b.is_empty() {
        return Err(NexusError::EmptyText(need.need_id.clone()));
    }
    Ok(cosine(&a, &b))
}

/// `demand * (alpha * relevance + beta * authority)`.
pub fn need_seed_score(s_demand_norm: f64, s_relevance: f64, s_authority: f64, alpha: f64, beta: f64) -> Result<f64> {
    if (alpha + beta - 1.0).abs() > 1e-9 || alpha < 0.0 || beta < 0.0 {
        return Err(NexusError::WeightsNotNormalized(alpha + beta));
    }
    for (name, value) in [("s_demand_norm", s_demand_norm), ("s_relevance", s_relevance), ("s_authority", s_authority)]
    {
        if !(0.0..=1.0).contains(&value) {
            return Err(NexusError::InputOutOfRange { name, value });
        }
    }
    Ok((s_demand_norm * (alpha * s_relevance + beta * s_authority)).clamp(0.0, 1.0))
}

pub fn fit_score(s_needseed: f64) -> u32 {
    (100.0 * s_needseed).round() as u32
}

/// demand_db min-max scaled over the graph; a zero range maps to 1.
pub fn demand_norms(graph: &NeedGraph) -> BTreeMap<String, f64> {
    let (lo, hi) = graph
        .nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| (lo.min(n.demand_db), hi.max(n.demand_db)));
    graph
        .nodes
        .iter()
        .map(|n| {
            let v = if hi > lo { (n.demand_db - lo) / (hi - lo) } else { 1.0 };
            (n.need_id.clone(), v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub patent_id: String,
    pub need_id: String,
    pub s_relevance: f64,
    pub s_authority: f64,
    pub s_demand_norm: f64,
    pub s_needseed: f64,
    pub fit_score: u32,
}

fn candidate_order(a: &MatchCandidate, b: &MatchCandidate) -> std::cmp::Ordering {
    b.fit_score.cmp(&a.fit_score).then_with(|| a.patent_id.cmp(&b.patent_id)).then_with(|| a.need_id.cmp(&b.need_id))
}

/// Scores each seed against its top term-overlap needs and keeps pairs at
/// or above the threshold, ordered by fit, patent id, need id.
pub fn match_portfolio(seeds: &[SeedProfile], graph: &NeedGraph, cfg: &NexusConfig) -> Result<Vec<MatchCandidate>> {
    if graph.nodes.is_empty() {
        return Err(NexusError::EmptyGraph);
    }
    let idf = matching_idf(seeds, graph);
    let demand = demand_norms(graph);
    let mut out = vec![];
    for seed in seeds {
        for (need, _) in query_needs(graph, &seed.key_terms).into_iter().take(cfg.candidates_per_seed) {
            let s_relevance = match relevance(seed, need, &idf) {
                Ok(r) => r,
                Err(NexusError::EmptyText(_)) => continue,
                Err(e) => return Err(e),
            };
            let s_demand_norm = demand[&need.need_id];
            let s = need_seed_score(s_demand_norm, s_relevance, need.authority, cfg.alpha, cfg.beta)?;
            if s >= cfg.threshold {
                out.push(MatchCandidate {
                    patent_id: seed.patent_id.clone(),
                    need_id: need.need_id.clone(),
                    s_relevance,
                    s_authority: need.authority,
                    s_demand_norm,
                    s_needseed: s,
                    fit_score: fit_score(s),
                });
            }
        }
    }
    out.sort_by(candidate_order);
    Ok(out)
}

/// Patents whose best match points at the same need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCluster {
    pub need_id: String,
    pub patent_ids: Vec<String>,
    /// Highest-fit candidate of the cluster.
    pub lead: MatchCandidate,
}

/// Groups candidates by each patent's top need. Clusters come back by lead
/// fit descending, then need id.
pub fn clusters(candidates: &[MatchCandidate]) -> Vec<MatchCluster> {
    let mut best: BTreeMap<&str, &MatchCandidate> = BTreeMap::new();
    for c in candidates {
        match best.get(c.patent_id.as_str()) {
            Some(b) if candidate_order(b, c) != std::cmp::Ordering::Greater => {}
            _ => {
                best.insert(&c.patent_id, c);
            }
        }
    }
    let mut by_need: BTreeMap<&str, Vec<&MatchCandidate>> = BTreeMap::new();
    for c in best.values() {
        by_need.entry(&c.need_id).or_default().push(c);
    }
    let mut out: Vec<MatchCluster> = by_need
        .into_iter()
        .map(|(need, mut members)| {
            members.sort_by(|a, b| candidate_order(a, b));
            let mut patent_ids: Vec<String> = members.iter().map(|c| c.patent_id.clone()).collect();
            patent_ids.sort();
            MatchCluster { need_id: need.to_string(), patent_ids, lead: members[0].clone() }
        })
        .collect();
    out.sort_by(|a, b| candidate_order(&a.lead, &b.lead).then_with(|| a.need_id.cmp(&b.need_id)));
    out
}

pub const INSUFFICIENT_DATA: &str = "insufficient data";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reported<T> {
    Value(T),
    Missing(String),
}

impl<T> Reported<T> {
    pub fn insufficient() -> Self {
        Reported::Missing(INSUFFICIENT_DATA.to_string())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Reported::Missing(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAsset {
    pub patent_ids: Vec<String>,
    pub titles: Vec<String>,
    pub summary: String,
    pub problem_statement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceQuote {
    pub doc_id: String,
    pub offset: usize,
    pub source_type: SourceType,
    pub date: chrono::NaiveDate,
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMatch {
    pub entity: String,
    pub need_id: String,
    pub need_description: String,
    pub source: SourceQuote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoring {
    pub ltr_rank: Reported<usize>,
    pub s_pat: Reported<f64>,
    pub fit_score: u32,
    pub s_needseed: f64,
    pub s_relevance: f64,
    pub s_authority: f64,
    pub s_demand_norm: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Valuation coefficients with no empirical basis, echoed so readers
    /// can judge their influence.
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpportunitySize {
    pub usd: f64,
    pub cpc_prefix: String,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFlag {
    pub patent_id: String,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategicAction {
    pub code: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyReport {
    pub report_id: String,
    pub seed_asset: SeedAsset,
    pub target_match: TargetMatch,
    pub scoring: Scoring,
    pub opportunity_size: Reported<OpportunitySize>,
    pub risk_profile: Vec<RiskFlag>,
    pub strategic_actions: Vec<StrategicAction>,
}

impl OntologyReport {
    /// Names of fields that are neither populated nor marked as lacking data.
    pub fn unset_fields(&self) -> Vec<&'static str> {
        let mut out = vec![];
        let s = &self.seed_asset;
        if s.patent_ids.is_empty() || s.titles.len() != s.patent_ids.len() || s.summary.is_empty() {
            out.push("seed_asset");
        }
        let t = &self.target_match;
        if t.entity.is_empty() || t.need_description.is_empty() || t.source.quote.is_empty() {
            out.push("target_match");
        }
        if self.risk_profile.is_empty() {
            out.push("risk_profile");
        }
        if self.strategic_actions.is_empty() {
            out.push("strategic_actions");
        }
        out
    }
}

/// Everything report generation reads besides the match itself.
pub struct ReportContext<'a> {
    pub records: BTreeMap<&'a str, &'a PatentRecord>,
    pub seeds: BTreeMap<&'a str, &'a SeedProfile>,
    pub vectors: &'a BTreeMap<String, FeatureVector<f64>>,
    /// Patent id to (1-based rank, S_pat) in the approved ranking.
    pub ranking: BTreeMap<String, (usize, f64)>,
    pub market: &'a MarketData,
    pub graph: &'a NeedGraph,
    pub cfg: &'a NexusConfig,
    pub coefficients: BTreeMap<String, f64>,
}

fn dominant_prefix(ids: &[String], ctx: &ReportContext<'_>) -> Option<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for id in ids {
        if let Some(r) = ctx.records.get(id.as_str()) {
            *counts.entry(cpc_prefix(r.primary_cpc(), 4)).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(String, usize)>, (k, n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((k, n)),
        })
        .map(|(k, _)| k)
}

fn risks(ids: &[String], ctx: &ReportContext<'_>) -> Vec<RiskFlag> {
    let th = &ctx.cfg.risk;
    let mut out = vec![];
    let mut flag = |id: &str, code: &str, detail: String| {
        out.push(RiskFlag { patent_id: id.to_string(), code: code.to_string(), detail })
    };
    for id in ids {
        if let Some(seed) = ctx.seeds.get(id.as_str()) {
            if seed.breadth_score < th.min_breadth {
                flag(
                    id,
                    "narrow_claims",
                    format!("breadth_score {:.3} below {:.2}", seed.breadth_score, th.min_breadth),
                );
            }
            if seed.design_around_score > th.max_design_around {
                flag(
                    id,
                    "design_around",
                    format!("design_around_score {:.3} above {:.2}", seed.design_around_score, th.max_design_around),
                );
            }
        }
        if let Some(v) = ctx.vectors.get(id) {
            let l_rem = v.get(Param::LRem);
            if !v.is_missing(Param::LRem) && l_rem < th.min_remaining_life {
                flag(id, "short_life", format!("L_rem {l_rem:.2} years below {:.1}", th.min_remaining_life));
            }
            let n_comp = v.get(Param::NComp);
            if !v.is_missing(Param::NComp) && n_comp > th.max_competitors {
                flag(id, "crowded_market", format!("N_comp {n_comp} above {}", th.max_competitors));
            }
            let missing: Vec<&str> = v.missing_names().into_iter().filter(|n| *n != Param::SNeedSeed.name()).collect();
            if !missing.is_empty() {
                flag(id, "missing_data", format!("imputed as 0: {}", missing.join(", ")));
            }
        }
    }
    if out.is_empty() {
        out.push(RiskFlag {
            patent_id: ids.join(","),
            code: "none".into(),
            detail: "no risk threshold crossed".into(),
        });
    }
    out
}

fn actions(cluster: &MatchCluster, need: &NeedNode) -> Vec<StrategicAction> {
    let lead = &cluster.lead;
    let mut out = vec![];
    if lead.fit_score >= 90 && lead.s_authority >= 0.9 {
        out.push(StrategicAction {
            code: "licensing".into(),
            text: format!(
                "Initiate targeted licensing discussion with {} on \"{}\" (fit {}/100).",
                need.entity, need.description, lead.fit_score
            ),
        });
    }
    if cluster.patent_ids.len() > 1 {
        out.push(StrategicAction {
            code: "package".into(),
            text: format!(
                "Package the {} related assets ({}) as a single offering.",
                cluster.patent_ids.len(),
                cluster.patent_ids.join(", ")
            ),
        });
    }
    if out.is_empty() {
        out.push(StrategicAction {
            code: "outreach".into(),
            text: format!(
                "Contact {} to confirm interest in \"{}\" before committing deal resources.",
                need.entity, need.description
            ),
        });
    }
    out
}

pub fn generate_report(cluster: &MatchCluster, ctx: &ReportContext<'_>) -> Result<OntologyReport> {
    let lead = &cluster.lead;
    let need = ctx.graph.get(&lead.need_id).ok_or(NexusError::EmptyGraph)?;
    let mut titles = vec![];
    for id in &cluster.patent_ids {
        let r = ctx.records.get(id.as_str()).ok_or_else(|| NexusError::UnknownPatent(id.clone()))?;
        titles.push(r.title.clone());
    }
    let lead_seed =
        ctx.seeds.get(lead.patent_id.as_str()).ok_or_else(|| NexusError::UnknownPatent(lead.patent_id.clone()))?;
    let quote = need.strongest_source(&crate::needgraph::NeedGraphConfig::default());
    let best_rank = cluster.patent_ids.iter().filter_map(|id| ctx.ranking.get(id)).min_by_key(|(r, _)| *r);
    let opportunity_size = match dominant_prefix(&cluster.patent_ids, ctx) {
        Some(prefix) => match ctx.market.lookup(&prefix).and_then(|(k, m)| m.tam_usd.map(|v| (k, v))) {
            Some((key, usd)) => Reported::Value(OpportunitySize {
                usd,
                cpc_prefix: key.to_string(),
                basis: format!("total addressable market for CPC {key}"),
            }),
            None => Reported::insufficient(),
        },
        None => Reported::insufficient(),
    };
    Ok(OntologyReport {
        report_id: format!("R-{}", cluster.need_id),
        seed_asset: SeedAsset {
            patent_ids: cluster.patent_ids.clone(),
            titles,
            summary: lead_seed.solution_summary.clone(),
            problem_statement: lead_seed.problem_statement.clone(),
        },
        target_match: TargetMatch {
            entity: need.entity.clone(),
            need_id: need.need_id.clone(),
            need_description: need.description.clone(),
            source: SourceQuote {
                doc_id: quote.source_doc.clone(),
                offset: quote.offset,
                source_type: quote.source_type,
                date: quote.observed_date,
                quote: quote.object.clone(),
            },
        },
        scoring: Scoring {
            ltr_rank: best_rank.map_or_else(Reported::insufficient, |(r, _)| Reported::Value(*r)),
            s_pat: best_rank.map_or_else(Reported::insufficient, |(_, s)| Reported::Value(*s)),
            fit_score: lead.fit_score,
            s_needseed: lead.s_needseed,
            s_relevance: lead.s_relevance,
            s_authority: lead.s_authority,
            s_demand_norm: lead.s_demand_norm,
            alpha: ctx.cfg.alpha,
            beta: ctx.cfg.beta,
            coefficients: ctx.coefficients.clone(),
        },
        opportunity_size,
        risk_profile: risks(&cluster.patent_ids, ctx),
        strategic_actions: actions(cluster, need),
    })
}

fn usd(v: f64) -> String {
    if v >= 1e9 {
        format!("${:.1}B", v / 1e9)
    } else if v >= 1e6 {
        format!("${:.1}M", v / 1e6)
    } else {
        format!("${v:.0}")
    }
}

/// Two-column plain-text layout of a report.
pub fn render_text(r: &OntologyReport) -> String {
    let mut rows: Vec<(String, String)> = vec![
        (
            "Seed Asset".into(),
            format!("{} patent(s): {}", r.seed_asset.patent_ids.len(), r.seed_asset.patent_ids.join(", ")),
        ),
        (String::new(), r.seed_asset.summary.clone()),
        ("Target Match".into(), format!("{} ({})", r.target_match.entity, r.target_match.need_id)),
        (String::new(), format!("Need: {}", r.target_match.need_description)),
        (
            String::new(),
            format!(
                "Source: {:?} {} on {}, \"{}\"",
                r.target_match.source.source_type,
                r.target_match.source.doc_id,
                r.target_match.source.date,
                r.target_match.source.quote
            ),
        ),
        ("Fit Score".into(), format!("{}/100", r.scoring.fit_score)),
    ];
    let rank = match &r.scoring.ltr_rank {
        Reported::Value(v) => format!("#{v}"),
        Reported::Missing(m) => m.clone(),
    };
    rows.push(("LTR Rank".into(), rank));
    let mut coeffs = vec![format!("alpha={} beta={}", r.scoring.alpha, r.scoring.beta)];
    coeffs.extend(r.scoring.coefficients.iter().map(|(k, v)| format!("{k}={v}")));
    rows.push(("Assumptions".into(), coeffs.join(" ")));
    rows.push((
        "Opportunity Size".into(),
        match &r.opportunity_size {
            Reported::Value(o) => format!("{} ({})", usd(o.usd), o.basis),
            Reported::Missing(m) => m.clone(),
        },
    ));
    for (i, risk) in r.risk_profile.iter().enumerate() {
        let label = if i == 0 { "Risk Profile" } else { "" };
        rows.push((label.into(), format!("{} [{}]: {}", risk.patent_id, risk.code, risk.detail)));
    }
    for (i, a) in r.strategic_actions.iter().enumerate() {
        let label = if i == 0 { "Strategic Actions" } else { "" };
        rows.push((label.into(), format!("{}. {}", i + 1, a.text)));
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = format!("Core Ontology Framework: {}\n\n", r.report_id);
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$} | {v}");
    }
    out
}
