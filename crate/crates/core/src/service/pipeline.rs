use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{read_json, read_jsonl, to_json, to_jsonl};
use super::{AdvanceOptions, Inputs, Phase, Result, Run, RunStore, ServiceError};
use crate::claims::{PatternSeedAnalyzer, SeedAnalyzer, SeedProfile};
use crate::corpus::{DroppedRecord, Portfolio};
use crate::gates::{self, GateId, GateItem, GateLog, ReviewSubmission};
use crate::ltr;
use crate::needgraph::{self, NeedGraph};
use crate::nexus::{self, MatchCandidate, OntologyReport, ReportContext};
use crate::params::{self, FeatureVector, Param, ParamContext};
use crate::strata::{self, Category, KeyPattern};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorLine {
    pub patent_id: String,
    #[serde(flatten)]
    pub vector: FeatureVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryView {
    #[serde(flatten)]
    pub category: Category,
    pub s_cat: f64,
    pub rank: usize,
}

/// Category dashboard: categories by descending score under `profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoriesDoc {
    pub profile: String,
    pub categories: Vec<CategoryView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDoc {
    pub profile: String,
    pub patterns: Vec<String>,
    pub selected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub value: f64,
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub patent_id: String,
    pub score: f64,
    pub category: String,
    pub title: String,
    pub features: Vec<FeatureValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingDoc {
    pub profile: String,
    pub selected_categories: Vec<String>,
    pub entries: Vec<RankingEntry>,
}

/// Final output: every patent in an approved report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedDoc {
    pub run_id: String,
    pub profile: String,
    pub patent_ids: Vec<String>,
    pub report_ids: Vec<String>,
}

pub(crate) fn gate_path(g: GateId) -> String {
    format!("gates/{g}.json")
}

fn dir(store: &RunStore, run: &Run) -> std::path::PathBuf {
    store.run_dir(&run.run_id)
}

/// Feature vectors of every record, keyed by patent id.
pub fn compute_vectors(p: &Portfolio, inputs: &Inputs) -> Result<BTreeMap<String, FeatureVector<f64>>> {
    let ctx = ParamContext {
        cfg: &inputs.params,
        market: &inputs.market,
        gni: &inputs.gni,
        eval_date: inputs.cfg.evaluation_date,
    };
    p.records.iter().map(|r| Ok((r.patent_id.clone(), params::build_feature_vector::<f64>(r, &ctx)?))).collect()
}

pub(crate) fn ingest(store: &RunStore, run: &mut Run, inputs: &Inputs) -> Result<()> {
    let (portfolio, dropped): (Portfolio, Vec<DroppedRecord>) = inputs.clean_portfolio()?;
    if portfolio.is_empty() {
        return Err(crate::corpus::CorpusError::EmptyPortfolio.into());
    }
    store.write_artifact(run, "portfolio.json", to_json(&portfolio).as_bytes())?;
    store.write_artifact(run, "dropped.json", to_json(&dropped).as_bytes())
}

fn load_portfolio(store: &RunStore, run: &Run) -> Result<Portfolio> {
    read_json(&dir(store, run).join("portfolio.json"))
}

fn load_vectors(root: &Path) -> Result<BTreeMap<String, FeatureVector<f64>>> {
    let lines: Vec<VectorLine> = read_jsonl(&root.join("vectors.jsonl"))?;
    Ok(lines.into_iter().map(|l| (l.patent_id, l.vector)).collect())
}

fn categories_doc(categories: Vec<Category>, profile: &strata::WeightingProfile) -> Result<CategoriesDoc> {
    let ranked = strata::rank_categories(&categories, profile)?;
    let mut by_key: BTreeMap<String, Category> = categories.into_iter().map(|c| (c.key.to_string(), c)).collect();
    let views = ranked
        .into_iter()
        .enumerate()
        .map(|(i, (key, s_cat))| CategoryView {
            category: by_key.remove(&key.to_string()).expect("ranked keys come from the input"),
            s_cat,
            rank: i + 1,
        })
        .collect();
    Ok(CategoriesDoc { profile: profile.name.clone(), categories: views })
}

fn categorize(store: &RunStore, run: &mut Run, inputs: &Inputs) -> Result<()> {
    let portfolio = load_portfolio(store, run)?;
    let vectors = compute_vectors(&portfolio, inputs)?;
    let lines: Vec<VectorLine> =
        vectors.iter().map(|(id, v)| VectorLine { patent_id: id.clone(), vector: v.clone() }).collect();
    let categories = strata::categorize(&portfolio, &vectors, &inputs.cfg.bands)?;
    let doc = categories_doc(categories, &inputs.profiles.resolve(&inputs.cfg.profile)?)?;
    store.write_artifact(run, "vectors.jsonl", to_jsonl(&lines).as_bytes())?;
    store.write_artifact(run, "categories.json", to_json(&doc).as_bytes())
}

pub(crate) fn write_selection(
    store: &RunStore,
    run: &mut Run,
    inputs: &Inputs,
    patterns: &[String],
    profile: Option<&str>,
) -> Result<SelectionDoc> {
    let profile = profile.unwrap_or(&inputs.cfg.profile).to_string();
    inputs.profiles.resolve(&profile)?;
    let parsed: Vec<KeyPattern> = patterns.iter().map(|p| p.parse()).collect::<std::result::Result<_, _>>()?;
    let doc: CategoriesDoc = read_json(&dir(store, run).join("categories.json"))?;
    let cats: Vec<Category> = doc.categories.into_iter().map(|v| v.category).collect();
    let selected: Vec<String> = strata::select_categories(&cats, &parsed).iter().map(|k| k.to_string()).collect();
    if selected.is_empty() {
        return Err(ServiceError::EmptySelection);
    }
    let sel = SelectionDoc { profile, patterns: patterns.to_vec(), selected };
    store.write_artifact(run, "selection.json", to_json(&sel).as_bytes())?;
    Ok(sel)
}

fn build_ranking(root: &Path, inputs: &Inputs, sel: &SelectionDoc, profile_name: &str) -> Result<RankingDoc> {
    let profile = inputs.profiles.resolve(profile_name)?;
    let doc: CategoriesDoc = read_json(&root.join("categories.json"))?;
    let portfolio: Portfolio = read_json(&root.join("portfolio.json"))?;
    let all = load_vectors(root)?;
    let mut category_of: BTreeMap<String, String> = BTreeMap::new();
    for v in &doc.categories {
        let key = v.category.key.to_string();
        if sel.selected.contains(&key) {
            for m in &v.category.members {
                category_of.insert(m.clone(), key.clone());
            }
        }
    }
    let vectors: BTreeMap<String, FeatureVector<f64>> =
        all.into_iter().filter(|(id, _)| category_of.contains_key(id)).collect();
    let ranked = ltr::predict(inputs.model()?, &vectors, &profile)?;
    let entries = ranked
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| {
            let v = &vectors[&id];
            RankingEntry {
                rank: i + 1,
                category: category_of[&id].clone(),
                title: portfolio.get(&id).map(|r| r.title.clone()).unwrap_or_default(),
                features: Param::ALL
                    .iter()
                    .map(|p| FeatureValue { name: p.name().to_string(), value: v.get(*p), missing: v.is_missing(*p) })
                    .collect(),
                patent_id: id,
                score,
            }
        })
        .collect();
    Ok(RankingDoc { profile: profile.name, selected_categories: sel.selected.clone(), entries })
}

fn rank(store: &RunStore, run: &mut Run, inputs: &Inputs) -> Result<()> {
    let root = dir(store, run);
    let sel: SelectionDoc = read_json(&root.join("selection.json"))?;
    let doc = build_ranking(&root, inputs, &sel, &sel.profile)?;
    store.write_artifact(run, "ranking.json", to_json(&doc).as_bytes())
}

fn load_book(root: &Path) -> Result<BTreeMap<GateId, GateLog>> {
    let mut book = BTreeMap::new();
    for g in GateId::ALL {
        let p = root.join(gate_path(g));
        if p.exists() {
            book.insert(g, read_json(&p)?);
        }
    }
    Ok(book)
}

/// Opens `gate` unless its current version is already open.
fn open(store: &RunStore, run: &mut Run, gate: GateId, payload_ref: &str, payload: Vec<GateItem>) -> Result<()> {
    let root = dir(store, run);
    let mut book = load_book(&root)?;
    if book.get(&gate).is_some_and(|l| l.is_open()) {
        return Ok(());
    }
    gates::open_gate(&mut book, gate, payload_ref, payload)?;
    store.write_artifact(run, &gate_path(gate), book[&gate].to_json().as_bytes())
}

/// Downstream items of a gate, approving it first under auto-approve.
/// `Ok(None)` means the gate still waits for a reviewer.
fn resolved(
    store: &RunStore,
    run: &mut Run,
    gate: GateId,
    opts: AdvanceOptions,
) -> Result<Option<Option<Vec<GateItem>>>> {
    let root = dir(store, run);
    let mut log: GateLog = read_json(&root.join(gate_path(gate)))?;
    if log.is_open() {
        if !opts.auto_approve {
            return Ok(None);
        }
        gates::submit_review(&mut log, &ReviewSubmission::approve(gate, "auto-approve"))?;
        store.write_artifact(run, &gate_path(gate), log.to_json().as_bytes())?;
    }
    Ok(Some(gates::replay(&log)))
}

fn item_data<T: serde::de::DeserializeOwned>(items: &[GateItem]) -> Result<Vec<T>> {
    items
        .iter()
        .map(|i| {
            serde_json::from_value(i.data.clone())
                .map_err(|e| ServiceError::Artifact { name: format!("gate item {}", i.id), message: e.to_string() })
        })
        .collect()
}

fn match_stage(store: &RunStore, run: &mut Run, inputs: &Inputs, approved: &[GateItem]) -> Result<()> {
    let portfolio = load_portfolio(store, run)?;
    let analyzer = PatternSeedAnalyzer::new(&portfolio, inputs.lexicon.clone());
    let mut seeds: Vec<SeedProfile> = vec![];
    for item in approved {
        let record = portfolio.get(&item.id).ok_or_else(|| nexus::NexusError::UnknownPatent(item.id.clone()))?;
        match analyzer.analyze(record) {
            Ok(s) => seeds.push(s),
            Err(e) => tracing::warn!(patent = %item.id, error = %e, "no seed profile"),
        }
    }
    let graph = needgraph::build_from_corpus(
        &inputs.docs,
        &inputs.patterns,
        &inputs.aliases,
        &inputs.cfg.needs,
        inputs.cfg.evaluation_date,
    );
    let candidates = nexus::match_portfolio(&seeds, &graph, &inputs.cfg.nexus)?;
    store.write_artifact(run, "seeds.jsonl", to_jsonl(&seeds).as_bytes())?;
    store.write_artifact(run, "needs.json", to_json(&graph).as_bytes())?;
    store.write_artifact(run, "matches.jsonl", to_jsonl(&candidates).as_bytes())
}

pub(crate) fn read_reports(root: &Path) -> Result<Vec<OntologyReport>> {
    let rdir = root.join("reports");
    let Ok(entries) = fs::read_dir(&rdir) else {
        return Ok(vec![]);
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

fn report_stage(
    store: &RunStore,
    run: &mut Run,
    inputs: &Inputs,
    approved: &[MatchCandidate],
) -> Result<Vec<OntologyReport>> {
    let root = dir(store, run);
    let portfolio = load_portfolio(store, run)?;
    let seeds: Vec<SeedProfile> = read_jsonl(&root.join("seeds.jsonl"))?;
    let graph: NeedGraph = read_json(&root.join("needs.json"))?;
    let vectors = load_vectors(&root)?;
    let ranking: RankingDoc = read_json(&root.join("ranking.json"))?;
    let ctx = ReportContext {
        records: portfolio.records.iter().map(|r| (r.patent_id.as_str(), r)).collect(),
        seeds: seeds.iter().map(|s| (s.patent_id.as_str(), s)).collect(),
        vectors: &vectors,
        ranking: ranking.entries.iter().map(|e| (e.patent_id.clone(), (e.rank, e.score))).collect(),
        market: &inputs.market,
        graph: &graph,
        cfg: &inputs.cfg.nexus,
        coefficients: inputs.params.unhoused_coefficients(),
    };
    let mut reports = vec![];
    for cluster in nexus::clusters(approved) {
        let report = nexus::generate_report(&cluster, &ctx)?;
        let base = format!("reports/{}", report.report_id);
        store.write_artifact(run, &format!("{base}.json"), to_json(&report).as_bytes())?;
        store.write_artifact(run, &format!("{base}.txt"), nexus::render_text(&report).as_bytes())?;
        reports.push(report);
    }
    Ok(reports)
}

/// Executes the work that leaves `run.phase`. Returns the next phase, or
/// `None` when the run must wait.
pub(crate) fn step(store: &RunStore, run: &mut Run, inputs: &Inputs, opts: AdvanceOptions) -> Result<Option<Phase>> {
    match run.phase {
        Phase::Ingested => {
            categorize(store, run, inputs)?;
            Ok(Some(Phase::Categorized))
        }
        Phase::Categorized => {
            if !dir(store, run).join("selection.json").exists() {
                let patterns = match (&inputs.cfg.select_categories, opts.auto_approve) {
                    (Some(p), _) => p.clone(),
                    (None, true) => vec!["*".to_string()],
                    (None, false) => return Ok(None),
                };
                write_selection(store, run, inputs, &patterns, None)?;
            }
            rank(store, run, inputs)?;
            Ok(Some(Phase::Ranked))
        }
        Phase::Ranked => {
            let ranking: RankingDoc = read_json(&dir(store, run).join("ranking.json"))?;
            let available = ranking.entries.len();
            let n = inputs.cfg.top_n.min(available);
            inputs.cfg.bounds.check(n, available)?;
            let payload = ranking
                .entries
                .into_iter()
                .take(n)
                .map(|e| GateItem {
                    id: e.patent_id.clone(),
                    grade: None,
                    data: serde_json::to_value(e).expect("entry"),
                })
                .collect();
            open(store, run, GateId::PostRanking, "ranking.json", payload)?;
            Ok(Some(Phase::GatePostRanking))
        }
        Phase::GatePostRanking => match resolved(store, run, GateId::PostRanking, opts)? {
            None => Ok(None),
            Some(None) => Ok(Some(Phase::Rejected)),
            Some(Some(items)) => {
                store.write_artifact(run, "ranking_approved.json", gates::downstream_json(&items).as_bytes())?;
                match_stage(store, run, inputs, &items)?;
                Ok(Some(Phase::Matched))
            }
        },
        Phase::Matched => {
            let candidates: Vec<MatchCandidate> = read_jsonl(&dir(store, run).join("matches.jsonl"))?;
            let payload = candidates
                .into_iter()
                .take(inputs.cfg.post_match_cap)
                .map(|c| GateItem {
                    id: format!("{}|{}", c.patent_id, c.need_id),
                    grade: None,
                    data: serde_json::to_value(c).expect("candidate"),
                })
                .collect();
            open(store, run, GateId::PostMatch, "matches.jsonl", payload)?;
            Ok(Some(Phase::GatePostMatch))
        }
        Phase::GatePostMatch => match resolved(store, run, GateId::PostMatch, opts)? {
            None => Ok(None),
            Some(None) => Ok(Some(Phase::Rejected)),
            Some(Some(items)) => {
                store.write_artifact(run, "matches_approved.json", gates::downstream_json(&items).as_bytes())?;
                let approved: Vec<MatchCandidate> = item_data(&items)?;
                report_stage(store, run, inputs, &approved)?;
                Ok(Some(Phase::Reported))
            }
        },
        Phase::Reported => {
            let reports = read_reports(&dir(store, run))?;
            let payload = reports
                .into_iter()
                .map(|r| GateItem {
                    id: r.report_id.clone(),
                    grade: None,
                    data: serde_json::to_value(r).expect("report"),
                })
                .collect();
            open(store, run, GateId::FinalOntology, "reports", payload)?;
            Ok(Some(Phase::GateFinal))
        }
        Phase::GateFinal => match resolved(store, run, GateId::FinalOntology, opts)? {
            None => Ok(None),
            Some(None) => Ok(Some(Phase::Rejected)),
            Some(Some(items)) => {
                store.write_artifact(run, "reports_approved.json", gates::downstream_json(&items).as_bytes())?;
                let reports: Vec<OntologyReport> = item_data(&items)?;
                let mut patent_ids: Vec<String> =
                    reports.iter().flat_map(|r| r.seed_asset.patent_ids.iter().cloned()).collect();
                patent_ids.sort();
                patent_ids.dedup();
                let sel: SelectionDoc = read_json(&dir(store, run).join("selection.json"))?;
                let pruned = PrunedDoc {
                    run_id: run.run_id.clone(),
                    profile: sel.profile,
                    patent_ids,
                    report_ids: reports.iter().map(|r| r.report_id.clone()).collect(),
                };
                store.write_artifact(run, "pruned.json", to_json(&pruned).as_bytes())?;
                Ok(Some(Phase::Complete))
            }
        },
        Phase::Complete | Phase::Rejected | Phase::Failed => Ok(None),
    }
}

/// Category dashboard, optionally rescored under another profile without
/// touching the run.
pub(crate) fn categories_view(store: &RunStore, run_id: &str, profile: Option<&str>) -> Result<CategoriesDoc> {
    let run = store.load_run(run_id)?;
    let root = dir(store, &run);
    let path = root.join("categories.json");
    if !path.exists() {
        return Err(ServiceError::WrongPhase { actual: run.phase, operation: "categories", expected: "Categorized" });
    }
    let doc: CategoriesDoc = read_json(&path)?;
    match profile {
        None => Ok(doc),
        Some(name) => {
            let p = store.inputs(run_id)?.profiles.resolve(name)?;
            categories_doc(doc.categories.into_iter().map(|v| v.category).collect(), &p)
        }
    }
}

/// Stored ranking, or a transient re-ranking under another profile.
pub(crate) fn ranking_view(store: &RunStore, run_id: &str, profile: Option<&str>) -> Result<RankingDoc> {
    let run = store.load_run(run_id)?;
    let root = dir(store, &run);
    let path = root.join("ranking.json");
    if !path.exists() {
        return Err(ServiceError::WrongPhase { actual: run.phase, operation: "ranking", expected: "Ranked" });
    }
    let doc: RankingDoc = read_json(&path)?;
    match profile {
        Some(name) if name != doc.profile => {
            let inputs = store.inputs(run_id)?;
            let sel: SelectionDoc = read_json(&root.join("selection.json"))?;
            build_ranking(&root, &inputs, &sel, name)
        }
        _ => Ok(doc),
    }
}
