//! Human review gates: a versioned, append-only decision log per gate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltr::{LabelRecord, MAX_GRADE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("cannot open {gate}: {prior} is not resolved with approval")]
    GateOrderViolation { gate: GateId, prior: GateId },
    #[error("{0} has no open version")]
    GateAlreadyResolved(GateId),
    #[error("{0} is already open")]
    GateAlreadyOpen(GateId),
    #[error("{0} has never been opened")]
    NotOpened(GateId),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("amendment needs at least one decision")]
    EmptyAmendment,
    #[error("grade {0} outside 0..={MAX_GRADE}")]
    InvalidGrade(u32),
    #[error("stale version: expected {expected}, current {current}")]
    VersionConflict { expected: u32, current: u32 },
    #[error("payload of {len} items outside bounds {min}..={max}")]
    PayloadBounds { len: usize, min: usize, max: usize },
    #[error("unknown gate {0}")]
    UnknownGate(String),
    #[error("duplicate item id {0} in payload")]
    DuplicateItem(String),
}

pub type Result<T, E = GateError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateId {
    PostRanking,
    PostMatch,
    FinalOntology,
}

impl GateId {
    pub const ALL: [GateId; 3] = [GateId::PostRanking, GateId::PostMatch, GateId::FinalOntology];

    pub fn prior(self) -> Option<GateId> {
        match self {
            GateId::PostRanking => None,
            GateId::PostMatch => Some(GateId::PostRanking),
            GateId::FinalOntology => Some(GateId::PostMatch),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateId::PostRanking => "PostRanking",
            GateId::PostMatch => "PostMatch",
            GateId::FinalOntology => "FinalOntology",
        }
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateId {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self> {
        GateId::ALL
            .into_iter()
            .find(|g| {
                g.as_str().eq_ignore_ascii_case(s)
                    || g.as_str().to_lowercase() == s.replace(['-', '_'], "").to_lowercase()
            })
            .ok_or_else(|| GateError::UnknownGate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateState {
    Open,
    Approved,
    Rejected,
    Amended,
}

impl GateState {
    pub fn passes(self) -> bool {
        matches!(self, GateState::Approved | GateState::Amended)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Keep,
    Drop,
    Regrade(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub item_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
}

/// One reviewable element of a gate payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateItem {
    pub id: String,
    /// Reviewer-assigned grade after a `Regrade`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<u32>,
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewGate {
    pub gate_id: GateId,
    pub version: u32,
    pub state: GateState,
    /// Run artifact the payload was taken from.
    pub payload_ref: String,
    pub payload: Vec<GateItem>,
    #[serde(default)]
    pub reviewer: String,
    #[serde(default)]
    pub decisions: Vec<Decision>,
}

/// Every version of one gate, oldest first. Only the last may be open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateLog {
    pub gate_id: GateId,
    pub versions: Vec<ReviewGate>,
}

impl GateLog {
    pub fn new(gate_id: GateId) -> Self {
        GateLog { gate_id, versions: vec![] }
    }

    pub fn current(&self) -> Option<&ReviewGate> {
        self.versions.last()
    }

    pub fn current_version(&self) -> u32 {
        self.current().map_or(0, |g| g.version)
    }

    pub fn is_open(&self) -> bool {
        self.current().is_some_and(|g| g.state == GateState::Open)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gate log serializes") + "\n"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReviewAction {
    Approve,
    Reject,
    Amend,
}

/// Review submission body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSubmission {
    pub gate_id: GateId,
    #[serde(default)]
    pub reviewer: String,
    /// Inferred when absent: `Amend` with verdicts, otherwise `Approve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ReviewAction>,
    #[serde(default)]
    pub verdicts: Vec<Decision>,
    /// Version the reviewer looked at; a mismatch is a conflict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_version: Option<u32>,
}

impl ReviewSubmission {
    pub fn approve(gate_id: GateId, reviewer: &str) -> Self {
        ReviewSubmission {
            gate_id,
            reviewer: reviewer.into(),
            action: Some(ReviewAction::Approve),
            verdicts: vec![],
            expected_version: None,
        }
    }

    pub fn effective_action(&self) -> ReviewAction {
        self.action.unwrap_or(if self.verdicts.is_empty() { ReviewAction::Approve } else { ReviewAction::Amend })
    }
}

/// Allowed size of the PostRanking payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadBounds {
    pub min: usize,
    pub max: usize,
}

impl Default for PayloadBounds {
    fn default() -> Self {
        PayloadBounds { min: 20, max: 50 }
    }
}

impl PayloadBounds {
    /// Payloads may fall below `min` only when fewer items exist at all.
    pub fn check(&self, len: usize, available: usize) -> Result<()> {
        let min = self.min.min(available);
        if len < min || len > self.max {
            return Err(GateError::PayloadBounds { len, min, max: self.max });
        }
        Ok(())
    }
}

/// Opens a new version of `gate_id` with a payload snapshot. The prior gate,
/// if any, must have passed.
pub fn open_gate<'a>(
    logs: &'a mut BTreeMap<GateId, GateLog>,
    gate_id: GateId,
    payload_ref: &str,
    payload: Vec<GateItem>,
) -> Result<&'a ReviewGate> {
    if let Some(prior) = gate_id.prior() {
        let passed = logs.get(&prior).and_then(|l| l.current()).is_some_and(|g| g.state.passes());
        if !passed {
            return Err(GateError::GateOrderViolation { gate: gate_id, prior });
        }
    }
    let mut seen = BTreeSet::new();
    for item in &payload {
        if !seen.insert(item.id.as_str()) {
            return Err(GateError::DuplicateItem(item.id.clone()));
        }
    }
    let log = logs.entry(gate_id).or_insert_with(|| GateLog::new(gate_id));
    if log.is_open() {
        return Err(GateError::GateAlreadyOpen(gate_id));
    }
    let version = log.current_version() + 1;
    log.versions.push(ReviewGate {
        gate_id,
        version,
        state: GateState::Open,
        payload_ref: payload_ref.to_string(),
        payload,
        reviewer: String::new(),
        decisions: vec![],
    });
    Ok(log.versions.last().expect("just pushed"))
}

/// Resolves the open version of a gate.
pub fn submit_review<'a>(log: &'a mut GateLog, sub: &ReviewSubmission) -> Result<&'a ReviewGate> {
    let current = log.current_version();
    if let Some(expected) = sub.expected_version {
        if expected != current {
            return Err(GateError::VersionConflict { expected, current });
        }
    }
    let gate = log.versions.last_mut().ok_or(GateError::NotOpened(log.gate_id))?;
    if gate.state != GateState::Open {
        return Err(GateError::GateAlreadyResolved(log.gate_id));
    }
    let action = sub.effective_action();
    if action == ReviewAction::Amend && sub.verdicts.is_empty() {
        return Err(GateError::EmptyAmendment);
    }
    let ids: BTreeSet<&str> = gate.payload.iter().map(|i| i.id.as_str()).collect();
    for d in &sub.verdicts {
        if !ids.contains(d.item_id.as_str()) {
            return Err(GateError::UnknownItem(d.item_id.clone()));
        }
        if let Verdict::Regrade(g) = d.verdict {
            if g > MAX_GRADE {
                return Err(GateError::InvalidGrade(g));
            }
        }
    }
    gate.state = match action {
        ReviewAction::Approve => GateState::Approved,
        ReviewAction::Reject => GateState::Rejected,
        ReviewAction::Amend => GateState::Amended,
    };
    gate.reviewer = sub.reviewer.clone();
    gate.decisions = sub.verdicts.clone();
    Ok(gate)
}

/// Payload after applying decisions in order; later decisions on the same
/// item override earlier ones.
pub fn apply_decisions(payload: &[GateItem], decisions: &[Decision]) -> Vec<GateItem> {
    let mut last: BTreeMap<&str, Verdict> = BTreeMap::new();
    for d in decisions {
        last.insert(&d.item_id, d.verdict);
    }
    payload
        .iter()
        .filter_map(|item| match last.get(item.id.as_str()) {
            Some(Verdict::Drop) => None,
            Some(Verdict::Regrade(g)) => Some(GateItem { grade: Some(*g), ..item.clone() }),
            Some(Verdict::Keep) | None => Some(item.clone()),
        })
        .collect()
}

/// What flows downstream from a resolved gate: `None` while open or after
/// rejection.
pub fn downstream(gate: &ReviewGate) -> Option<Vec<GateItem>> {
    match gate.state {
        GateState::Approved => Some(gate.payload.clone()),
        GateState::Amended => Some(apply_decisions(&gate.payload, &gate.decisions)),
        GateState::Open | GateState::Rejected => None,
    }
}

/// Rebuilds a gate's downstream input from its persisted log alone.
pub fn replay(log: &GateLog) -> Option<Vec<GateItem>> {
    log.current().and_then(downstream)
}

/// Canonical bytes of a downstream item list.
pub fn downstream_json(items: &[GateItem]) -> String {
    serde_json::to_string_pretty(items).expect("gate items serialize") + "\n"
}

/// Labels from the current PostRanking version: each `Regrade` at its grade,
/// each `Drop` at grade 0, keyed by the item's query group.
pub fn export_feedback_labels(log: &GateLog, query_of: &BTreeMap<String, String>) -> Vec<LabelRecord> {
    let Some(gate) = log.current().filter(|g| g.state.passes()) else {
        return vec![];
    };
    let mut last: BTreeMap<&str, Verdict> = BTreeMap::new();
    for d in &gate.decisions {
        last.insert(&d.item_id, d.verdict);
    }
    let mut out: Vec<LabelRecord> = last
        .into_iter()
        .filter_map(|(id, v)| {
            let grade = match v {
                Verdict::Drop => 0,
                Verdict::Regrade(g) => g,
                Verdict::Keep => return None,
            };
            Some(LabelRecord {
                query_id: query_of.get(id).cloned().unwrap_or_else(|| "default".to_string()),
                patent_id: id.to_string(),
                grade,
            })
        })
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn items(n: usize) -> Vec<GateItem> {
        (0..n).map(|i| GateItem { id: format!("P{i:03}"), grade: None, data: json!({"rank": i + 1}) }).collect()
    }

    fn book() -> BTreeMap<GateId, GateLog> {
        BTreeMap::new()
    }

    #[test]
    fn order_is_enforced() {
        let mut logs = book();
        assert!(matches!(
            open_gate(&mut logs, GateId::PostMatch, "matches.jsonl", items(3)),
            Err(GateError::GateOrderViolation { .. })
        ));
        let g = open_gate(&mut logs, GateId::PostRanking, "ranking.json", items(30)).unwrap();
        assert_eq!(g.payload.len(), 30);
        assert_eq!(g.state, GateState::Open);
        assert!(open_gate(&mut logs, GateId::PostMatch, "m", items(1)).is_err());
    }

    #[test]
    fn approve_drop_regrade() {
        let mut logs = book();
        open_gate(&mut logs, GateId::PostRanking, "ranking.json", items(30)).unwrap();
        let log = logs.get_mut(&GateId::PostRanking).unwrap();
        let sub = ReviewSubmission {
            gate_id: GateId::PostRanking,
            reviewer: "r".into(),
            action: None,
            verdicts: vec![
                Decision { item_id: "P001".into(), verdict: Verdict::Drop, note: String::new() },
                Decision { item_id: "P002".into(), verdict: Verdict::Drop, note: String::new() },
                Decision { item_id: "P003".into(), verdict: Verdict::Regrade(4), note: "strong".into() },
            ],
            expected_version: Some(1),
        };
        let g = submit_review(log, &sub).unwrap();
        assert_eq!(g.state, GateState::Amended);
        let down = replay(log).unwrap();
        assert_eq!(down.len(), 28);
        assert_eq!(down.iter().find(|i| i.id == "P003").unwrap().grade, Some(4));
        assert!(matches!(
            submit_review(log, &sub),
            Err(GateError::VersionConflict { .. }) | Err(GateError::GateAlreadyResolved(_))
        ));

        let q: BTreeMap<String, String> = [("P003".to_string(), "G11C:GT15:High".to_string())].into_iter().collect();
        let labels = export_feedback_labels(log, &q);
        assert_eq!(labels.len(), 3);
        assert!(labels.contains(&LabelRecord {
            query_id: "G11C:GT15:High".into(),
            patent_id: "P003".into(),
            grade: 4
        }));
        assert!(labels.iter().filter(|l| l.grade == 0).count() == 2);
    }

    #[test]
    fn approve_all_passes_payload() {
        let mut log = GateLog::new(GateId::PostRanking);
        let mut logs = book();
        open_gate(&mut logs, GateId::PostRanking, "r", items(5)).unwrap();
        log.clone_from(&logs[&GateId::PostRanking]);
        submit_review(&mut log, &ReviewSubmission::approve(GateId::PostRanking, "r")).unwrap();
        assert_eq!(replay(&log).unwrap(), items(5));
        assert!(export_feedback_labels(&log, &BTreeMap::new()).is_empty());
    }

    #[test]
    fn reject_and_reopen() {
        let mut logs = book();
        open_gate(&mut logs, GateId::PostRanking, "r", items(4)).unwrap();
        let log = logs.get_mut(&GateId::PostRanking).unwrap();
        let mut sub = ReviewSubmission::approve(GateId::PostRanking, "r");
        sub.action = Some(ReviewAction::Reject);
        submit_review(log, &sub).unwrap();
        assert_eq!(replay(log), None);
        let first = log.versions[0].clone();
        open_gate(&mut logs, GateId::PostRanking, "r", items(4)).unwrap();
        let log = &logs[&GateId::PostRanking];
        assert_eq!(log.versions.len(), 2);
        assert_eq!(log.versions[0], first);
        assert_eq!(log.current_version(), 2);
    }

    #[test]
    fn submission_errors() {
        let mut logs = book();
        open_gate(&mut logs, GateId::PostRanking, "r", items(4)).unwrap();
        let log = logs.get_mut(&GateId::PostRanking).unwrap();
        let mut sub = ReviewSubmission::approve(GateId::PostRanking, "r");
        sub.action = Some(ReviewAction::Amend);
        assert_eq!(submit_review(log, &sub), Err(GateError::EmptyAmendment));
        sub.verdicts = vec![Decision { item_id: "ZZ".into(), verdict: Verdict::Keep, note: String::new() }];
        assert_eq!(submit_review(log, &sub), Err(GateError::UnknownItem("ZZ".into())));
        sub.verdicts = vec![Decision { item_id: "P000".into(), verdict: Verdict::Regrade(9), note: String::new() }];
        assert_eq!(submit_review(log, &sub), Err(GateError::InvalidGrade(9)));
        assert!(open_gate(&mut logs, GateId::PostRanking, "r", items(2)).is_err());
    }

    #[test]
    fn bounds() {
        let b = PayloadBounds::default();
        assert!(b.check(30, 190).is_ok());
        assert!(b.check(10, 190).is_err());
        assert!(b.check(10, 10).is_ok());
        assert!(b.check(51, 190).is_err());
    }

    #[test]
    fn gate_names_parse() {
        assert_eq!("PostRanking".parse::<GateId>().unwrap(), GateId::PostRanking);
        assert_eq!("post-match".parse::<GateId>().unwrap(), GateId::PostMatch);
        assert_eq!("final_ontology".parse::<GateId>().unwrap(), GateId::FinalOntology);
        assert!("nope".parse::<GateId>().is_err());
        let v = serde_json::to_string(&Verdict::Regrade(3)).unwrap();
        assert_eq!(v, r#"{"Regrade":3}"#);
    }

    fn arb_decisions(n: usize) -> impl Strategy<Value = Vec<Decision>> {
        prop::collection::vec(
            (0..n, prop_oneof![Just(Verdict::Keep), Just(Verdict::Drop), (0u32..=4).prop_map(Verdict::Regrade)]),
            1..12,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(i, verdict)| Decision { item_id: format!("P{i:03}"), verdict, note: String::new() })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn persisted_log_replays_identically(rounds in prop::collection::vec((arb_decisions(8), any::<bool>()), 1..5)) {
            let mut logs = book();
            let mut written = String::new();
            for (decisions, reject) in rounds {
                open_gate(&mut logs, GateId::PostRanking, "ranking.json", items(8)).unwrap();
                let log = logs.get_mut(&GateId::PostRanking).unwrap();
                let sub = ReviewSubmission {
                    gate_id: GateId::PostRanking,
                    reviewer: "r".into(),
                    action: Some(if reject { ReviewAction::Reject } else { ReviewAction::Amend }),
                    verdicts: decisions,
                    expected_version: Some(log.current_version()),
                };
                submit_review(log, &sub).unwrap();
                written = log.current().and_then(downstream).map(|d| downstream_json(&d)).unwrap_or_default();
            }
            let persisted = logs[&GateId::PostRanking].to_json();
            let reloaded: GateLog = serde_json::from_str(&persisted).unwrap();
            prop_assert_eq!(&reloaded, &logs[&GateId::PostRanking]);
            let replayed = replay(&reloaded).map(|d| downstream_json(&d)).unwrap_or_default();
            prop_assert_eq!(replayed, written);
            for (i, v) in reloaded.versions.iter().enumerate() {
                prop_assert_eq!(v.version as usize, i + 1);
                prop_assert!(v.state != GateState::Open);
            }
        }
    }
}
