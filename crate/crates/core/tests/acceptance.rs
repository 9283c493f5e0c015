//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p pprune-core --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use num_rational::Ratio;
use pprune_core::corpus::{ClaimText, Jurisdiction, LitigationEvent, PatentRecord};
use pprune_core::gates::{
    self, Decision, GateId, GateItem, GateLog, GateState, ReviewAction, ReviewSubmission, Verdict,
};
use pprune_core::ltr::{self, synthetic, LabelRecord, TrainParams};
use pprune_core::needgraph::{NeedGraphConfig, SourceType};
use pprune_core::params::{self, GniTable, Param, ParamConfig, N_PARAMS};
use pprune_core::service::{self, AdvanceOptions, Phase, RankingDoc, RunStore};
use pprune_core::strata::{apply_profile, ProfileKind, WeightingProfile};
use pprune_core::FeatureVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i128>;
type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

const REL: f64 = 1e-9;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn qf(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn close(actual: f64, expected: f64, rel: f64) -> bool {
    if expected == 0.0 {
        actual.abs() <= 1e-12
    } else {
        ((actual - expected) / expected).abs() <= rel
    }
}

/// Days since 1970-01-01 by the proleptic Gregorian day count, without chrono.
fn civil_days(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn random_date(rng: &mut ChaCha8Rng, y0: i32, y1: i32) -> (NaiveDate, i64) {
    let y = rng.gen_range(y0..=y1);
    let m = rng.gen_range(1..=12u32);
    let d = rng.gen_range(1..=28u32);
    (NaiveDate::from_ymd_opt(y, m, d).unwrap(), civil_days(y as i64, m as i64, d as i64))
}

fn base_record() -> PatentRecord {
    serde_json::from_value(serde_json::json!({
        "patent_id": "X", "title": "t", "claims": [{"number": 1, "text": "A device comprising: a part."}],
        "filing_date": "2010-01-01", "grant_date": "2012-01-01", "expiry_date": "2030-01-01",
        "legal_status": "Granted", "assignee_raw": "A", "cpc_codes": ["G11C16/04"]
    }))
    .unwrap()
}

struct Checker {
    name: &'static str,
    cases: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Checker {
    fn new(name: &'static str) -> Self {
        Checker { name, cases: 0, worst: 0.0, failures: vec![] }
    }

    fn check(&mut self, actual: f64, expected: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let err = if expected == 0.0 { actual.abs() } else { ((actual - expected) / expected).abs() };
        self.worst = self.worst.max(err);
        if !close(actual, expected, REL) {
            self.failures.push(format!("{}: {} got {actual} want {expected}", self.name, what()));
        }
    }
}

fn formula_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0F0);
    let cfg = ParamConfig::default();
    let mut checks: Vec<Checker> = vec![];
    const N: usize = 40;

    let mut c = Checker::new("remaining_life");
    for _ in 0..N {
        let (eval, de) = random_date(&mut rng, 2000, 2030);
        let (expiry, dx) = random_date(&mut rng, 2031, 2060);
        let mut r = base_record();
        r.expiry_date = Some(expiry);
        let got: f64 = params::remaining_life(&r, eval).unwrap();
        c.check(got, qf(q((dx - de) as i128 * 4, 1461)), || format!("{eval}->{expiry}"));
    }
    checks.push(c);

    let mut c = Checker::new("pendency_months");
    for _ in 0..N {
        let (filing, df) = random_date(&mut rng, 2000, 2010);
        let (grant, dg) = random_date(&mut rng, 2011, 2020);
        let mut r = base_record();
        r.filing_date = filing;
        r.grant_date = Some(grant);
        let got: f64 = params::pendency_months(&r).unwrap();
        c.check(got, qf(q((dg - df) as i128 * 16, 487)), || format!("{filing}->{grant}"));
    }
    checks.push(c);

    let mut c = Checker::new("citation_velocity");
    for _ in 0..N {
        let (grant, dg) = random_date(&mut rng, 2015, 2025);
        let (eval, de) = random_date(&mut rng, 2025, 2027);
        if de <= dg {
            continue;
        }
        let mut r = base_record();
        r.filing_date = grant - chrono::Duration::days(400);
        r.grant_date = Some(grant);
        let mut in_window = 0i128;
        for k in 0..rng.gen_range(0..15) {
            let (cd, dc) = random_date(&mut rng, 2014, 2027);
            let age = de - dc;
            // 3 years of 365.25 days is 1095.75 days
            if age >= 0 && 4 * age < 4383 {
                in_window += 1;
            }
            r.forward_citations
                .push(serde_json::from_value(serde_json::json!({"citing_id": format!("C{k}"), "date": cd})).unwrap());
        }
        let years = q((de - dg) as i128 * 4, 1461);
        let expected = if in_window == 0 { q(0, 1) } else { q(in_window, 1) / years.max(q(1, 4)) };
        let got: f64 = params::citation_velocity(&r, eval, &cfg);
        c.check(got, qf(expected), || format!("grant {grant} eval {eval}"));
    }
    // the 0.25-year floor on very young patents
    for _ in 0..N / 2 {
        let n = rng.gen_range(1..20usize);
        let years = q(rng.gen_range(0..1000), 4000);
        let got: f64 = params::velocity(n, qf(years), 0.25);
        c.check(got, qf(q(n as i128, 1) / years.max(q(1, 4))), || format!("n {n}"));
    }
    checks.push(c);

    let mut c = Checker::new("claim_type_score");
    let kinds = [("A device", q(1, 1)), ("A method", q(7, 10)), ("A composition", q(1, 2))];
    for _ in 0..N {
        let mut claims = vec![];
        let mut best = q(0, 1);
        for i in 0..rng.gen_range(1..5) {
            let (pre, score) = kinds[rng.gen_range(0..3)];
            best = best.max(score);
            claims
                .push(ClaimText { number: 2 * i + 1, text: format!("{pre} comprising: a first part; a second part.") });
            claims.push(ClaimText {
                number: 2 * i + 2,
                text: format!("The part of claim {}, wherein it is red.", 2 * i + 1),
            });
        }
        let got: f64 = params::claim_type_score(&claims, &cfg).unwrap();
        c.check(got, qf(best), || format!("{} claims", claims.len()));
    }
    checks.push(c);

    let mut c = Checker::new("litigation_score");
    let outcomes = [("PlaintiffWin", q(1, 1)), ("Settlement", q(1, 2)), ("DefendantWin", q(0, 1))];
    for _ in 0..N {
        let mut events = vec![];
        let mut expected = q(0, 1);
        for _ in 0..rng.gen_range(0..6) {
            let (o, w) = outcomes[rng.gen_range(0..3)];
            let v: i128 = rng.gen_range(0..50_000_000);
            expected += w * q(v, 1);
            events.push(
                serde_json::from_value::<LitigationEvent>(serde_json::json!({"outcome": o, "case_value": v as f64}))
                    .unwrap(),
            );
        }
        let got: f64 = params::litigation_score(&events, &cfg).unwrap();
        c.check(got, qf(expected), || format!("{} events", events.len()));
    }
    checks.push(c);

    let mut c = Checker::new("cagr");
    for _ in 0..N {
        let s = rng.gen_range(1.0..1e6f64);
        let e = rng.gen_range(0.5..3.0f64) * s;
        let n = rng.gen_range(1..15) as f64;
        let expected = ((e / s).log2() * std::f64::consts::LN_2 / n).exp() - 1.0;
        let got: f64 = params::cagr(s, e, n).unwrap();
        c.check(got, expected, || format!("{s} {e} {n}"));
    }
    checks.push(c);

    let mut c = Checker::new("inventor_score");
    for _ in 0..N {
        let h: i128 = rng.gen_range(0..80);
        let collab: i128 = rng.gen_range(1..200);
        let lit: i128 = rng.gen_range(0..=100);
        let linear = q(1, 2) * q(h, 1) + q(1, 5) * q(lit, 100);
        let expected = qf(linear) + 0.3 * (collab as f64).log2() * std::f64::consts::LN_2;
        let got: f64 = params::inventor_score(h as f64, collab as f64, lit as f64 / 100.0, &cfg).unwrap();
        c.check(got, expected, || format!("h {h} collab {collab} lit {lit}"));
    }
    checks.push(c);

    let mut c = Checker::new("rejection_score");
    for _ in 0..N {
        let (a, b, d) = (rng.gen_range(0..20u32), rng.gen_range(0..20u32), rng.gen_range(0..20u32));
        let expected = q(a as i128, 1) + q(3, 5) * q(b as i128, 1) + q(1, 5) * q(d as i128, 1);
        let got: f64 = params::rejection_score(a, b, d, &cfg);
        c.check(got, qf(expected), || format!("{a} {b} {d}"));
    }
    checks.push(c);

    let mut c = Checker::new("jurisdiction_score");
    for _ in 0..N {
        let countries = ["USA", "JPN", "KOR", "DEU", "CHN", "TWN"];
        let gni: BTreeMap<String, i128> =
            countries.iter().map(|k| (k.to_string(), rng.gen_range(1_000..90_000))).collect();
        let table = GniTable::new(gni.iter().map(|(k, v)| (k.clone(), *v as f64)).collect()).unwrap();
        let mut js = vec![];
        let mut expected = q(0, 1);
        for _ in 0..rng.gen_range(0..8) {
            let k = countries[rng.gen_range(0..countries.len())];
            let granted = rng.gen_bool(0.5);
            let factor = if granted { q(1, 1) } else { q(7, 10) };
            expected += q(gni[k], gni["USA"]) * factor;
            js.push(
                serde_json::from_value::<Jurisdiction>(
                    serde_json::json!({"country": k, "status": if granted { "granted" } else { "pending" }}),
                )
                .unwrap(),
            );
        }
        let got: f64 = params::jurisdiction_score(&js, &table, &cfg).unwrap();
        c.check(got, qf(expected), || format!("{} jurisdictions", js.len()));
    }
    checks.push(c);

    let mut c = Checker::new("supply_chain_score");
    for _ in 0..N {
        let (a, b, d): (i128, i128, i128) = (rng.gen_range(0..=1000), rng.gen_range(0..=1000), rng.gen_range(0..=1000));
        let expected = q(2, 5) * q(a, 1000) + q(2, 5) * q(b, 1000) + q(1, 5) * q(d, 1000);
        let got: f64 =
            params::supply_chain_score(a as f64 / 1000.0, b as f64 / 1000.0, d as f64 / 1000.0, &cfg).unwrap();
        c.check(got, qf(expected), || format!("{a} {b} {d}"));
    }
    checks.push(c);

    let mut c = Checker::new("demand_snr");
    for _ in 0..N {
        let s = rng.gen_range(1e-3..1e4f64);
        let n = rng.gen_range(1e-3..1e4f64);
        let expected = (10.0 * (s / n).ln() / std::f64::consts::LN_10).max(-60.0);
        let got: f64 = params::demand_snr(s, n, -60.0).unwrap();
        c.check(got, expected, || format!("{s} {n}"));
    }
    c.check(params::demand_snr(0.0, 1.0, -60.0).unwrap(), -60.0, || "zero signal".into());
    c.check(params::demand_snr(1e-9, 1e3, -60.0).unwrap(), -60.0, || "below floor".into());
    checks.push(c);

    let mut c = Checker::new("partnership_score");
    let kinds = [("JointVenture", q(1, 1)), ("Licensing", q(7, 10)), ("MoU", q(3, 10))];
    for _ in 0..N {
        let mut counts = BTreeMap::new();
        let mut expected = q(0, 1);
        for (k, w) in kinds {
            if rng.gen_bool(0.7) {
                let n: u32 = rng.gen_range(0..30);
                counts.insert(k.to_string(), n);
                expected += w * q(n as i128, 1);
            }
        }
        let got: f64 = params::partnership_score(&counts, &cfg).unwrap();
        c.check(got, qf(expected), || format!("{counts:?}"));
    }
    checks.push(c);

    let mut c = Checker::new("ma_score");
    for _ in 0..N {
        let v = rng.gen_range(0.0..1e11f64);
        let n: u32 = rng.gen_range(0..50);
        let expected = (v + 1.0).log2() * std::f64::consts::LN_2 + qf(q(n as i128, 10));
        let got: f64 = params::ma_score(v, n, &cfg).unwrap();
        c.check(got, expected, || format!("{v} {n}"));
    }
    checks.push(c);

    let mut c = Checker::new("pinned_constants");
    let nc = NeedGraphConfig::default();
    for (got, want) in [
        (cfg.rejection_weights.w102, 1.0),
        (cfg.rejection_weights.w103, 0.6),
        (cfg.rejection_weights.w112, 0.2),
        (cfg.claim_type_scores.product, 1.0),
        (cfg.claim_type_scores.process, 0.7),
        (cfg.jurisdiction_status.pending, 0.7),
        (nc.authority(SourceType::RegulatoryFiling), 1.0),
        (nc.authority(SourceType::Blog), 0.4),
    ] {
        c.check(got, want, || "constant".into());
    }
    checks.push(c);

    let failures: Vec<String> = checks.iter().flat_map(|c| c.failures.clone()).collect();
    let formulas = checks.iter().filter(|c| c.name != "pinned_constants");
    let min_cases = formulas.clone().map(|c| c.cases).min().unwrap_or(0);
    let worst = checks.iter().map(|c| c.worst).fold(0.0, f64::max);
    if min_cases < 20 {
        return Err(format!("only {min_cases} cases for some formula"));
    }
    if !failures.is_empty() {
        return Err(failures.into_iter().take(5).collect::<Vec<_>>().join("; "));
    }
    Ok(format!("{} formulas, >= {min_cases} cases each, worst rel err {worst:.1e}", checks.len() - 1))
}

fn oracle_dcg(list: &[i32], k: usize) -> f64 {
    list.iter().take(k).enumerate().map(|(i, &g)| (2f64.powi(g) - 1.0) / ((i + 2) as f64).log2()).sum()
}

fn permutations(items: &[i32]) -> Vec<Vec<i32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = vec![];
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn ndcg_exhaustive() -> Outcome {
    let mut lists = 0usize;
    let mut ideal_cache: BTreeMap<(Vec<i32>, usize), f64> = BTreeMap::new();
    for n in 1..=6usize {
        for code in 0..4usize.pow(n as u32) {
            let list: Vec<i32> = (0..n).map(|i| ((code / 4usize.pow(i as u32)) % 4) as i32).collect();
            for k in [1, 3, n, 10] {
                let mut key = list.clone();
                key.sort();
                let ideal = *ideal_cache
                    .entry((key, k))
                    .or_insert_with(|| permutations(&list).iter().map(|p| oracle_dcg(p, k)).fold(0.0, f64::max));
                let expected = if ideal == 0.0 { 1.0 } else { oracle_dcg(&list, k) / ideal };
                let got: f64 = ltr::ndcg(&list, k).map_err(|e| e.to_string())?;
                if (got - expected).abs() > 1e-12 {
                    return Err(format!("{list:?}@{k}: got {got} want {expected}"));
                }
                lists += 1;
            }
        }
    }
    Ok(format!("{lists} (list, k) cases against brute-force ideal orderings"))
}

fn lambda_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1A4B);
    for g in 0..500 {
        let n = rng.gen_range(2..40);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let l = ltr::lambda_gradients(&scores, &labels, 10, 1.0);
        let sum: f64 = l.gradients.iter().sum();
        if sum != 0.0 {
            return Err(format!("group {g}: gradient sum {sum:e}"));
        }
    }
    let mut worst = 0.0f64;
    for case in 0..100 {
        let sigma = rng.gen_range(0.5..2.0);
        let (si, sj) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let li = rng.gen_range(1..5u32);
        let lj = rng.gen_range(0..li);
        let ideal = (2f64.powi(li as i32) - 1.0) + (2f64.powi(lj as i32) - 1.0) / 3f64.log2();
        let delta = (2f64.powi(li as i32) - 2f64.powi(lj as i32)) * (1.0 - 1.0 / 3f64.log2()) / ideal;
        let h = 1e-5;
        let fd =
            (ltr::pair_surrogate(si + h, sj, delta, sigma) - ltr::pair_surrogate(si - h, sj, delta, sigma)) / (2.0 * h);
        for analytic in [
            ltr::pair_lambda(si, sj, delta, sigma),
            ltr::lambda_gradients(&[si, sj], &[li, lj], 10, sigma).gradients[0],
        ] {
            let rel = ((analytic - fd) / fd).abs();
            worst = worst.max(rel);
            if rel > 1e-6 {
                return Err(format!("case {case}: analytic {analytic} vs finite difference {fd}"));
            }
        }
    }
    Ok(format!("500 groups sum to exactly 0; 100 pairs within {worst:.1e} of finite differences"))
}

fn convergence() -> Outcome {
    let ts: ltr::TrainingSet<f64> = synthetic::generate(40, 25, 11);
    let hyper = TrainParams::default();
    let m1 = ltr::train(&ts, &hyper).map_err(|e| e.to_string())?;
    let m2 = ltr::train(&ts, &hyper).map_err(|e| e.to_string())?;
    let last = *m1.training_meta.ndcg_trace.last().unwrap();
    let baseline = ltr::random_baseline_ndcg(&ts, hyper.ndcg_k, 5, 200);
    if m1.to_json() != m2.to_json() {
        return Err("same-seed models differ".into());
    }
    if last < 0.95 || last < baseline + 0.3 {
        return Err(format!("NDCG@10 {last:.4}, random baseline {baseline:.4}"));
    }
    Ok(format!("NDCG@10 {last:.4} vs random {baseline:.4}; identical bytes across runs"))
}

fn profile_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9F11);
    let order = |vs: &[(String, f64)]| {
        let mut v = vs.to_vec();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.into_iter().map(|(id, _)| id).collect::<Vec<_>>()
    };
    for trial in 0..1000 {
        let p = Param::ALL[rng.gen_range(0..N_PARAMS)];
        let m = 10f64.powf(rng.gen_range(-3.0..3.0));
        let profile =
            WeightingProfile::new("T", ProfileKind::Custom, [0.25; 4], BTreeMap::from([(p.name().to_string(), m)]))
                .map_err(|e| e.to_string())?;
        let n = rng.gen_range(2..30);
        let mut before = vec![];
        let mut after = vec![];
        for i in 0..n {
            let mut v = FeatureVector::default();
            for q in Param::ALL {
                // integer draws force ties, which must break the same way
                v.set(q, rng.gen_range(-20..20) as f64 / 4.0);
            }
            let w = apply_profile(&v, &profile);
            before.push((format!("P{i:03}"), v.get(p)));
            after.push((format!("P{i:03}"), w.get(p)));
        }
        if order(&before) != order(&after) {
            return Err(format!("trial {trial}: {} x{m} reorders", p.name()));
        }
    }
    Ok("1000 trials, single-feature order unchanged".into())
}

fn expected() -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(fixtures().join("expected.json")).unwrap()).unwrap()
}

fn planted() -> BTreeSet<String> {
    expected()["planted_patent_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

fn auto() -> AdvanceOptions {
    AdvanceOptions { auto_approve: true, stop_after: None }
}

fn fixture_funnel() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = RunStore::new(root.path());
    let run = store.create_run(&fixtures().join("run.toml")).map_err(|e| e.to_string())?;
    let run = store.advance(&run.run_id, auto()).map_err(|e| e.to_string())?;
    if run.phase != Phase::Complete {
        return Err(format!("stopped at {:?}: {:?}", run.phase, run.failure));
    }
    let pruned: BTreeSet<String> =
        store.pruned(&run.run_id).map_err(|e| e.to_string())?.patent_ids.into_iter().collect();
    let want = planted();
    if pruned != want {
        let extra: Vec<_> = pruned.difference(&want).collect();
        let missing: Vec<_> = want.difference(&pruned).collect();
        return Err(format!("pruned {} patents; extra {extra:?}, missing {missing:?}", pruned.len()));
    }
    let top_fit = store.matches(&run.run_id).map_err(|e| e.to_string())?.iter().map(|m| m.fit_score).max().unwrap_or(0);
    if top_fit < 95 {
        return Err(format!("top fit {top_fit}"));
    }
    let reports = store.reports(&run.run_id).map_err(|e| e.to_string())?;
    for r in &reports {
        let unset = r.unset_fields();
        if !unset.is_empty() {
            return Err(format!("{} leaves {unset:?} unset", r.report_id));
        }
    }
    Ok(format!("pruned = {} planted patents, top fit {top_fit}, {} complete report(s)", pruned.len(), reports.len()))
}

/// Independent reading of a gate's effect: last verdict per item wins.
fn oracle_downstream(payload: &[GateItem], state: GateState, decisions: &[Decision]) -> Option<Vec<GateItem>> {
    match state {
        GateState::Open | GateState::Rejected => None,
        GateState::Approved => Some(payload.to_vec()),
        GateState::Amended => {
            let mut out = vec![];
            for item in payload {
                match decisions.iter().rev().find(|d| d.item_id == item.id).map(|d| d.verdict) {
                    Some(Verdict::Drop) => {}
                    Some(Verdict::Regrade(g)) => {
                        let mut it = item.clone();
                        it.grade = Some(g);
                        out.push(it);
                    }
                    _ => out.push(item.clone()),
                }
            }
            Some(out)
        }
    }
}

fn random_submission(rng: &mut ChaCha8Rng, gate: GateId, payload: &[GateItem]) -> ReviewSubmission {
    let action = match rng.gen_range(0..10) {
        0 => ReviewAction::Reject,
        1..=3 => ReviewAction::Approve,
        _ => ReviewAction::Amend,
    };
    let mut verdicts = vec![];
    if action == ReviewAction::Amend {
        for _ in 0..rng.gen_range(1..8) {
            let item = &payload[rng.gen_range(0..payload.len())];
            let verdict = match rng.gen_range(0..3) {
                0 => Verdict::Drop,
                1 => Verdict::Keep,
                _ => Verdict::Regrade(rng.gen_range(0..=4)),
            };
            verdicts.push(Decision { item_id: item.id.clone(), verdict, note: String::new() });
        }
    }
    ReviewSubmission { gate_id: gate, reviewer: "r".into(), action: Some(action), verdicts, expected_version: None }
}

fn gate_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6A7E);
    let mut checked = 0usize;
    for trial in 0..300 {
        let mut logs: BTreeMap<GateId, GateLog> = BTreeMap::new();
        let mut live: BTreeMap<GateId, String> = BTreeMap::new();
        for gate in GateId::ALL {
            let n = rng.gen_range(1..30);
            let payload: Vec<GateItem> = (0..n)
                .map(|i| GateItem {
                    id: format!("{gate}-{i}"),
                    grade: None,
                    data: serde_json::json!({"score": rng.gen_range(0..1000)}),
                })
                .collect();
            let rounds = rng.gen_range(1..4);
            for round in 0..rounds {
                if gates::open_gate(&mut logs, gate, "payload.json", payload.clone()).is_err() {
                    return Err(format!("trial {trial}: could not open {gate} round {round}"));
                }
                let sub = random_submission(&mut rng, gate, &payload);
                let log = logs.get_mut(&gate).unwrap();
                let g = gates::submit_review(log, &sub).map_err(|e| e.to_string())?;
                match oracle_downstream(&payload, g.state, &sub.verdicts) {
                    Some(items) => live.insert(gate, serde_json::to_string_pretty(&items).unwrap() + "\n"),
                    None => live.remove(&gate),
                };
            }
            if !logs[&gate].current().unwrap().state.passes() {
                break;
            }
        }
        for (gate, log) in &logs {
            let reloaded: GateLog = serde_json::from_str(&log.to_json()).map_err(|e| e.to_string())?;
            let replayed = gates::replay(&reloaded).map(|items| gates::downstream_json(&items));
            if replayed != live.get(gate).cloned() {
                return Err(format!("trial {trial}: {gate} replay differs from live downstream"));
            }
            checked += 1;
        }
    }

    // The same property on a real run with amendments at every gate.
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = RunStore::new(root.path());
    let id = store.create_run(&fixtures().join("run.toml")).map_err(|e| e.to_string())?.run_id;
    store.advance(&id, AdvanceOptions::default()).map_err(|e| e.to_string())?;
    for gate in GateId::ALL {
        let log = store.gate_log(&id, gate).map_err(|e| e.to_string())?;
        let payload = &log.current().unwrap().payload;
        let mut sub = random_submission(&mut rng, gate, payload);
        sub.action = Some(ReviewAction::Amend);
        sub.verdicts.retain(|d| d.verdict != Verdict::Drop);
        sub.verdicts.push(Decision {
            item_id: payload[payload.len() - 1].id.clone(),
            verdict: Verdict::Drop,
            note: "audit".into(),
        });
        store.review(&id, &sub).map_err(|e| e.to_string())?;
    }
    let dir = store.run_dir(&id);
    for (gate, artifact) in [
        (GateId::PostRanking, "ranking_approved.json"),
        (GateId::PostMatch, "matches_approved.json"),
        (GateId::FinalOntology, "reports_approved.json"),
    ] {
        let log: GateLog =
            serde_json::from_str(&fs::read_to_string(dir.join(format!("gates/{gate}.json"))).unwrap()).unwrap();
        let replayed = gates::replay(&log).map(|items| gates::downstream_json(&items)).ok_or("gate not passing")?;
        if replayed.as_bytes() != fs::read(dir.join(artifact)).map_err(|e| e.to_string())? {
            return Err(format!("{artifact} differs from replay of {gate}"));
        }
        checked += 1;
    }
    Ok(format!("{checked} gate logs replayed byte-identically (300 random sequences + amended fixture run)"))
}

fn rank_of(doc: &RankingDoc, id: &str) -> Option<usize> {
    doc.entries.iter().find(|e| e.patent_id == id).map(|e| e.rank)
}

fn copy_fixture_inputs(to: &Path) -> PathBuf {
    for entry in fs::read_dir(fixtures()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
        }
    }
    to.join("run.toml")
}

fn feedback_direction() -> Outcome {
    let want = planted();
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = RunStore::new(root.path().join("runs"));
    let id = store.create_run(&fixtures().join("run.toml")).map_err(|e| e.to_string())?.run_id;
    let run = store.advance(&id, AdvanceOptions::default()).map_err(|e| e.to_string())?;
    if run.phase != Phase::GatePostRanking {
        return Err(format!("expected PostRanking review, at {:?}", run.phase));
    }
    let before = store.ranking(&id, None).map_err(|e| e.to_string())?;
    let target = before
        .entries
        .iter()
        .find(|e| !want.contains(&e.patent_id))
        .map(|e| e.patent_id.clone())
        .ok_or("no non-planted patent ranked")?;
    let rank_before = rank_of(&before, &target).unwrap();
    let sub = ReviewSubmission {
        gate_id: GateId::PostRanking,
        reviewer: "attorney".into(),
        action: Some(ReviewAction::Amend),
        verdicts: vec![Decision {
            item_id: target.clone(),
            verdict: Verdict::Regrade(0),
            note: "not licensable".into(),
        }],
        expected_version: Some(1),
    };
    store.review(&id, &sub).map_err(|e| e.to_string())?;
    let feedback = store.export_labels(&id).map_err(|e| e.to_string())?;
    if feedback.len() != 1 || feedback[0].patent_id != target || feedback[0].grade != 0 {
        return Err(format!("unexpected exported labels {feedback:?}"));
    }
    let base: Vec<LabelRecord> = ltr::load_labels(&fixtures().join("labels.jsonl")).map_err(|e| e.to_string())?;
    let merged = service::merge_labels(&base, &feedback);

    let inputs_dir = root.path().join("inputs");
    fs::create_dir_all(&inputs_dir).unwrap();
    let config = copy_fixture_inputs(&inputs_dir);
    let inputs = service::load_training_inputs(&config).map_err(|e| e.to_string())?;
    let model = service::train_model(&inputs, &merged, &TrainParams::default()).map_err(|e| e.to_string())?;
    ltr::save_model(&model, &inputs_dir.join("model.json")).map_err(|e| e.to_string())?;

    let id2 = store.create_run(&config).map_err(|e| e.to_string())?.run_id;
    store.advance(&id2, AdvanceOptions::default()).map_err(|e| e.to_string())?;
    let after = store.ranking(&id2, None).map_err(|e| e.to_string())?;
    let rank_after = rank_of(&after, &target).ok_or("target vanished from ranking")?;
    if rank_after <= rank_before {
        return Err(format!("{target}: rank {rank_before} -> {rank_after}"));
    }
    Ok(format!("{target}: rank {rank_before} -> {rank_after} after regrade to 0 and retraining"))
}

fn tree_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let config = fixtures().join("run.toml");
    let mut trees = vec![];
    for resume in [false, false, true] {
        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        let store = RunStore::new(root.path());
        let id = store.create_run(&config).map_err(|e| e.to_string())?.run_id;
        if resume {
            let r = store
                .advance(&id, AdvanceOptions { auto_approve: true, stop_after: Some(Phase::Ranked) })
                .map_err(|e| e.to_string())?;
            if r.phase != Phase::Ranked {
                return Err(format!("stop_after Ranked ended at {:?}", r.phase));
            }
        }
        let r = store.advance(&id, auto()).map_err(|e| e.to_string())?;
        if r.phase != Phase::Complete {
            return Err(format!("ended at {:?}", r.phase));
        }
        trees.push((id.clone(), tree_bytes(&store.run_dir(&id))));
        drop(root);
    }
    let (id0, t0) = &trees[0];
    for (id, t) in &trees[1..] {
        if id != id0 {
            return Err(format!("run ids differ: {id0} vs {id}"));
        }
        let keys: Vec<_> = t0.keys().chain(t.keys()).collect::<BTreeSet<_>>().into_iter().collect();
        if let Some(k) = keys.into_iter().find(|k| t0.get(*k) != t.get(*k)) {
            return Err(format!("{} differs between runs", k.display()));
        }
    }
    Ok(format!("3 runs of {id0} ({} files) byte-identical, including a stop/resume", t0.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("formula oracle suite", Duration::from_secs(5), formula_oracles),
        ("NDCG exhaustive oracle", Duration::from_secs(10), ndcg_exhaustive),
        ("lambda gradient checks", Duration::from_secs(60), lambda_checks),
        ("LambdaMART convergence", Duration::from_secs(60), convergence),
        ("profile invariance", Duration::from_secs(60), profile_invariance),
        ("fixture funnel replay", Duration::from_secs(30), fixture_funnel),
        ("gate audit replay", Duration::from_secs(60), gate_audit),
        ("feedback loop direction", Duration::from_secs(60), feedback_direction),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name:<26} {took:>9.2?}  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<26} {took:>9.2?}  {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
