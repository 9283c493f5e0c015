//! Pipeline artifacts on the mini fixture against the generator's sidecar values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use pprune_core::params::Param;
use pprune_core::service::{AdvanceOptions, Phase, RunStore};
use pprune_core::strata;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

struct Completed {
    _root: tempfile::TempDir,
    dir: PathBuf,
}

fn completed() -> &'static Completed {
    static RUN: OnceLock<Completed> = OnceLock::new();
    RUN.get_or_init(|| {
        let root = tempfile::tempdir().unwrap();
        let store = RunStore::new(root.path());
        let id = store.create_run(&fixtures().join("run.toml")).unwrap().run_id;
        let run = store.advance(&id, AdvanceOptions { auto_approve: true, stop_after: None }).unwrap();
        assert_eq!(run.phase, Phase::Complete);
        Completed { dir: store.run_dir(&id), _root: root }
    })
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn assert_close(got: f64, want: f64, what: &str) {
    let ok = if want == 0.0 { got.abs() <= 1e-12 } else { ((got - want) / want).abs() <= 1e-9 };
    assert!(ok, "{what}: got {got}, oracle {want}");
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn feature_vectors_match_oracle() {
    let oracle: BTreeMap<String, Value> = jsonl(&fixtures().join("oracle/vectors.jsonl"))
        .into_iter()
        .map(|v| (v["patent_id"].as_str().unwrap().to_string(), v))
        .collect();
    let lines = jsonl(&completed().dir.join("vectors.jsonl"));
    assert_eq!(lines.len(), oracle.len());
    for line in &lines {
        let id = line["patent_id"].as_str().unwrap();
        let want = &oracle[id];
        let missing: Vec<&str> = want["missing"].as_array().unwrap().iter().map(|m| m.as_str().unwrap()).collect();
        for (i, p) in Param::ALL.iter().enumerate() {
            let what = format!("{id} {}", p.name());
            let masked = line["missing_mask"][i].as_bool().unwrap();
            assert_eq!(masked, missing.contains(&p.name()), "{what} mask");
            if !masked {
                assert_close(f(&line["values"][i]), f(&want["values"][p.name()]), &what);
            }
        }
    }
}

#[test]
fn categories_match_oracle() {
    let oracle = json(&fixtures().join("oracle/categories.json"));
    let doc = json(&completed().dir.join("categories.json"));

    let trends: Vec<f64> =
        jsonl(&completed().dir.join("vectors.jsonl")).iter().map(|l| f(&l["values"][Param::STrend as usize])).collect();
    let (q1, q2) = strata::tertiles(&trends).unwrap();
    assert_close(q1, f(&oracle["tertiles"][0]), "q1");
    assert_close(q2, f(&oracle["tertiles"][1]), "q2");

    let got: BTreeMap<&str, &Value> =
        doc["categories"].as_array().unwrap().iter().map(|c| (c["key"].as_str().unwrap(), c)).collect();
    let want = oracle["categories"].as_array().unwrap();
    assert_eq!(got.len(), want.len());
    for w in want {
        let key = w["key"].as_str().unwrap();
        let g = got.get(key).unwrap_or_else(|| panic!("category {key} missing"));
        assert_eq!(g["members"], w["members"], "{key} members");
        for agg in ["mean_l_rem", "mean_s_trend", "mean_v_tam", "mean_cagr_tech", "v_tam_scaled"] {
            assert_close(f(&g["aggregates"][agg]), f(&w[agg]), &format!("{key} {agg}"));
        }
        assert_close(f(&g["s_cat"]), f(&w["s_cat_quick_monetization"]), &format!("{key} s_cat"));
    }
}

#[test]
fn need_nodes_match_oracle() {
    let oracle = json(&fixtures().join("oracle/need_nodes.json"));
    let doc = json(&completed().dir.join("needs.json"));
    let nodes = doc["nodes"].as_array().unwrap();
    let want = oracle.as_array().unwrap();
    assert_eq!(nodes.len(), want.len());
    for (g, w) in nodes.iter().zip(want) {
        let id = w["need_id"].as_str().unwrap();
        assert_eq!(g["need_id"], w["need_id"]);
        assert_eq!(g["entity"], w["entity"], "{id}");
        assert_eq!(g["description"], w["description"], "{id}");
        assert_eq!(g["supporting_triples"].as_array().unwrap().len() as u64, w["n_triples"].as_u64().unwrap(), "{id}");
        assert_eq!(g["mentions_in_window"], w["mentions_in_window"], "{id}");
        assert_eq!(g["key_terms"], w["key_terms"], "{id}");
        assert_close(f(&g["demand_db"]), f(&w["demand_db"]), &format!("{id} demand"));
        assert_close(f(&g["authority"]), f(&w["authority"]), &format!("{id} authority"));
    }
}

#[test]
fn dropped_records_match_expected() {
    let expected = json(&fixtures().join("expected.json"));
    let dropped = json(&completed().dir.join("dropped.json"));
    let mut got: Vec<String> =
        dropped.as_array().unwrap().iter().map(|d| d["patent_id"].as_str().unwrap().to_string()).collect();
    got.sort();
    let mut want: Vec<String> =
        expected["dropped_patent_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    want.sort();
    assert_eq!(got, want);
}
