//! LambdaMART: NDCG, lambda gradients, boosted regression trees.

mod lambda;
mod metric;
pub mod synthetic;
mod tree;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{model_feature_names, FeatureVector};
use crate::strata::{apply_profile, WeightingProfile};
use crate::Scalar;

pub use lambda::{lambda_gradients, lambda_grid, pair_lambda, pair_surrogate, Lambdas};
pub use metric::{dcg, discount, ndcg, ndcg_of_scores};
pub use tree::{fit_tree, Node, RegressionTree, TreeParams};

pub const MODEL_VERSION: u32 = 1;
pub const MAX_GRADE: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtrError {
    #[error("negative relevance {0}")]
    NegativeRelevance(i32),
    #[error("training set has no query groups")]
    InsufficientQueries,
    #[error("query group {0} has fewer than 2 items")]
    SmallGroup(String),
    #[error("grade {grade} for {patent_id} exceeds {max}")]
    GradeOutOfRange { patent_id: String, grade: u32, max: u32 },
    #[error("item {0} has the wrong number of features")]
    FeatureCount(String),
    #[error("feature names differ from the model's")]
    FeatureOrderMismatch,
    #[error("model schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("labels: {0}")]
    Labels(String),
    #[error("labelled patent {0} has no feature vector")]
    UnknownPatent(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = LtrError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Item<T> {
    pub patent_id: String,
    pub features: Vec<T>,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QueryGroup<T> {
    pub query_id: String,
    pub items: Vec<Item<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainingSet<T> {
    pub queries: Vec<QueryGroup<T>>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(queries: Vec<QueryGroup<T>>) -> Result<Self> {
        let n_features = queries.first().and_then(|q| q.items.first()).map(|i| i.features.len());
        for q in &queries {
            if q.items.len() < 2 {
                return Err(LtrError::SmallGroup(q.query_id.clone()));
            }
            for it in &q.items {
                if it.label > MAX_GRADE {
                    return Err(LtrError::GradeOutOfRange {
                        patent_id: it.patent_id.clone(),
                        grade: it.label,
                        max: MAX_GRADE,
                    });
                }
                if Some(it.features.len()) != n_features {
                    return Err(LtrError::FeatureCount(it.patent_id.clone()));
                }
            }
        }
        Ok(TrainingSet { queries })
    }

    /// Groups labels by query id and attaches model rows. Groups left with
    /// fewer than two items are dropped.
    pub fn from_labels(labels: &[LabelRecord], vectors: &BTreeMap<String, FeatureVector<T>>) -> Result<Self> {
        let mut groups: BTreeMap<&str, BTreeMap<&str, u32>> = BTreeMap::new();
        for l in labels {
            groups.entry(&l.query_id).or_default().insert(&l.patent_id, l.grade);
        }
        let mut queries = vec![];
        for (qid, items) in groups {
            if items.len() < 2 {
                tracing::debug!(query_id = qid, "dropping single-item group");
                continue;
            }
            let items = items
                .into_iter()
                .map(|(pid, grade)| {
                    let v = vectors.get(pid).ok_or_else(|| LtrError::UnknownPatent(pid.to_string()))?;
                    Ok(Item { patent_id: pid.to_string(), features: v.model_row(), label: grade })
                })
                .collect::<Result<Vec<_>>>()?;
            queries.push(QueryGroup { query_id: qid.to_string(), items });
        }
        Self::new(queries)
    }

    pub fn n_items(&self) -> usize {
        self.queries.iter().map(|q| q.items.len()).sum()
    }
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelRecord {
    pub query_id: String,
    pub patent_id: String,
    pub grade: u32,
}

pub fn parse_labels<R: BufRead>(reader: R) -> Result<Vec<LabelRecord>> {
    let mut out = vec![];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LtrError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord =
            serde_json::from_str(&line).map_err(|e| LtrError::Labels(format!("line {}: {e}", i + 1)))?;
        if rec.grade > MAX_GRADE {
            return Err(LtrError::GradeOutOfRange { patent_id: rec.patent_id, grade: rec.grade, max: MAX_GRADE });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let f = std::fs::File::open(path).map_err(|e| LtrError::Io(format!("{}: {e}", path.display())))?;
    parse_labels(std::io::BufReader::new(f))
}

pub fn write_labels(labels: &[LabelRecord]) -> String {
    labels.iter().map(|l| serde_json::to_string(l).expect("label serializes") + "\n").collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub ndcg_k: usize,
    pub sigma: f64,
    pub seed: u64,
    pub feature_fraction: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_trees: 50,
            learning_rate: 0.1,
            max_leaves: 15,
            min_samples_leaf: 5,
            ndcg_k: 10,
            sigma: 1.0,
            seed: 7,
            feature_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub n_trees: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub ndcg_k: usize,
    pub sigma: f64,
    /// Mean training NDCG@k before any tree, then after each tree.
    pub ndcg_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RankerModel<T> {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub learning_rate: T,
    pub trees: Vec<RegressionTree<T>>,
    pub training_meta: TrainingMeta,
}

fn mean_ndcg<T: Scalar>(ts: &TrainingSet<T>, scores: &[Vec<T>], k: usize) -> f64 {
    let total: f64 = ts
        .queries
        .iter()
        .zip(scores)
        .map(|(q, s)| {
            let labels: Vec<u32> = q.items.iter().map(|i| i.label).collect();
            ndcg_of_scores(s, &labels, k).to_f64_lossy()
        })
        .sum();
    total / ts.queries.len() as f64
}

/// Expected mean NDCG@k under uniformly random orderings, estimated with
/// `n_perm` seeded shuffles per group.
pub fn random_baseline_ndcg<T: Scalar>(ts: &TrainingSet<T>, k: usize, seed: u64, n_perm: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for q in &ts.queries {
        let mut labels: Vec<i32> = q.items.iter().map(|i| i.label as i32).collect();
        let mut acc = 0.0;
        for _ in 0..n_perm {
            labels.shuffle(&mut rng);
            acc += ndcg::<f64>(&labels, k).expect("labels nonnegative");
        }
        total += acc / n_perm as f64;
    }
    total / ts.queries.len() as f64
}

/// Boosts `hyper.n_trees` trees on lambda gradients.
pub fn train<T: Scalar>(ts: &TrainingSet<T>, hyper: &TrainParams) -> Result<RankerModel<T>> {
    if ts.queries.is_empty() {
        return Err(LtrError::InsufficientQueries);
    }
    let n_features = ts.queries[0].items[0].features.len();
    let rows: Vec<Vec<T>> = ts.queries.iter().flat_map(|q| q.items.iter().map(|i| i.features.clone())).collect();
    let lr = T::of(hyper.learning_rate);
    let sigma = T::of(hyper.sigma);
    let tree_params = TreeParams {
        max_leaves: hyper.max_leaves,
        min_samples_leaf: hyper.min_samples_leaf,
        feature_fraction: hyper.feature_fraction,
        ..TreeParams::default()
    };
    let mut scores: Vec<Vec<T>> = ts.queries.iter().map(|q| vec![T::zero(); q.items.len()]).collect();
    let mut trace = vec![mean_ndcg(ts, &scores, hyper.ndcg_k)];
    let mut trees = Vec::with_capacity(hyper.n_trees);
    let mut seeder = ChaCha8Rng::seed_from_u64(hyper.seed);

    for t in 0..hyper.n_trees {
        let mut grads = Vec::with_capacity(rows.len());
        let mut hess = Vec::with_capacity(rows.len());
        for (q, s) in ts.queries.iter().zip(&scores) {
            let labels: Vec<u32> = q.items.iter().map(|i| i.label).collect();
            let l = lambda_gradients(s, &labels, hyper.ndcg_k, sigma);
            grads.extend(l.gradients);
            hess.extend(l.hessians);
        }
        let tree_seed = rand::Rng::gen::<u64>(&mut seeder);
        let tree = fit_tree(&rows, &grads, &hess, &tree_params, tree_seed);
        let mut r = 0;
        for s in scores.iter_mut() {
            for v in s.iter_mut() {
                *v = *v + lr * tree.predict(&rows[r]);
                r += 1;
            }
        }
        trees.push(tree);
        trace.push(mean_ndcg(ts, &scores, hyper.ndcg_k));
        tracing::debug!(tree = t, ndcg = trace[trace.len() - 1], "boosting");
    }

    let feature_names = if n_features == 2 * crate::params::N_PARAMS {
        model_feature_names()
    } else {
        (0..n_features).map(|i| format!("f{i}")).collect()
    };
    Ok(RankerModel {
        version: MODEL_VERSION,
        feature_names,
        learning_rate: lr,
        trees,
        training_meta: TrainingMeta {
            seed: hyper.seed,
            n_trees: hyper.n_trees,
            max_leaves: hyper.max_leaves,
            min_samples_leaf: hyper.min_samples_leaf,
            ndcg_k: hyper.ndcg_k,
            sigma: hyper.sigma,
            ndcg_trace: trace,
        },
    })
}

impl<T: Scalar> RankerModel<T> {
    pub fn score_row(&self, row: &[T]) -> T {
        self.trees.iter().fold(T::zero(), |acc, t| acc + self.learning_rate * t.predict(row))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(s).map_err(|e| LtrError::CorruptModel(e.to_string()))?;
        if probe.version != MODEL_VERSION {
            return Err(LtrError::SchemaVersionMismatch { found: probe.version, expected: MODEL_VERSION });
        }
        let m: RankerModel<T> = serde_json::from_str(s).map_err(|e| LtrError::CorruptModel(e.to_string()))?;
        let n = m.feature_names.len();
        if let Some(i) = m.trees.iter().position(|t| !t.is_well_formed(n)) {
            return Err(LtrError::CorruptModel(format!("tree {i} is malformed")));
        }
        Ok(m)
    }
}

pub fn save_model<T: Scalar>(m: &RankerModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, m.to_json()).map_err(|e| LtrError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<RankerModel<T>> {
    let s = std::fs::read_to_string(path).map_err(|e| LtrError::Io(format!("{}: {e}", path.display())))?;
    RankerModel::from_json(&s)
}

/// Scores every vector under `profile` and sorts by descending score, ties
/// by ascending patent id.
pub fn predict<T: Scalar>(
    m: &RankerModel<T>,
    vectors: &BTreeMap<String, FeatureVector<T>>,
    profile: &WeightingProfile,
) -> Result<Vec<(String, T)>> {
    if m.feature_names != model_feature_names() {
        return Err(LtrError::FeatureOrderMismatch);
    }
    let mut out: Vec<(String, T)> =
        vectors.iter().map(|(id, v)| (id.clone(), m.score_row(&apply_profile(v, profile).model_row()))).collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
