use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

/// Binary regression tree stored as a flat node list rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn stump(value: T) -> Self {
        RegressionTree { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, row: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Feature indices used by any split, ascending.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Checks that every child index is in range and every split feature is
    /// below `n_features`.
    pub fn is_well_formed(&self, n_features: usize) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().all(|n| match n {
                Node::Split { feature, left, right, threshold } => {
                    *feature < n_features
                        && *left < self.nodes.len()
                        && *right < self.nodes.len()
                        && !threshold.is_nan()
                }
                Node::Leaf { value } => value.is_finite(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    /// Added to the hessian sum in leaf values.
    pub ridge: f64,
    /// Share of features considered per tree; 1.0 uses all of them.
    pub feature_fraction: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_leaves: 15, min_samples_leaf: 5, ridge: 1e-6, feature_fraction: 1.0 }
    }
}

#[derive(Debug, Clone)]
struct Candidate<T> {
    gain: T,
    feature: usize,
    threshold: T,
}

struct OpenLeaf<T> {
    node: usize,
    rows: Vec<usize>,
    best: Option<Candidate<T>>,
}

fn leaf_value<T: Scalar>(rows: &[usize], g: &[T], h: &[T], ridge: T) -> T {
    let (sg, sh) = rows.iter().fold((T::zero(), T::zero()), |(a, b), &r| (a + g[r], b + h[r]));
    let v = -sg / (sh + ridge);
    if v.is_finite() {
        v
    } else {
        T::zero()
    }
}

/// Best variance-reduction split of `rows`, ties going to the lowest
/// feature index and then the lowest threshold.
fn best_split<T: Scalar>(
    x: &[Vec<T>],
    g: &[T],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Candidate<T>> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: T = rows.iter().fold(T::zero(), |a, &r| a + g[r]);
    let sq: T = rows.iter().fold(T::zero(), |a, &r| a + g[r] * g[r]);
    let parent = total * total / T::of_usize(n);
    let tolerance = T::epsilon() * T::of(64.0) * sq;
    let mut best: Option<Candidate<T>> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut left = T::zero();
        for (i, &r) in sorted.iter().enumerate().take(n - 1) {
            left = left + g[r];
            let n_left = i + 1;
            let (lo, hi) = (x[r][f], x[sorted[i + 1]][f]);
            if n_left < min_leaf || n - n_left < min_leaf || !(lo < hi) {
                continue;
            }
            let right = total - left;
            let gain = left * left / T::of_usize(n_left) + right * right / T::of_usize(n - n_left) - parent;
            if gain > tolerance && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = (lo + hi) / T::of(2.0);
                if !(threshold < hi) {
                    threshold = lo;
                }
                best = Some(Candidate { gain, feature: f, threshold });
            }
        }
    }
    best
}

/// Grows a tree leaf-wise, always splitting the open leaf with the largest
/// gain (earliest created on ties), until `max_leaves` or no split helps.
pub fn fit_tree<T: Scalar>(
    x: &[Vec<T>],
    gradients: &[T],
    hessians: &[T],
    params: &TreeParams,
    seed: u64,
) -> RegressionTree<T> {
    let ridge = T::of(params.ridge);
    let all_rows: Vec<usize> = (0..x.len()).collect();
    if x.is_empty() {
        return RegressionTree::stump(T::zero());
    }
    let n_features = x[0].len();
    let mut features: Vec<usize> = (0..n_features).collect();
    if params.feature_fraction < 1.0 {
        let keep = ((n_features as f64 * params.feature_fraction).ceil() as usize).clamp(1, n_features);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        features.shuffle(&mut rng);
        features.truncate(keep);
        features.sort_unstable();
    }

    let mut nodes = vec![Node::Leaf { value: leaf_value(&all_rows, gradients, hessians, ridge) }];
    let best = best_split(x, gradients, &all_rows, &features, params.min_samples_leaf);
    let mut open = vec![OpenLeaf { node: 0, rows: all_rows, best }];
    let mut n_leaves = 1;

    while n_leaves < params.max_leaves {
        let pick = open.iter().enumerate().filter_map(|(i, l)| l.best.as_ref().map(|b| (i, b.gain))).fold(
            None,
            |acc: Option<(usize, T)>, (i, g)| match acc {
                Some((_, bg)) if !(g > bg) => acc,
                _ => Some((i, g)),
            },
        );
        let Some((idx, _)) = pick else { break };
        let leaf = open.remove(idx);
        let split = leaf.best.expect("picked leaf has a split");
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            leaf.rows.iter().partition(|&&r| x[r][split.feature] <= split.threshold);
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: leaf_value(&l_rows, gradients, hessians, ridge) });
        nodes.push(Node::Leaf { value: leaf_value(&r_rows, gradients, hessians, ridge) });
        nodes[leaf.node] = Node::Split { feature: split.feature, threshold: split.threshold, left: li, right: ri };
        n_leaves += 1;
        for (node, rows) in [(li, l_rows), (ri, r_rows)] {
            let best = best_split(x, gradients, &rows, &features, params.min_samples_leaf);
            open.push(OpenLeaf { node, rows, best });
        }
    }
    RegressionTree { nodes }
}
