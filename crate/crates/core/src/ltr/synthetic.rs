//! Seeded synthetic ranking data for convergence checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Item, QueryGroup, TrainingSet};
use crate::params::{Param, N_PARAMS};
use crate::Scalar;

/// Parameters the synthetic label depends on, with their weights.
pub const DRIVERS: [(Param, f64); 3] = [(Param::VCite, 0.5), (Param::CagrTech, 0.3), (Param::SSc, 0.2)];

/// Grade in 0..=4 from a monotone function of the driver features.
pub fn label_of(values: &[f64]) -> u32 {
    let s: f64 = DRIVERS.iter().map(|(p, w)| w * values[p.index()]).sum();
    ((s * 5.0).floor() as u32).min(4)
}

/// `n_queries` groups of `n_items` items. Values are uniform in [0, 1),
/// mask indicators are all 0.
pub fn generate<T: Scalar>(n_queries: usize, n_items: usize, seed: u64) -> TrainingSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let queries = (0..n_queries)
        .map(|q| {
            let items = (0..n_items)
                .map(|i| {
                    let values: Vec<f64> = (0..N_PARAMS).map(|_| rng.gen::<f64>()).collect();
                    let label = label_of(&values);
                    let features = values.iter().map(|&v| T::of(v)).chain((0..N_PARAMS).map(|_| T::zero())).collect();
                    Item { patent_id: format!("q{q:03}-{i:03}"), features, label }
                })
                .collect();
            QueryGroup { query_id: format!("q{q:03}"), items }
        })
        .collect();
    TrainingSet { queries }
}
