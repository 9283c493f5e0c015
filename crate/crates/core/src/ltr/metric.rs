use super::LtrError;
use crate::Scalar;

fn gain<T: Scalar>(rel: u32) -> T {
    T::of(2f64.powi(rel as i32) - 1.0)
}

/// Position discount `1 / log2(pos + 2)` for a zero-based position.
pub fn discount<T: Scalar>(pos: usize) -> T {
    T::one() / T::of_usize(pos + 2).log2()
}

/// Discounted cumulative gain of the first `k` relevances.
pub fn dcg<T: Scalar>(relevances: &[i32], k: usize) -> Result<T, LtrError> {
    let mut total = T::zero();
    for (pos, &rel) in relevances.iter().enumerate() {
        if rel < 0 {
            return Err(LtrError::NegativeRelevance(rel));
        }
        if pos < k {
            total = total + gain::<T>(rel as u32) * discount::<T>(pos);
        }
    }
    Ok(total)
}

pub(crate) fn dcg_u<T: Scalar>(relevances: impl Iterator<Item = u32>, k: usize) -> T {
    relevances.take(k).enumerate().fold(T::zero(), |acc, (pos, rel)| acc + gain::<T>(rel) * discount::<T>(pos))
}

pub(crate) fn ideal_dcg<T: Scalar>(labels: &[u32], k: usize) -> T {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    dcg_u(sorted.into_iter(), k)
}

/// NDCG@k of relevances listed in ranked order. Lists with no positive
/// relevance score 1.0.
pub fn ndcg<T: Scalar>(relevances: &[i32], k: usize) -> Result<T, LtrError> {
    let actual: T = dcg(relevances, k)?;
    let mut ideal_order = relevances.to_vec();
    ideal_order.sort_unstable_by(|a, b| b.cmp(a));
    let ideal: T = dcg(&ideal_order, k)?;
    if ideal == T::zero() {
        return Ok(T::one());
    }
    Ok((actual / ideal).min(T::one()))
}

/// Order of item indices by descending score, ties by index.
pub(crate) fn ranking_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

/// NDCG@k of `labels` when ranked by `scores`.
pub fn ndcg_of_scores<T: Scalar>(scores: &[T], labels: &[u32], k: usize) -> T {
    let ideal: T = ideal_dcg(labels, k);
    if ideal == T::zero() {
        return T::one();
    }
    let order = ranking_order(scores);
    let actual: T = dcg_u(order.iter().map(|&i| labels[i]), k);
    (actual / ideal).min(T::one())
}
