use super::metric::{discount, ideal_dcg, ranking_order};
use crate::Scalar;

/// Grid that pair lambdas are rounded to before accumulation. Every
/// partial sum is then an exact multiple of the grid, so the group total
/// is exactly zero whenever magnitudes stay below `2^13`.
pub fn lambda_grid<T: Scalar>() -> T {
    T::epsilon() * T::of(4096.0)
}

fn snap<T: Scalar>(x: T, grid: T) -> T {
    (x / grid).round() * grid
}

/// Per-item first and second derivatives of the LambdaRank objective for
/// one query group.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas<T> {
    pub gradients: Vec<T>,
    pub hessians: Vec<T>,
}

/// |NDCG@k change| from swapping the items at ranked positions `pi`, `pj`.
pub(crate) fn delta_ndcg<T: Scalar>(li: u32, lj: u32, pi: usize, pj: usize, k: usize, inv_ideal: T) -> T {
    let disc = |p: usize| if p < k { discount::<T>(p) } else { T::zero() };
    let gain_diff = T::of(2f64.powi(li as i32) - 2f64.powi(lj as i32));
    (gain_diff * (disc(pi) - disc(pj)) * inv_ideal).abs()
}

/// Lambda for a pair where item `i` is the more relevant one:
/// `-sigma * delta / (1 + exp(sigma * (s_i - s_j)))`.
pub fn pair_lambda<T: Scalar>(s_i: T, s_j: T, delta: T, sigma: T) -> T {
    let rho = T::one() / (T::one() + (sigma * (s_i - s_j)).exp());
    -sigma * delta * rho
}

/// Gradients and hessians for one group. Groups whose labels are all equal
/// produce zeros.
pub fn lambda_gradients<T: Scalar>(scores: &[T], labels: &[u32], ndcg_k: usize, sigma: T) -> Lambdas<T> {
    let n = scores.len();
    let mut gradients = vec![T::zero(); n];
    let mut hessians = vec![T::zero(); n];
    let ideal: T = ideal_dcg(labels, ndcg_k);
    if ideal == T::zero() {
        return Lambdas { gradients, hessians };
    }
    let inv_ideal = T::one() / ideal;
    let order = ranking_order(scores);
    let mut position = vec![0usize; n];
    for (pos, &item) in order.iter().enumerate() {
        position[item] = pos;
    }
    let grid = lambda_grid::<T>();
    for i in 0..n {
        for j in 0..n {
            if labels[i] <= labels[j] {
                continue;
            }
            let delta = delta_ndcg(labels[i], labels[j], position[i], position[j], ndcg_k, inv_ideal);
            if delta == T::zero() {
                continue;
            }
            let rho = T::one() / (T::one() + (sigma * (scores[i] - scores[j])).exp());
            let lambda = snap(-sigma * delta * rho, grid);
            gradients[i] = gradients[i] + lambda;
            gradients[j] = gradients[j] - lambda;
            let h = sigma * sigma * delta * rho * (T::one() - rho);
            hessians[i] = hessians[i] + h;
            hessians[j] = hessians[j] + h;
        }
    }
    Lambdas { gradients, hessians }
}

/// Pairwise logistic surrogate whose derivative in `s_i` is [`pair_lambda`].
pub fn pair_surrogate(s_i: f64, s_j: f64, delta: f64, sigma: f64) -> f64 {
    delta * (-sigma * (s_i - s_j)).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltr::metric::ndcg;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_labels_give_zero() {
        let l = lambda_gradients(&[0.3, -1.0, 2.0], &[2, 2, 2], 10, 1.0);
        assert!(l.gradients.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn saturated_pair_vanishes() {
        let l = lambda_gradients(&[50.0f64, -50.0], &[1, 0], 2, 1.0);
        assert!(l.gradients[0].abs() < 1e-20);
    }

    #[test]
    fn two_item_closed_form() {
        let l = lambda_gradients(&[0.0, 0.0], &[1, 0], 2, 1.0);
        // Oracle: |NDCG of swapped order - NDCG of current order|.
        let delta = (ndcg::<f64>(&[0, 1], 2).unwrap() - ndcg::<f64>(&[1, 0], 2).unwrap()).abs();
        assert!((l.gradients[0] + 0.5 * delta).abs() < 1e-10);
        assert_eq!(l.gradients[0], -l.gradients[1]);
    }

    #[test]
    fn delta_matches_swap_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..8);
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let k = rng.gen_range(1..=n);
            let ranked: Vec<i32> = labels.iter().map(|&l| l as i32).collect();
            let ideal: f64 = ideal_dcg(&labels, k);
            if ideal == 0.0 {
                continue;
            }
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let mut swapped = ranked.clone();
            swapped.swap(a, b);
            let oracle = (ndcg::<f64>(&swapped, k).unwrap() - ndcg::<f64>(&ranked, k).unwrap()).abs();
            let got = delta_ndcg(labels[a], labels[b], a, b, k, 1.0 / ideal);
            assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        }
    }

    #[test]
    fn group_sum_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.gen_range(2..40);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let l = lambda_gradients(&scores, &labels, 10, 1.0);
            assert_eq!(l.gradients.iter().sum::<f64>(), 0.0);
            let s32: Vec<f32> = scores.iter().map(|&s| s as f32).collect();
            let l32 = lambda_gradients(&s32, &labels, 10, 1.0f32);
            assert_eq!(l32.gradients.iter().sum::<f32>(), 0.0);
        }
    }

    #[test]
    fn finite_difference_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (si, sj) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let delta = rng.gen_range(0.05..1.0);
            let sigma = rng.gen_range(0.5..2.0);
            let h = 1e-5;
            let fd = (pair_surrogate(si + h, sj, delta, sigma) - pair_surrogate(si - h, sj, delta, sigma)) / (2.0 * h);
            let an = pair_lambda(si, sj, delta, sigma);
            assert!(((an - fd) / fd).abs() < 1e-6, "{an} {fd}");
        }
    }
}
