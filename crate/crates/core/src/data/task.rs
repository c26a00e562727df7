use rand::seq::{index, SliceRandom};

use super::Signal;
use crate::nn::Batch;
use crate::rng::SimRng;
use crate::{rng, Error, Result};

/// One task: a signal split into a support set and a query set.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub task_id: String,
    pub support: Batch,
    pub query: Batch,
    /// Grid dims of the originating signal.
    pub dims: Vec<usize>,
    /// Grid indices of the support and query rows, in batch order.
    pub support_indices: Vec<usize>,
    pub query_indices: Vec<usize>,
}

/// Shuffle the grid points with `seed` and split off the first
/// `round(fraction * n)` as the support set.
pub fn split_support_query(signal: &Signal, support_fraction: f64, seed: u64) -> Result<TaskData> {
    let n = signal.num_points();
    if n < 2 {
        return Err(Error::arg("signal", "need at least 2 samples to split"));
    }
    if !(support_fraction > 0.0 && support_fraction < 1.0) {
        return Err(Error::arg("support_fraction", format!("{support_fraction} not in (0, 1)")));
    }
    let n_support = (support_fraction * n as f64).round() as usize;
    if n_support == 0 || n_support == n {
        return Err(Error::arg(
            "support_fraction",
            format!("{support_fraction} of {n} samples leaves one side empty"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::from_seed(seed));
    let full = signal.to_batch();
    let support_indices = order[..n_support].to_vec();
    let query_indices = order[n_support..].to_vec();
    Ok(TaskData {
        task_id: signal.source_tag.clone(),
        support: full.select(&support_indices),
        query: full.select(&query_indices),
        dims: signal.dims().to_vec(),
        support_indices,
        query_indices,
    })
}

/// Uniform draw without replacement; the whole batch when `size >= len`.
pub fn sample_minibatch(batch: &Batch, size: usize, rng: &mut SimRng) -> Batch {
    assert!(size >= 1, "minibatch size must be positive");
    if size >= batch.len() {
        return batch.clone();
    }
    let idx = index::sample(rng, batch.len(), size).into_vec();
    batch.select(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic_signal, SignalKind};
    use std::collections::HashSet;

    fn four_sample_signal() -> Signal {
        Signal::new(vec![2, 2], 1, vec![-1.0, -0.5, 0.5, 1.0], "four").unwrap()
    }

    #[test]
    fn half_split_is_disjoint_and_exhaustive() {
        let t = split_support_query(&four_sample_signal(), 0.5, 1).unwrap();
        assert_eq!(t.support.len(), 2);
        assert_eq!(t.query.len(), 2);
        let s: HashSet<usize> = t.support_indices.iter().copied().collect();
        let q: HashSet<usize> = t.query_indices.iter().copied().collect();
        assert!(s.is_disjoint(&q));
        assert_eq!(s.union(&q).count(), 4);
    }

    #[test]
    fn union_covers_grid_coordinates() {
        let sig = gen_synthetic_signal(SignalKind::Rings, &[5, 4], 1, 3).unwrap();
        let t = split_support_query(&sig, 0.3, 9).unwrap();
        let key = |c: &[f64]| (c[0].to_bits(), c[1].to_bits());
        let mut seen: HashSet<_> = (0..t.support.len()).map(|i| key(t.support.coord(i))).collect();
        for i in 0..t.query.len() {
            assert!(seen.insert(key(t.query.coord(i))), "duplicate coordinate across sets");
        }
        let full = sig.to_batch();
        assert_eq!(seen.len(), full.len());
        assert!((0..full.len()).all(|i| seen.contains(&key(full.coord(i)))));
    }

    #[test]
    fn same_seed_same_split() {
        let sig = gen_synthetic_signal(SignalKind::Gabor, &[6, 6], 1, 0).unwrap();
        assert_eq!(split_support_query(&sig, 0.5, 4).unwrap(), split_support_query(&sig, 0.5, 4).unwrap());
    }

    #[test]
    fn degenerate_fraction() {
        let sig = four_sample_signal();
        assert!(split_support_query(&sig, 0.05, 0).is_err());
        assert!(split_support_query(&sig, 0.95, 0).is_err());
        assert!(split_support_query(&sig, 1.0, 0).is_err());
    }

    #[test]
    fn oversize_minibatch_is_whole_batch() {
        let b = four_sample_signal().to_batch();
        let mut r = rng::from_seed(0);
        assert_eq!(sample_minibatch(&b, 10, &mut r), b);
    }

    #[test]
    fn minibatch_rows_distinct() {
        let b = gen_synthetic_signal(SignalKind::Gabor, &[8, 8], 1, 0).unwrap().to_batch();
        let mut r = rng::from_seed(3);
        let m = sample_minibatch(&b, 20, &mut r);
        let set: HashSet<_> = (0..m.len()).map(|i| (m.coord(i)[0].to_bits(), m.coord(i)[1].to_bits())).collect();
        assert_eq!(set.len(), 20);
    }

    #[test]
    fn minibatch_uniformity() {
        let b = Batch::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0], 1, 1).unwrap();
        let mut r = rng::from_seed(42);
        let mut counts = [0usize; 3];
        let draws = 3000;
        for _ in 0..draws {
            let m = sample_minibatch(&b, 1, &mut r);
            counts[m.coord(0)[0] as usize] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 5.0 * sigma, "{counts:?}");
        }
    }
}
