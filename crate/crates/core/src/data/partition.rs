use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n_clients: usize,
    /// Dirichlet concentration; small values give skewed splits.
    pub alpha: f64,
    pub total_items: usize,
    pub seed: u64,
}

fn dirichlet_sample(n: usize, alpha: f64, r: &mut rng::SimRng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated");
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(r)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.into_iter().map(|g| g / sum).collect()
    } else {
        // Every gamma draw underflowed; the limit puts all mass on one client.
        let hot = r.random_range(0..n);
        (0..n).map(|i| if i == hot { 1.0 } else { 0.0 }).collect()
    }
}

/// Item counts per client from a Dirichlet draw, rounded by largest
/// remainder and then lifted so every client holds at least one item.
pub fn dirichlet_partition(spec: &PartitionSpec) -> Result<Vec<usize>> {
    if spec.n_clients == 0 {
        return Err(Error::arg("n_clients", "must be at least 1"));
    }
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(Error::arg("alpha", format!("must be positive, got {}", spec.alpha)));
    }
    if spec.total_items < spec.n_clients {
        return Err(Error::arg(
            "total_items",
            format!("{} items cannot cover {} clients", spec.total_items, spec.n_clients),
        ));
    }
    let n = spec.n_clients;
    if n == 1 {
        return Ok(vec![spec.total_items]);
    }
    let mut r = rng::from_seed(spec.seed);
    let p = dirichlet_sample(n, spec.alpha, &mut r);
    let quotas: Vec<f64> = p.iter().map(|pi| pi * spec.total_items as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(spec.total_items.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let donor = (0..n).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
        counts[donor] -= 1;
        counts[empty] = 1;
    }
    Ok(counts)
}

/// `client_id,count` rows with a header.
pub fn partition_csv(counts: &[usize]) -> String {
    let mut s = String::from("client_id,count\n");
    for (i, c) in counts.iter().enumerate() {
        s.push_str(&format!("{i},{c}\n"));
    }
    s
}
