use rand::Rng;

use super::{Architecture, ParamVector};
use crate::rng;

/// SIREN initialization: the first layer draws from `U(-1/fan_in, 1/fan_in)`,
/// deeper layers from `U(-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0)`, and
/// every bias starts at zero.
pub fn siren_init(arch: &Architecture, seed: u64) -> ParamVector {
    let mut r = rng::from_seed(seed);
    let mut p = ParamVector::zeros(arch.param_count());
    for (l, shape) in arch.layers().iter().enumerate() {
        let fan_in = shape.cols as f64;
        let bound = if l == 0 {
            1.0 / fan_in
        } else {
            (6.0 / fan_in).sqrt() / arch.omega0()
        };
        for w in &mut p[shape.weight_range()] {
            *w = r.random_range(-bound..=bound);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_zero_bias() {
        let arch = Architecture::siren_uniform(2, 128, 6, 3, 30.0).unwrap();
        let a = siren_init(&arch, 0);
        let b = siren_init(&arch, 0);
        assert_eq!(a, b);
        assert_eq!(a.len(), arch.param_count());
        for shape in arch.layers() {
            assert!(a[shape.bias_range()].iter().all(|&v| v == 0.0));
        }
        assert_ne!(a, siren_init(&arch, 1));
    }

    #[test]
    fn first_layer_bound() {
        let arch = Architecture::siren(vec![2, 64, 1]).unwrap();
        let p = siren_init(&arch, 3);
        let first = arch.layers()[0];
        assert!(p[first.weight_range()].iter().all(|w| w.abs() <= 0.5));
    }

    #[test]
    fn hidden_layer_monte_carlo() {
        // [2, 128, 3]: layer 2 has fan_in 128. Collect >= 1e5 weights over seeds.
        let arch = Architecture::siren(vec![2, 128, 3]).unwrap();
        let shape = arch.layers()[1];
        let bound = (6.0f64 / 128.0).sqrt() / 30.0;
        let mut samples = Vec::new();
        let mut seed = 0;
        while samples.len() < 100_000 {
            samples.extend_from_slice(&siren_init(&arch, seed)[shape.weight_range()]);
            seed += 1;
        }
        let n = samples.len() as f64;
        let max = samples.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(max <= bound);
        let mean = samples.iter().sum::<f64>() / n;
        // Uniform(-b, b) has sd b/sqrt(3); the sample mean has sd b/sqrt(3n).
        let sigma = bound / (3.0 * n).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} vs 3 sigma {}", 3.0 * sigma);
    }
}
