use crate::{Error, Result};

/// `min(max(1 - N zeta / (R E M lambda_o |g_K|^2), 0), 1)`.
///
/// `gk_sq_norm` is the squared Euclidean norm of the query gradient at the
/// pre-adaptation parameters.
pub fn adaptive_gamma(
    zeta: f64,
    n_clients: usize,
    rounds: usize,
    outer_steps: usize,
    participants: usize,
    lambda_o: f64,
    gk_sq_norm: f64,
) -> Result<f64> {
    for (name, v) in [
        ("zeta", zeta),
        ("n_clients", n_clients as f64),
        ("rounds", rounds as f64),
        ("outer_steps", outer_steps as f64),
        ("participants", participants as f64),
        ("lambda_o", lambda_o),
        ("gk_sq_norm", gk_sq_norm),
    ] {
        if !(v > 0.0) {
            return Err(Error::arg(name, format!("must be positive, got {v}")));
        }
    }
    let denom = rounds as f64 * outer_steps as f64 * participants as f64 * lambda_o * gk_sq_norm;
    Ok((1.0 - n_clients as f64 * zeta / denom).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        // 1 - 50*0.1 / (1000*8*5*0.05*0.01) = 1 - 5/20
        let g = adaptive_gamma(0.1, 50, 1000, 8, 5, 0.05, 0.01).unwrap();
        assert!((g - 0.75).abs() < 1e-12);
    }

    #[test]
    fn clamps() {
        assert_eq!(adaptive_gamma(1e-300, 50, 1000, 8, 5, 0.05, 0.01).unwrap(), 1.0);
        assert_eq!(adaptive_gamma(1.0, 50, 1000, 8, 5, 0.05, 0.01).unwrap(), 0.0);
        assert_eq!(adaptive_gamma(1e9, 50, 1000, 8, 5, 0.05, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(adaptive_gamma(0.0, 50, 1000, 8, 5, 0.05, 0.01).is_err());
        assert!(adaptive_gamma(0.1, 0, 1000, 8, 5, 0.05, 0.01).is_err());
        assert!(adaptive_gamma(0.1, 50, 1000, 8, 5, 0.05, 0.0).is_err());
    }
}
