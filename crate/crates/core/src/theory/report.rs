use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of one proposition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub proposition: u8,
    /// Step sizes tested: `lambda_i` for proposition 1, `lambda_o` otherwise.
    pub lambdas: Vec<f64>,
    /// `gamma` per row (proposition 3); zeros otherwise.
    pub gammas: Vec<f64>,
    /// Approximation error (proposition 1) or measured loss change.
    pub errors: Vec<f64>,
    /// `dL / (-lambda_o ||g_K||²)` per row; NaN where undefined.
    pub ratios: Vec<f64>,
    /// Log-log slope (proposition 1).
    pub slope: Option<f64>,
    /// Goodness of fit against the first-order prediction (proposition 3).
    pub r_squared: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

impl ScalingReport {
    /// CSV with columns `lambda,error,ratio,gamma`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,error,ratio,gamma\n");
        for i in 0..self.errors.len() {
            let ratio = if self.ratios[i].is_finite() { self.ratios[i].to_string() } else { String::new() };
            s.push_str(&format!("{},{},{},{}\n", self.lambdas[i], self.errors[i], ratio, self.gammas[i]));
        }
        s
    }
}

impl fmt::Display for ScalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "proposition {}: {} ({})",
            self.proposition,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )?;
        for i in 0..self.errors.len() {
            write!(f, "  lambda={:<10.3e} error={:<12.4e}", self.lambdas[i], self.errors[i])?;
            if self.ratios[i].is_finite() {
                write!(f, " ratio={:.5}", self.ratios[i])?;
            }
            if self.proposition == 3 {
                write!(f, " gamma={}", self.gammas[i])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
