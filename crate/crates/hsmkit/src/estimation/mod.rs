//! Likelihood statistics, model-selection criteria and the shared optimizer.

pub mod chi2;
mod optimize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chi2::{chi2_cdf, chi2_pvalue};
pub use optimize::{minimize, Minimum, OptimizerConfig};
pub(crate) use optimize::{check_bounds, run_restart};

/// Floor applied to predicted probabilities inside logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `G² = −2·Σ n·ln(max(p, 1e-12))` over every cell of every table.
///
/// Cells with zero count contribute nothing, whatever their prediction.
pub fn g_squared<P, O>(predicted: &[P], observed: &[O]) -> Result<f64>
where
    P: AsRef<[f64]>,
    O: AsRef<[f64]>,
{
    if predicted.len() != observed.len() {
        return Err(Error::validation(format!(
            "{} predicted tables for {} observed tables",
            predicted.len(),
            observed.len()
        )));
    }
    let mut total = 0.0;
    for (t, (p, o)) in predicted.iter().zip(observed).enumerate() {
        let (p, o) = (p.as_ref(), o.as_ref());
        if p.len() != o.len() {
            return Err(Error::validation(format!(
                "table {t}: {} predicted cells for {} observed cells",
                p.len(),
                o.len()
            )));
        }
        for (&pi, &ni) in p.iter().zip(o) {
            if pi.is_nan() || pi < 0.0 {
                return Err(Error::validation(format!("table {t}: predicted probability {pi} is negative")));
            }
            if ni > 0.0 {
                total += ni * pi.max(PROBABILITY_FLOOR).ln();
            }
        }
    }
    Ok(-2.0 * total)
}

/// `G²` of a single table.
pub fn g_squared_table(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    g_squared(&[predicted], &[observed])
}

/// `BIC = G² + p·ln(n)`.
pub fn bic(g2: f64, n_params: usize, n_obs: f64) -> f64 {
    assert!(n_obs >= 1.0, "BIC needs at least one observation");
    g2 + n_params as f64 * n_obs.ln()
}

/// Outcome of fitting any model by maximum likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub g2: f64,
    pub bic: f64,
    pub n_params: usize,
    pub n_obs: f64,
    pub evaluations: u64,
    pub per_restart_g2: Vec<f64>,
}

impl FitResult {
    pub(crate) fn new(params: Vec<f64>, g2: f64, n_params: usize, n_obs: f64, evaluations: u64, per_restart_g2: Vec<f64>) -> Self {
        Self {
            params,
            g2,
            bic: bic(g2, n_params, n_obs),
            n_params,
            n_obs,
            evaluations,
            per_restart_g2,
        }
    }
}
