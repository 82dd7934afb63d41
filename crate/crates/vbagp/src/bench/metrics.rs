//! Comparison metrics: mean relative error against a reference probability
//! and the efficiency ratio against a plain Monte Carlo estimation of the
//! same accuracy.

use crate::error::{Error, Result};

/// Mean absolute relative error of the estimates against the reference.
pub fn metric_e_r(estimates: &[f64], reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::Domain(format!("reference probability {reference} must be positive")));
    }
    if estimates.is_empty() {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    Ok(estimates.iter().map(|&p| (p - reference).abs() / reference).sum::<f64>()
        / estimates.len() as f64)
}

/// Efficiency against plain Monte Carlo: the sample count a direct MC run
/// would need for the same COV, divided by the calls actually spent.
pub fn metric_nu_mc(n_call: f64, cov_pf: f64, pf: f64) -> Result<f64> {
    if !(cov_pf > 0.0) || !(pf > 0.0 && pf < 1.0) || !(n_call >= 1.0) {
        return Err(Error::Domain(format!(
            "efficiency needs cov > 0, pf in (0,1), calls >= 1; got {cov_pf}, {pf}, {n_call}"
        )));
    }
    Ok(((1.0 - pf) / (pf * cov_pf * cov_pf)) / n_call)
}
