//! Pooling of multiply-imputed estimates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub estimate: f64,
    pub within: f64,
    pub between: f64,
    pub total: f64,
    /// `f64::INFINITY` when the between-imputation variance is zero.
    pub df: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub m: usize,
}

/// Two-sided 95% quantile: Student-t with `df` degrees of freedom, normal for infinite df.
pub fn quantile_975(df: f64) -> f64 {
    if df.is_finite() {
        StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(0.975)
    } else {
        Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.975)
    }
}

/// Combines per-imputation `(estimate, variance)` pairs.
pub fn rubin_pool(fits: &[(f64, f64)]) -> Result<PooledResult> {
    let m = fits.len();
    if m < 2 {
        return Err(Error::Pooling(format!("need at least 2 fits, got {m}")));
    }
    if fits.iter().any(|(q, u)| !q.is_finite() || !u.is_finite() || *u < 0.0) {
        return Err(Error::Pooling("estimates must be finite with non-negative variance".into()));
    }
    let mf = m as f64;
    let estimate = fits.iter().map(|f| f.0).sum::<f64>() / mf;
    let within = fits.iter().map(|f| f.1).sum::<f64>() / mf;
    let between = fits.iter().map(|f| (f.0 - estimate).powi(2)).sum::<f64>() / (mf - 1.0);
    let inflated = (1.0 + 1.0 / mf) * between;
    let total = within + inflated;
    let df = if between > 0.0 {
        (mf - 1.0) * (1.0 + within / inflated).powi(2)
    } else {
        f64::INFINITY
    };
    let half = quantile_975(df) * total.sqrt();
    Ok(PooledResult {
        estimate,
        within,
        between,
        total,
        df,
        ci_low: estimate - half,
        ci_high: estimate + half,
        m,
    })
}
