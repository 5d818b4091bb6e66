//! Logistic regression by Newton-Raphson (IRLS) with step-halving.

use nalgebra::{DMatrix, DVector};

use super::design::DesignMatrix;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const SCORE_TOLERANCE: f64 = 1e-8;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Any coefficient beyond this magnitude is treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Vec<f64>,
    /// Inverse observed information at `beta`.
    pub covariance: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood at the start and after every accepted step.
    pub log_likelihood_trace: Vec<f64>,
}

impl FitResult {
    pub fn se(&self, j: usize) -> f64 {
        self.covariance[(j, j)].sqrt()
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Ridge penalty `ridge/2 * |beta|^2` on every coefficient except the first.
#[derive(Debug, Clone, Copy)]
pub(crate) struct IrlsOptions {
    pub ridge: f64,
    pub max_iterations: usize,
    /// Report separation/non-convergence as errors.
    pub strict: bool,
}

pub(crate) struct IrlsFit {
    pub beta: DVector<f64>,
    pub information: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

fn objective(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = x * beta;
    let ll: f64 = eta.iter().zip(y).map(|(e, y)| y * e - log1p_exp(*e)).sum();
    let pen: f64 = beta.iter().skip(1).map(|b| b * b).sum::<f64>() * ridge / 2.0;
    ll - pen
}

/// Penalized score and information at `beta`.
fn derivatives(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, ridge: f64) -> (DVector<f64>, DMatrix<f64>) {
    let eta = x * beta;
    let n = x.nrows();
    let mut resid = DVector::zeros(n);
    let mut wx = x.clone();
    for i in 0..n {
        let p = sigmoid(eta[i]);
        resid[i] = y[i] - p;
        let w = p * (1.0 - p);
        wx.row_mut(i).scale_mut(w);
    }
    let mut score = x.tr_mul(&resid);
    let mut info = x.tr_mul(&wx);
    for j in 1..beta.len() {
        score[j] -= ridge * beta[j];
        info[(j, j)] += ridge;
    }
    (score, info)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn irls(x: &DMatrix<f64>, y: &[f64], start: Option<&DVector<f64>>, opts: IrlsOptions) -> Result<IrlsFit> {
    let p = x.ncols();
    let mut beta = start.cloned().unwrap_or_else(|| DVector::zeros(p));
    let mut ll = objective(x, y, &beta, opts.ridge);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let separation = |iterations: usize, message: String| Error::Separation { iterations, message };
    while iterations < opts.max_iterations {
        let (score, info) = derivatives(x, y, &beta, opts.ridge);
        if max_abs(&score) < SCORE_TOLERANCE {
            converged = true;
            break;
        }
        let Some(chol) = info.clone().cholesky() else {
            if opts.strict {
                return Err(separation(iterations, "information matrix is singular".into()));
            }
            break;
        };
        let delta = chol.solve(&score);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &delta * step;
            let ll_c = objective(x, y, &cand, opts.ridge);
            if ll_c >= ll {
                accepted = Some((cand, ll_c));
                break;
            }
            step /= 2.0;
        }
        iterations += 1;
        let Some((cand, ll_c)) = accepted else {
            // no ascent even for tiny steps: numerically at the optimum
            converged = max_abs(&delta) * step < STEP_TOLERANCE || max_abs(&score) < SCORE_TOLERANCE.sqrt();
            break;
        };
        let change = max_abs(&(&cand - &beta));
        beta = cand;
        ll = ll_c;
        trace.push(ll);
        if opts.strict && beta.iter().any(|b| b.abs() > DIVERGENCE_BOUND) {
            return Err(separation(
                iterations,
                format!("a coefficient exceeds {DIVERGENCE_BOUND} in magnitude"),
            ));
        }
        if change < STEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged && opts.strict {
        return Err(separation(iterations, "no convergence".into()));
    }
    let (_, information) = derivatives(x, y, &beta, opts.ridge);
    Ok(IrlsFit {
        beta,
        information,
        converged,
        iterations,
        trace,
    })
}

/// Maximum-likelihood fit from beta = 0. Separation, divergence and
/// non-convergence are errors.
pub fn fit_logistic(design: &DesignMatrix) -> Result<FitResult> {
    let (n, p) = (design.nrows(), design.ncols());
    if n <= p {
        return Err(Error::Precondition(format!("{n} rows for {p} columns")));
    }
    let fit = irls(
        &design.x,
        &design.y,
        None,
        IrlsOptions {
            ridge: 0.0,
            max_iterations: MAX_ITERATIONS,
            strict: true,
        },
    )?;
    let covariance = fit
        .information
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Separation {
            iterations: fit.iterations,
            message: "information matrix is singular at the optimum".into(),
        })?;
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(FitResult {
        beta: fit.beta.iter().copied().collect(),
        covariance,
        converged: fit.converged,
        iterations: fit.iterations,
        log_likelihood: *fit.trace.last().expect("trace starts non-empty"),
        log_likelihood_trace: fit.trace,
    })
}
