//! Per-SDoH association estimates under multiple imputation or complete cases.

use serde::{Deserialize, Serialize};

use super::cca::complete_cases;
use super::design::{adjustment_value, encode_design, ADJUSTMENT};
use super::logistic::fit_logistic;
use super::mice::{mice, MiceConfig};
use super::rubin::{quantile_975, rubin_pool};
use crate::corpus::SdohVariable;
use crate::derivation::{Level, StudyRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mice,
    Cca,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mice => "mice",
            Method::Cca => "cca",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "mice" => Ok(Method::Mice),
            "cca" => Ok(Method::Cca),
            other => Err(Error::Validation(format!("unknown analysis mode '{other}'"))),
        }
    }
}

/// One adjusted SDoH-outcome association. `estimate` and `se` are on the
/// log-odds scale; `or`, `ci_low` and `ci_high` on the odds-ratio scale.
/// A fit that separates or has degenerate data is kept with
/// `converged = false` and NaN statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub sdoh: SdohVariable,
    pub method: Method,
    pub n: usize,
    #[serde(deserialize_with = "nan_or_f64")]
    pub estimate: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub se: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub or: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub ci_low: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub ci_high: f64,
    pub m: usize,
    pub converged: bool,
}

/// NaN serializes to JSON `null`; read it back as NaN.
fn nan_or_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl AssociationResult {
    pub(crate) fn failed(sdoh: SdohVariable, method: Method, n: usize, m: usize) -> Self {
        AssociationResult {
            sdoh,
            method,
            n,
            estimate: f64::NAN,
            se: f64::NAN,
            or: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            m,
            converged: false,
        }
    }

    fn from_interval(sdoh: SdohVariable, method: Method, n: usize, m: usize, estimate: f64, se: f64, lo: f64, hi: f64) -> Self {
        AssociationResult {
            sdoh,
            method,
            n,
            estimate,
            se,
            or: estimate.exp(),
            ci_low: lo.exp(),
            ci_high: hi.exp(),
            m,
            converged: true,
        }
    }

    /// Interval width on the log-odds scale.
    pub fn log_ci_width(&self) -> f64 {
        self.ci_high.ln() - self.ci_low.ln()
    }
}

/// Data too thin to fit: no rows, or a constant outcome or SDoH indicator.
fn degenerate(rows: &[StudyRow], sdoh: SdohVariable) -> bool {
    let constant = |f: &dyn Fn(&StudyRow) -> bool| rows.iter().all(|r| f(r)) || !rows.iter().any(|r| f(r));
    rows.is_empty() || constant(&|r| r.outcome) || constant(&|r| r.profile.get(sdoh) == Level::Positive)
}

/// Folds adjustment levels whose rows all share one outcome value into the
/// variable's modal level. Such levels separate the outcome and would make
/// the fit diverge although the SDoH coefficient is identifiable.
pub fn merge_separating_levels(rows: &[StudyRow]) -> Vec<StudyRow> {
    let mut out = rows.to_vec();
    for (name, declared) in ADJUSTMENT {
        let mut tally: Vec<(usize, usize)> = vec![(0, 0); declared.len()];
        for r in rows {
            if let Some(i) = adjustment_value(r, name).and_then(|v| declared.iter().position(|l| *l == v)) {
                tally[i].0 += 1;
                tally[i].1 += r.outcome as usize;
            }
        }
        let modal = (0..declared.len()).fold(0, |m, i| if tally[i].0 > tally[m].0 { i } else { m });
        for (i, (n, events)) in tally.iter().enumerate() {
            if i != modal && *n > 0 && (*events == 0 || events == n) {
                log::debug!("{name}={} separates the outcome; merged into {}", declared[i], declared[modal]);
                for r in out.iter_mut() {
                    let field = match *name {
                        "gender" => &mut r.gender,
                        "ethnicity" => &mut r.ethnicity,
                        _ => &mut r.religion,
                    };
                    if field.as_deref() == Some(declared[i]) {
                        *field = Some(declared[modal].to_string());
                    }
                }
            }
        }
    }
    out
}

/// Fits `(slope, variance)` of the SDoH indicator; `None` on separation.
fn slope(rows: &[StudyRow], sdoh: SdohVariable) -> Result<Option<(f64, f64)>> {
    if degenerate(rows, sdoh) {
        return Ok(None);
    }
    let design = encode_design(&merge_separating_levels(rows), sdoh)?;
    match fit_logistic(&design) {
        Ok(fit) => Ok(Some((fit.beta[1], fit.covariance[(1, 1)]))),
        Err(e) if e.is_numeric() => {
            log::warn!("{sdoh}: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn associate_cca(rows: &[StudyRow], sdoh: SdohVariable) -> Result<AssociationResult> {
    let cc = complete_cases(rows, sdoh);
    Ok(match slope(&cc, sdoh)? {
        Some((b, v)) => {
            let se = v.sqrt();
            let z = quantile_975(f64::INFINITY);
            AssociationResult::from_interval(sdoh, Method::Cca, cc.len(), 1, b, se, b - z * se, b + z * se)
        }
        None => AssociationResult::failed(sdoh, Method::Cca, cc.len(), 1),
    })
}

/// Pools the per-imputation fits of every SDoH over already completed tables.
pub fn associate_imputed(tables: &[Vec<StudyRow>], sdoh: SdohVariable) -> Result<AssociationResult> {
    let n = tables.first().map_or(0, Vec::len);
    let mut fits = Vec::with_capacity(tables.len());
    for table in tables {
        match slope(table, sdoh)? {
            Some(f) => fits.push(f),
            None => return Ok(AssociationResult::failed(sdoh, Method::Mice, n, tables.len())),
        }
    }
    let pooled = rubin_pool(&fits)?;
    Ok(AssociationResult::from_interval(
        sdoh,
        Method::Mice,
        n,
        pooled.m,
        pooled.estimate,
        pooled.total.sqrt(),
        pooled.ci_low,
        pooled.ci_high,
    ))
}

/// Associations for all five SDoH under each requested mode; MICE runs once
/// and its completed tables serve every SDoH.
pub fn associate(rows: &[StudyRow], methods: &[Method], config: &MiceConfig) -> Result<Vec<AssociationResult>> {
    let mut out = Vec::new();
    for method in methods {
        match method {
            Method::Mice => {
                if config.m < 2 {
                    return Err(Error::Config("multiple imputation needs m >= 2".into()));
                }
                let tables = mice(rows, config)?;
                for sdoh in SdohVariable::ALL {
                    out.push(associate_imputed(&tables, *sdoh).map_err(|e| e.context(format!("{sdoh} (mice)")))?);
                }
            }
            Method::Cca => {
                for sdoh in SdohVariable::ALL {
                    out.push(associate_cca(rows, *sdoh).map_err(|e| e.context(format!("{sdoh} (cca)")))?);
                }
            }
        }
    }
    Ok(out)
}

pub const ASSOCIATION_CSV_HEADER: &[&str] =
    &["sdoh", "method", "n", "estimate", "se", "or", "ci_low", "ci_high", "m", "converged"];

pub fn write_associations_csv<W: std::io::Write>(rows: &[AssociationResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ASSOCIATION_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sdoh.as_str().to_string(),
            r.method.as_str().to_string(),
            r.n.to_string(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.or.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.m.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};
    use crate::derivation::{study_rows, CodeStatusLexicon};

    #[test]
    fn both_modes_on_synthetic_rows() {
        let c = generate_synthetic(&SynthConfig::institution_b(600, 8)).unwrap();
        let rows = study_rows(&c.records, CodeStatusLexicon::default_lexicon());
        let cfg = MiceConfig { m: 3, cycles: 3, ..MiceConfig::default() };
        let res = associate(&rows, &[Method::Mice, Method::Cca], &cfg).unwrap();
        assert_eq!(res.len(), 10);
        for r in &res {
            assert!(r.converged, "{r:?}");
            assert!(r.ci_low <= r.or && r.or <= r.ci_high);
        }
        assert!(res[..5].iter().all(|r| r.n == 600 && r.m == 3));
        assert!(res[5..].iter().all(|r| r.n < 600 && r.m == 1));
        let mut buf = Vec::new();
        write_associations_csv(&res, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }

    #[test]
    fn degenerate_data_is_flagged_not_fatal() {
        let c = generate_synthetic(&SynthConfig::institution_b(100, 8)).unwrap();
        let mut rows = study_rows(&c.records, CodeStatusLexicon::default_lexicon());
        for r in &mut rows {
            r.profile.set(SdohVariable::Drug, Level::Positive);
        }
        let r = associate_cca(&rows, SdohVariable::Drug).unwrap();
        assert!(!r.converged && r.estimate.is_nan());
    }
}
