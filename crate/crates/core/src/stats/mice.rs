//! Multiple imputation by chained equations with predictive mean matching.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{irls, IrlsOptions};
use crate::corpus::{levels, SdohVariable};
use crate::derivation::{Level, StudyRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceConfig {
    pub m: usize,
    pub cycles: usize,
    /// Donor pool size.
    pub k: usize,
    pub seed: u64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        MiceConfig {
            m: 10,
            cycles: 10,
            k: 5,
            seed: 0,
        }
    }
}

/// Ridge for the one-vs-rest logistic imputation models; keeps them finite
/// under separation.
const LOGISTIC_RIDGE: f64 = 1.0;
const LINEAR_RIDGE: f64 = 1e-4;
const IMPUTATION_IRLS_ITERATIONS: usize = 25;

const SDOH_LEVELS: &[&str] = &["positive", "rest"];

#[derive(Debug, Clone, Copy)]
enum Kind {
    Continuous,
    Categorical(&'static [&'static str]),
}

/// Imputed variables in sweep order.
const VARIABLES: &[(&str, Kind)] = &[
    ("age", Kind::Continuous),
    ("gender", Kind::Categorical(levels::GENDER)),
    ("ethnicity", Kind::Categorical(levels::ETHNICITY)),
    ("religion", Kind::Categorical(levels::RELIGION)),
    ("marital_status", Kind::Categorical(levels::MARITAL_STATUS)),
    ("admission_location", Kind::Categorical(levels::ADMISSION_LOCATION)),
    ("insurance", Kind::Categorical(levels::INSURANCE)),
    ("admission_type", Kind::Categorical(levels::ADMISSION_TYPE)),
    ("living_status", Kind::Categorical(SDOH_LEVELS)),
    ("employment", Kind::Categorical(SDOH_LEVELS)),
    ("alcohol", Kind::Categorical(SDOH_LEVELS)),
    ("drug", Kind::Categorical(SDOH_LEVELS)),
    ("tobacco", Kind::Categorical(SDOH_LEVELS)),
];

fn sdoh_of(name: &str) -> Option<SdohVariable> {
    SdohVariable::ALL.iter().copied().find(|v| v.as_str() == name)
}

fn string_field<'a>(row: &'a StudyRow, name: &str) -> &'a Option<String> {
    match name {
        "gender" => &row.gender,
        "ethnicity" => &row.ethnicity,
        "religion" => &row.religion,
        "marital_status" => &row.marital_status,
        "admission_location" => &row.admission_location,
        "insurance" => &row.insurance,
        "admission_type" => &row.admission_type,
        _ => unreachable!("not a string column: {name}"),
    }
}

fn string_field_mut<'a>(row: &'a mut StudyRow, name: &str) -> &'a mut Option<String> {
    match name {
        "gender" => &mut row.gender,
        "ethnicity" => &mut row.ethnicity,
        "religion" => &mut row.religion,
        "marital_status" => &mut row.marital_status,
        "admission_location" => &mut row.admission_location,
        "insurance" => &mut row.insurance,
        "admission_type" => &mut row.admission_type,
        _ => unreachable!("not a string column: {name}"),
    }
}

/// Column values as reals; categorical values are level indices.
fn read_column(rows: &[StudyRow], name: &str, kind: Kind) -> Result<Vec<Option<f64>>> {
    rows.iter()
        .map(|r| match kind {
            Kind::Continuous => Ok(r.age),
            Kind::Categorical(levels) => {
                let value = match sdoh_of(name) {
                    Some(v) => match r.profile.get(v) {
                        Level::Missing => None,
                        l => Some(l.as_str()),
                    },
                    None => string_field(r, name).as_deref(),
                };
                value
                    .map(|v| {
                        levels
                            .iter()
                            .position(|l| *l == v)
                            .map(|i| i as f64)
                            .ok_or_else(|| Error::Encoding(format!("unseen {name} level '{v}'")))
                    })
                    .transpose()
            }
        })
        .collect()
}

fn write_column(rows: &mut [StudyRow], name: &str, kind: Kind, values: &[f64]) {
    for (r, v) in rows.iter_mut().zip(values) {
        match kind {
            Kind::Continuous => r.age = Some(*v),
            Kind::Categorical(levels) => {
                let level = levels[*v as usize];
                match sdoh_of(name) {
                    Some(s) => r.profile.set(s, Level::parse(level).expect("SDoH level")),
                    None => *string_field_mut(r, name) = Some(level.to_string()),
                }
            }
        }
    }
}

/// Donor selection: the `k` donors whose prediction is nearest `target_pred`,
/// plus every donor tied with the k-th distance; one is drawn uniformly.
pub fn pmm_draw<T: Clone, R: Rng>(
    observed_preds: &[f64],
    observed_values: &[T],
    target_pred: f64,
    k: usize,
    rng: &mut R,
) -> Result<T> {
    if observed_preds.len() != observed_values.len() {
        return Err(Error::Input("donor predictions and values differ in length".into()));
    }
    if k == 0 || observed_preds.len() < k {
        return Err(Error::DonorPool {
            available: observed_preds.len(),
            required: k.max(1),
        });
    }
    let dist: Vec<f64> = observed_preds.iter().map(|p| (p - target_pred).abs()).collect();
    let pool = pool_from_distances(&dist, k);
    Ok(observed_values[pool[rng.gen_range(0..pool.len())]].clone())
}

/// Indices (ascending) of the k nearest plus ties at the k-th distance.
fn pool_from_distances(dist: &[f64], k: usize) -> Vec<usize> {
    let mut sorted = dist.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
    let kth = *kth;
    (0..dist.len()).filter(|&i| dist[i] <= kth).collect()
}

/// Scalar donor predictions sorted once for repeated nearest-neighbour
/// queries; gives the same pool as [`pmm_draw`].
pub(crate) struct DonorIndex {
    /// (prediction, donor index) ascending.
    sorted: Vec<(f64, usize)>,
}

impl DonorIndex {
    pub(crate) fn new(preds: &[f64]) -> Self {
        let mut sorted: Vec<(f64, usize)> = preds.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        DonorIndex { sorted }
    }

    pub(crate) fn pool(&self, target: f64, k: usize) -> Vec<usize> {
        let s = &self.sorted;
        let d = |i: usize| (s[i].0 - target).abs();
        let pos = s.partition_point(|e| e.0 < target);
        // walk outwards collecting k nearest
        let (mut lo, mut hi) = (pos, pos);
        let mut kth = 0.0f64;
        for _ in 0..k {
            let take_lo = match (lo > 0, hi < s.len()) {
                (true, true) => d(lo - 1) <= d(hi),
                (true, false) => true,
                (false, _) => false,
            };
            if take_lo {
                lo -= 1;
                kth = kth.max(d(lo));
            } else {
                kth = kth.max(d(hi));
                hi += 1;
            }
        }
        while lo > 0 && d(lo - 1) <= kth {
            lo -= 1;
        }
        while hi < s.len() && d(hi) <= kth {
            hi += 1;
        }
        let mut pool: Vec<usize> = s[lo..hi].iter().filter(|e| (e.0 - target).abs() <= kth).map(|e| e.1).collect();
        pool.sort_unstable();
        pool
    }
}

/// Multi-score donor pool by squared Euclidean distance.
fn vector_pool(donor_scores: &[Vec<f64>], target: &[f64], k: usize) -> Vec<usize> {
    let dist: Vec<f64> = donor_scores
        .iter()
        .map(|s| s.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    pool_from_distances(&dist, k)
}

/// Predictor matrix for imputing column `target`: intercept, outcome, then
/// every other column (continuous standardized, categorical as dummies
/// against the modal level).
fn predictors(columns: &[Vec<f64>], kinds: &[Kind], outcome: &[f64], target: usize) -> DMatrix<f64> {
    let n = outcome.len();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n], outcome.to_vec()];
    for (j, (values, kind)) in columns.iter().zip(kinds).enumerate() {
        if j == target {
            continue;
        }
        match kind {
            Kind::Continuous => {
                let mean = values.iter().sum::<f64>() / n as f64;
                let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                if sd > 0.0 {
                    cols.push(values.iter().map(|v| (v - mean) / sd).collect());
                }
            }
            Kind::Categorical(levels) => {
                let mut counts = vec![0usize; levels.len()];
                for v in values {
                    counts[*v as usize] += 1;
                }
                let modal = (0..levels.len()).fold(0, |m, i| if counts[i] > counts[m] { i } else { m });
                for (l, c) in counts.iter().enumerate() {
                    if l != modal && *c > 0 {
                        cols.push(values.iter().map(|v| if *v as usize == l { 1.0 } else { 0.0 }).collect());
                    }
                }
            }
        }
    }
    if cols[1].iter().all(|v| *v == cols[1][0]) {
        cols.remove(1);
    }
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

fn standard_normal_vector<R: Rng>(p: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)))
}

/// `beta_hat + L z` where `L L' = covariance`.
fn draw_coefficients<R: Rng>(beta_hat: &DVector<f64>, covariance: DMatrix<f64>, scale: f64, rng: &mut R) -> Result<DVector<f64>> {
    let chol = covariance
        .cholesky()
        .ok_or_else(|| Error::Imputation("imputation model covariance is not positive definite".into()))?;
    let z = standard_normal_vector(beta_hat.len(), rng);
    Ok(beta_hat + chol.l() * z * scale)
}

/// Donor and target predictions for a continuous column (Bayesian linear
/// regression draw, type-1 matching).
fn linear_scores<R: Rng>(
    x: &DMatrix<f64>,
    y: &[f64],
    obs: &[usize],
    mis: &[usize],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xo = select_rows(x, obs);
    let yo = DVector::from_iterator(obs.len(), obs.iter().map(|&i| y[i]));
    let p = x.ncols();
    let mut a = xo.tr_mul(&xo);
    for j in 1..p {
        a[(j, j)] += LINEAR_RIDGE;
    }
    let a_inv = a
        .cholesky()
        .ok_or_else(|| Error::Imputation("linear imputation model is singular".into()))?
        .inverse();
    let beta_hat = &a_inv * xo.tr_mul(&yo);
    let resid = &yo - &xo * &beta_hat;
    let df = obs.len().saturating_sub(p).max(1) as f64;
    let chi: f64 = ChiSquared::new(df).expect("df > 0").sample(rng);
    let sigma_star = (resid.norm_squared() / chi).sqrt();
    let beta_star = draw_coefficients(&beta_hat, a_inv, sigma_star, rng)?;
    let donors = (&xo * &beta_hat).iter().copied().collect();
    let xm = select_rows(x, mis);
    let targets = (&xm * &beta_star).iter().copied().collect();
    Ok((donors, targets))
}

/// One-vs-rest logistic linear predictors for a categorical column: one
/// score per level beyond the first observed one (a single score for two levels).
#[allow(clippy::too_many_arguments)]
fn categorical_scores<R: Rng>(
    x: &DMatrix<f64>,
    y: &[f64],
    obs: &[usize],
    mis: &[usize],
    warm: &mut Vec<Option<DVector<f64>>>,
    n_levels: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let xo = select_rows(x, obs);
    let xm = select_rows(x, mis);
    let mut present: Vec<usize> = obs.iter().map(|&i| y[i] as usize).collect();
    present.sort_unstable();
    present.dedup();
    let scored: &[usize] = if present.len() <= 2 { &present[present.len().min(1)..] } else { &present };
    let mut donors = vec![Vec::with_capacity(scored.len()); obs.len()];
    let mut targets = vec![Vec::with_capacity(scored.len()); mis.len()];
    warm.resize(n_levels, None);
    for &level in scored {
        let yl: Vec<f64> = obs.iter().map(|&i| if y[i] as usize == level { 1.0 } else { 0.0 }).collect();
        let start = warm[level].as_ref().filter(|b| b.len() == x.ncols());
        let fit = irls(
            &xo,
            &yl,
            start,
            IrlsOptions {
                ridge: LOGISTIC_RIDGE,
                max_iterations: IMPUTATION_IRLS_ITERATIONS,
                strict: false,
            },
        )?;
        let cov = fit
            .information
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Imputation("logistic imputation model is singular".into()))?
            .inverse();
        let beta_star = draw_coefficients(&fit.beta, cov, 1.0, rng)?;
        for (d, s) in donors.iter_mut().zip((&xo * &fit.beta).iter()) {
            d.push(*s);
        }
        for (t, s) in targets.iter_mut().zip((&xm * &beta_star).iter()) {
            t.push(*s);
        }
        warm[level] = Some(fit.beta);
    }
    Ok((donors, targets))
}

struct Prepared {
    kinds: Vec<Kind>,
    names: Vec<&'static str>,
    observed: Vec<Vec<Option<f64>>>,
    outcome: Vec<f64>,
}

fn prepare(rows: &[StudyRow], k: usize) -> Result<Prepared> {
    let mut observed = Vec::new();
    for (name, kind) in VARIABLES {
        let col = read_column(rows, name, *kind)?;
        let n_obs = col.iter().flatten().count();
        if n_obs < col.len() {
            if n_obs == 0 {
                return Err(Error::Imputation(format!("{name} is missing in every row")));
            }
            if n_obs < k {
                return Err(Error::DonorPool {
                    available: n_obs,
                    required: k,
                });
            }
        }
        observed.push(col);
    }
    Ok(Prepared {
        kinds: VARIABLES.iter().map(|v| v.1).collect(),
        names: VARIABLES.iter().map(|v| v.0).collect(),
        observed,
        outcome: rows.iter().map(|r| if r.outcome { 1.0 } else { 0.0 }).collect(),
    })
}

fn run_chain(rows: &[StudyRow], prep: &Prepared, config: &MiceConfig, chain: usize) -> Result<Vec<StudyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let incomplete: Vec<usize> = (0..prep.observed.len())
        .filter(|&j| prep.observed[j].iter().any(Option::is_none))
        .collect();

    // start from random draws out of each variable's observed values
    let mut current: Vec<Vec<f64>> = Vec::with_capacity(prep.observed.len());
    for col in &prep.observed {
        let pool: Vec<f64> = col.iter().flatten().copied().collect();
        current.push(
            col.iter()
                .map(|v| v.unwrap_or_else(|| pool[rng.gen_range(0..pool.len())]))
                .collect(),
        );
    }

    let mut warm: Vec<Vec<Option<DVector<f64>>>> = vec![Vec::new(); prep.observed.len()];
    for _ in 0..config.cycles {
        for &j in &incomplete {
            let obs: Vec<usize> = (0..rows.len()).filter(|&i| prep.observed[j][i].is_some()).collect();
            let mis: Vec<usize> = (0..rows.len()).filter(|&i| prep.observed[j][i].is_none()).collect();
            let x = predictors(&current, &prep.kinds, &prep.outcome, j);
            let y = &current[j];
            let donor_values: Vec<f64> = obs.iter().map(|&i| y[i]).collect();
            let imputed: Vec<f64> = match prep.kinds[j] {
                Kind::Continuous => {
                    let (donors, targets) = linear_scores(&x, y, &obs, &mis, &mut rng)?;
                    let index = DonorIndex::new(&donors);
                    targets
                        .iter()
                        .map(|t| {
                            let pool = index.pool(*t, config.k);
                            donor_values[pool[rng.gen_range(0..pool.len())]]
                        })
                        .collect()
                }
                Kind::Categorical(levels) => {
                    let (donors, targets) =
                        categorical_scores(&x, y, &obs, &mis, &mut warm[j], levels.len(), &mut rng)?;
                    if donors.first().map_or(true, |d| d.len() == 1) {
                        let flat: Vec<f64> = donors.iter().map(|d| d.first().copied().unwrap_or(0.0)).collect();
                        let index = DonorIndex::new(&flat);
                        targets
                            .iter()
                            .map(|t| {
                                let pool = index.pool(t.first().copied().unwrap_or(0.0), config.k);
                                donor_values[pool[rng.gen_range(0..pool.len())]]
                            })
                            .collect()
                    } else {
                        targets
                            .iter()
                            .map(|t| {
                                let pool = vector_pool(&donors, t, config.k);
                                donor_values[pool[rng.gen_range(0..pool.len())]]
                            })
                            .collect()
                    }
                }
            };
            for (&i, v) in mis.iter().zip(imputed) {
                current[j][i] = v;
            }
        }
    }

    let mut out = rows.to_vec();
    for &j in &incomplete {
        write_column(&mut out, prep.names[j], prep.kinds[j], &current[j]);
    }
    Ok(out)
}

/// `m` completed copies of `rows`. Chains are independent and seeded by
/// `(seed, chain index)`, so the result does not depend on scheduling.
pub fn mice(rows: &[StudyRow], config: &MiceConfig) -> Result<Vec<Vec<StudyRow>>> {
    if config.m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    if config.k == 0 {
        return Err(Error::Config("donor pool size k must be at least 1".into()));
    }
    let prep = prepare(rows, config.k)?;
    (0..config.m)
        .into_par_iter()
        .map(|chain| run_chain(rows, &prep, config, chain))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};
    use crate::derivation::{study_rows, CodeStatusLexicon};

    fn rows(n: usize, seed: u64) -> Vec<StudyRow> {
        let c = generate_synthetic(&SynthConfig::institution_b(n, seed)).unwrap();
        study_rows(&c.records, CodeStatusLexicon::default_lexicon())
    }

    #[test]
    fn pmm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(pmm_draw(&[0.1, 0.5, 0.9], &["A", "B", "C"], 0.5, 1, &mut rng).unwrap(), "B");
        for _ in 0..200 {
            let v = pmm_draw(&[0.1, 0.2, 0.9], &["A", "B", "C"], 0.15, 2, &mut rng).unwrap();
            assert!(v == "A" || v == "B");
        }
        assert!(matches!(
            pmm_draw(&[0.1], &["A"], 0.0, 2, &mut rng),
            Err(Error::DonorPool { available: 1, required: 2 })
        ));
    }

    #[test]
    fn ties_enter_the_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[pmm_draw(&[0.5; 4], &[0, 1, 2, 3], 0.1, 1, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.05);
        }
    }

    #[test]
    fn donor_index_matches_linear_scan() {
        let preds = [0.3, 0.1, 0.3, 0.7, -0.2, 0.3, 0.9, 0.05];
        let index = DonorIndex::new(&preds);
        for target in [-1.0, 0.0, 0.1, 0.3, 0.31, 0.5, 2.0] {
            for k in 1..=preds.len() {
                let dist: Vec<f64> = preds.iter().map(|p| (p - target).abs()).collect();
                assert_eq!(index.pool(target, k), pool_from_distances(&dist, k), "t={target} k={k}");
            }
        }
    }

    #[test]
    fn complete_data_is_unchanged() {
        let mut data = rows(120, 3);
        for r in &mut data {
            for v in SdohVariable::ALL {
                if r.profile.get(*v).is_missing() {
                    r.profile.set(*v, Level::Rest);
                }
            }
            r.marital_status.get_or_insert("Married".into());
            r.admission_location.get_or_insert("Emergency room".into());
            r.insurance.get_or_insert("Medicare".into());
        }
        let out = mice(&data, &MiceConfig { m: 3, cycles: 2, ..MiceConfig::default() }).unwrap();
        assert!(out.iter().all(|t| *t == data));
    }

    #[test]
    fn deterministic_and_donor_valued() {
        let data = rows(250, 4);
        let cfg = MiceConfig { m: 3, cycles: 3, k: 5, seed: 9 };
        let a = mice(&data, &cfg).unwrap();
        let b = mice(&data, &cfg).unwrap();
        assert_eq!(a, b);
        for table in &a {
            for (row, orig) in table.iter().zip(&data) {
                for v in SdohVariable::ALL {
                    assert!(!row.profile.get(*v).is_missing());
                    if !orig.profile.get(*v).is_missing() {
                        assert_eq!(row.profile.get(*v), orig.profile.get(*v));
                    }
                }
                assert!(row.marital_status.is_some() && row.insurance.is_some());
            }
        }
        let other = mice(&data, &MiceConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn fully_missing_variable_is_an_error() {
        let mut data = rows(50, 5);
        for r in &mut data {
            r.profile.set(SdohVariable::Drug, Level::Missing);
        }
        assert!(matches!(mice(&data, &MiceConfig::default()), Err(Error::Imputation(_))));
    }
}
