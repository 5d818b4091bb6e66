//! Design matrices for the per-variable association models.

use nalgebra::DMatrix;

use crate::corpus::{levels, SdohVariable};
use crate::derivation::{Level, StudyRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub columns: Vec<String>,
    pub y: Vec<f64>,
}

impl DesignMatrix {
    /// Checks shapes and that the outcome is binary.
    pub fn new(x: DMatrix<f64>, columns: Vec<String>, y: Vec<f64>) -> Result<Self> {
        if x.ncols() != columns.len() || x.nrows() != y.len() {
            return Err(Error::Encoding(format!(
                "design is {}x{} with {} names and {} outcomes",
                x.nrows(),
                x.ncols(),
                columns.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Precondition("outcome must be 0 or 1".into()));
        }
        Ok(DesignMatrix { x, columns, y })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// The categorical adjustment covariates with their declared level sets.
pub const ADJUSTMENT: &[(&str, &[&str])] = &[
    ("gender", levels::GENDER),
    ("ethnicity", levels::ETHNICITY),
    ("religion", levels::RELIGION),
];

pub fn adjustment_value<'a>(row: &'a StudyRow, name: &str) -> Option<&'a str> {
    match name {
        "gender" => row.gender.as_deref(),
        "ethnicity" => row.ethnicity.as_deref(),
        "religion" => row.religion.as_deref(),
        _ => None,
    }
}

/// Name of the SDoH indicator column.
pub fn sdoh_column(sdoh: SdohVariable) -> String {
    format!("{sdoh}=positive")
}

/// Observed levels in declared order and the modal one (first in declared order on ties).
fn level_counts(values: &[&str], declared: &[&str]) -> (Vec<usize>, usize) {
    let counts: Vec<usize> = declared.iter().map(|l| values.iter().filter(|v| *v == l).count()).collect();
    let mut modal = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[modal] {
            modal = i;
        }
    }
    (counts, modal)
}

/// Intercept, SDoH indicator, centered age, then one dummy per non-modal
/// observed level of gender, ethnicity and religion.
pub fn encode_design(rows: &[StudyRow], sdoh: SdohVariable) -> Result<DesignMatrix> {
    if rows.is_empty() {
        return Err(Error::Precondition("no rows to encode".into()));
    }
    let mut indicator = Vec::with_capacity(rows.len());
    let mut ages = Vec::with_capacity(rows.len());
    for r in rows {
        indicator.push(match r.profile.get(sdoh) {
            Level::Positive => 1.0,
            Level::Rest => 0.0,
            Level::Missing => {
                return Err(Error::Precondition(format!("{sdoh} is missing for {}", r.doc_id)));
            }
        });
        ages.push(r.age.ok_or_else(|| Error::Precondition(format!("age is missing for {}", r.doc_id)))?);
    }
    let mean_age = ages.iter().sum::<f64>() / ages.len() as f64;

    let mut columns = vec!["intercept".to_string(), sdoh_column(sdoh), "age".to_string()];
    let mut data: Vec<Vec<f64>> = vec![vec![1.0; rows.len()], indicator, ages.iter().map(|a| a - mean_age).collect()];
    for (name, declared) in ADJUSTMENT {
        let mut values = Vec::with_capacity(rows.len());
        for r in rows {
            let v = adjustment_value(r, name)
                .ok_or_else(|| Error::Precondition(format!("{name} is missing for {}", r.doc_id)))?;
            if !declared.contains(&v) {
                return Err(Error::Encoding(format!("unseen {name} level '{v}'")));
            }
            values.push(v);
        }
        let (counts, modal) = level_counts(&values, declared);
        let present = counts.iter().filter(|c| **c > 0).count();
        if present < 2 {
            log::warn!("{name} takes a single level; it contributes no column");
        }
        for (i, level) in declared.iter().enumerate() {
            if i == modal || counts[i] == 0 {
                continue;
            }
            columns.push(format!("{name}={level}"));
            data.push(values.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect());
        }
    }
    for (c, col) in data.iter().enumerate().skip(1) {
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::Encoding(format!("column {} is constant", columns[c])));
        }
    }
    let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| data[j][i]);
    let y = rows.iter().map(|r| if r.outcome { 1.0 } else { 0.0 }).collect();
    DesignMatrix::new(x, columns, y)
}
