//! Patient-characteristics table.

use serde::{Deserialize, Serialize};

use crate::corpus::{levels, SdohVariable};
use crate::derivation::{positive_level_name, Level, StudyRow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub variable: String,
    pub level: String,
    pub labeled_subset: String,
    pub full_set: String,
}

pub const TABLE1_CSV_HEADER: &[&str] = &["variable", "level", "labeled_subset", "full_set"];

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn number(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.1}")
    }
}

fn age_summary(rows: &[StudyRow]) -> String {
    let mut ages: Vec<f64> = rows.iter().filter_map(|r| r.age).collect();
    if ages.is_empty() {
        return "-".into();
    }
    ages.sort_by(f64::total_cmp);
    format!(
        "{} [{}, {}]",
        number(quantile(&ages, 0.5)),
        number(quantile(&ages, 0.25)),
        number(quantile(&ages, 0.75))
    )
}

/// Percentages in tenths that sum to exactly 1000 (largest remainder).
fn tenths(counts: &[usize]) -> Vec<u64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0; counts.len()];
    }
    let exact: Vec<(u64, u64)> = counts
        .iter()
        .map(|&c| {
            let scaled = c as u64 * 1000;
            (scaled / total as u64, scaled % total as u64)
        })
        .collect();
    let mut out: Vec<u64> = exact.iter().map(|e| e.0).collect();
    let short = 1000 - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| exact[b].1.cmp(&exact[a].1).then(a.cmp(&b)));
    for &i in order.iter().take(short as usize) {
        out[i] += 1;
    }
    out
}

fn cells(counts: &[usize]) -> Vec<String> {
    tenths(counts)
        .iter()
        .zip(counts)
        .map(|(t, c)| format!("{c} ({}.{})", t / 10, t % 10))
        .collect()
}

/// Count rows per level of a categorical; a trailing "Missing" level is
/// added when any value is absent.
fn categorical(rows: &[StudyRow], declared: &[&str], get: &dyn Fn(&StudyRow) -> Option<String>) -> (Vec<String>, Vec<usize>) {
    let mut names: Vec<String> = declared.iter().map(|s| s.to_string()).collect();
    let mut counts: Vec<usize> = declared
        .iter()
        .map(|l| rows.iter().filter(|r| get(r).as_deref() == Some(*l)).count())
        .collect();
    let missing = rows.iter().filter(|r| get(r).is_none()).count();
    if missing > 0 {
        names.push("Missing".into());
        counts.push(missing);
    }
    (names, counts)
}

/// Two-column table: SDoH rows are filled for the labeled subset only.
pub fn emit_table1(labeled: &[StudyRow], full: &[StudyRow]) -> Vec<Table1Row> {
    let mut out = vec![
        Table1Row {
            variable: "N".into(),
            level: String::new(),
            labeled_subset: labeled.len().to_string(),
            full_set: full.len().to_string(),
        },
        Table1Row {
            variable: "age".into(),
            level: "median [q1, q3]".into(),
            labeled_subset: age_summary(labeled),
            full_set: age_summary(full),
        },
    ];
    type Getter = Box<dyn Fn(&StudyRow) -> Option<String>>;
    let covariates: Vec<(&str, &[&str], Getter)> = vec![
        ("gender", levels::GENDER, Box::new(|r| r.gender.clone())),
        ("ethnicity", levels::ETHNICITY, Box::new(|r| r.ethnicity.clone())),
        ("religion", levels::RELIGION, Box::new(|r| r.religion.clone())),
        ("marital_status", levels::MARITAL_STATUS, Box::new(|r| r.marital_status.clone())),
        ("admission_location", levels::ADMISSION_LOCATION, Box::new(|r| r.admission_location.clone())),
        ("insurance", levels::INSURANCE, Box::new(|r| r.insurance.clone())),
        ("admission_type", levels::ADMISSION_TYPE, Box::new(|r| r.admission_type.clone())),
        ("dnr_dni", &["Yes", "No"], Box::new(|r| Some(if r.outcome { "Yes" } else { "No" }.to_string()))),
    ];
    for (name, declared, get) in &covariates {
        let (names_l, counts_l) = categorical(labeled, declared, get.as_ref());
        let (names_f, counts_f) = categorical(full, declared, get.as_ref());
        let mut all_names = names_f.clone();
        if names_l.len() > all_names.len() {
            all_names = names_l.clone();
        }
        let lookup = |names: &[String], counts: &[usize], level: &str| {
            let cells = cells(counts);
            names.iter().position(|n| n == level).map(|i| cells[i].clone()).unwrap_or_else(|| "0 (0.0)".into())
        };
        for level in &all_names {
            out.push(Table1Row {
                variable: name.to_string(),
                level: level.clone(),
                labeled_subset: lookup(&names_l, &counts_l, level),
                full_set: lookup(&names_f, &counts_f, level),
            });
        }
    }
    for var in SdohVariable::ALL {
        let counts: Vec<usize> = [Level::Positive, Level::Rest, Level::Missing]
            .iter()
            .map(|l| labeled.iter().filter(|r| r.profile.get(*var) == *l).count())
            .collect();
        for (level, cell) in [positive_level_name(*var), "rest", "Missing"].iter().zip(cells(&counts)) {
            out.push(Table1Row {
                variable: var.as_str().to_string(),
                level: level.to_string(),
                labeled_subset: cell,
                full_set: "-".into(),
            });
        }
    }
    out
}

pub fn write_table1_csv<W: std::io::Write>(rows: &[Table1Row], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE1_CSV_HEADER)?;
    for r in rows {
        w.write_record([&r.variable, &r.level, &r.labeled_subset, &r.full_set])?;
    }
    w.flush()?;
    Ok(())
}
