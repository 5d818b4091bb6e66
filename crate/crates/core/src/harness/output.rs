//! Writing experiment reports to an output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::forest::{forest_rows, forest_svg, write_forest_csv};
use super::manifest::{write_manifest, Manifest};
use super::run::{Dataset, ExperimentReport, ExperimentRun};
use super::table1::write_table1_csv;
use crate::error::Result;
use crate::scorer::CSV_HEADER;
use crate::stats::associate::ASSOCIATION_CSV_HEADER;
use crate::tagger::checkpoint;

/// Directory under the output directory holding the model cache; not part of the manifest.
pub const CACHE_DIR: &str = "cache";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_scores(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["variant", "size"];
    header.extend_from_slice(&CSV_HEADER);
    w.write_record(&header)?;
    for table in &report.scores {
        for row in &table.rows {
            let [p, r, f1] = row.formatted();
            let rec = [
                table.cell.variant.as_str().to_string(),
                table.cell.size.map(|s| s.to_string()).unwrap_or_default(),
                row.event.clone(),
                row.argument.clone(),
                row.subtype.clone(),
                row.nt.to_string(),
                row.np.to_string(),
                row.tp.to_string(),
                p,
                r,
                f1,
            ];
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_associations(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["variant", "size", "dataset"];
    header.extend_from_slice(ASSOCIATION_CSV_HEADER);
    w.write_record(&header)?;
    let rows = report
        .associations
        .iter()
        .map(|a| (a.cell.variant.as_str(), a.cell.size, a.dataset, &a.result))
        .chain(report.reference.iter().map(|r| ("reference", None, Dataset::LabeledSubset, r)));
    for (variant, size, dataset, r) in rows {
        w.write_record([
            variant.to_string(),
            size.map(|s| s.to_string()).unwrap_or_default(),
            dataset.as_str().to_string(),
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

fn write_training(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["model", "epoch", "loss"])?;
    for t in &report.training {
        for (e, loss) in t.epoch_losses.iter().enumerate() {
            w.write_record([t.model.clone(), (e + 1).to_string(), loss.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_external_cv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["fold", "p", "r", "f1"])?;
    for f in &report.external_cv {
        w.write_record([f.fold.to_string(), f.p.to_string(), f.r.to_string(), f.f1.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Report artifacts derivable from the report alone: score and association
/// tables, characteristics table, forest CSV and one SVG per (dataset, mode).
pub fn write_report_artifacts(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_scores(report, &dir.join("scores.csv"))?;
    write_associations(report, &dir.join("associations.csv"))?;
    write_table1_csv(&report.table1, create(&dir.join("table1.csv"))?)?;
    write_training(report, &dir.join("training.csv"))?;
    if !report.external_cv.is_empty() {
        write_external_cv(report, &dir.join("external_cv.csv"))?;
    }
    let rows = forest_rows(report);
    write_forest_csv(&rows, create(&dir.join("forest.csv"))?)?;
    for dataset in Dataset::ALL {
        for mode in &report.config.modes {
            let svg = forest_svg(&rows, dataset, *mode, &report.config.train_sizes);
            std::fs::write(dir.join(format!("forest_{}_{}.svg", dataset.as_str(), mode.as_str())), svg)?;
        }
    }
    Ok(())
}

/// Everything an experiment produces, followed by the manifest.
pub fn write_experiment(run: &ExperimentRun, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let report = &run.report;
    let mut config = serde_json::to_string_pretty(&report.config)?;
    config.push('\n');
    std::fs::write(dir.join("config.json"), config)?;
    let mut split = serde_json::to_string(&report.split)?;
    split.push('\n');
    std::fs::write(dir.join("split.json"), split)?;
    let mut json = serde_json::to_string(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    for (name, model) in &run.models {
        let path = dir.join("models").join(format!("{name}.json"));
        std::fs::create_dir_all(path.parent().expect("has parent"))?;
        checkpoint::save(model, &path)?;
    }
    write_report_artifacts(report, dir)?;
    write_manifest(dir, &[CACHE_DIR])
}

/// Reads `report.json` written by [`write_experiment`].
pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
