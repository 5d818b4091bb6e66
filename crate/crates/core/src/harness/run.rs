//! The end-to-end experiment: corpora, models, extraction, scoring and associations.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::ModelCache;
use super::config::{derive_seed, Cell, ExperimentConfig, Extractor, Variant};
use super::table1::{emit_table1, Table1Row};
use crate::corpus::{generate_synthetic, serialize_document_record, split_corpus, AnnotatedDocument, Record, SdohEvent, SdohVariable};
use crate::derivation::{study_row, CodeStatusLexicon, StudyRow};
use crate::error::{Error, Result};
use crate::scorer::{overall, score_corpus, Matching, ScoreRow};
use crate::sectionizer::Sectionizer;
use crate::stats::{associate, AssociationResult, Method, MiceConfig};
use crate::tagger::{extract_corpus, finetune, train, FinetuneConfig, Hyper, TaggerModel, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    LabeledSubset,
    LargeSet,
}

impl Dataset {
    pub const ALL: [Dataset; 2] = [Dataset::LabeledSubset, Dataset::LargeSet];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dataset::LabeledSubset => "labeled_subset",
            Dataset::LargeSet => "large_set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub cell: Cell,
    pub rows: Vec<ScoreRow>,
}

/// One association with its full coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub cell: Cell,
    pub dataset: Dataset,
    pub result: AssociationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub model: String,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub split: serde_json::Value,
    pub scores: Vec<ScoreTable>,
    pub associations: Vec<AssociationRow>,
    /// Gold-label associations on the labeled subset, one per SDoH.
    pub reference: Vec<AssociationResult>,
    pub table1: Vec<Table1Row>,
    pub training: Vec<TrainingSummary>,
    pub external_cv: Vec<FoldScore>,
}

impl ExperimentReport {
    pub fn score_table(&self, cell: Cell) -> Option<&ScoreTable> {
        self.scores.iter().find(|s| s.cell == cell)
    }

    pub fn association(&self, cell: Cell, dataset: Dataset, method: Method, sdoh: SdohVariable) -> Option<&AssociationResult> {
        self.associations
            .iter()
            .find(|a| a.cell == cell && a.dataset == dataset && a.result.method == method && a.result.sdoh == sdoh)
            .map(|a| &a.result)
    }
}

/// Trained models kept alongside the report for writing checkpoints.
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub models: Vec<(String, TaggerModel)>,
}

/// The same note as an unlabeled input: no events, no known section span.
fn unlabeled(doc: &AnnotatedDocument) -> AnnotatedDocument {
    let mut d = doc.clone();
    d.events.clear();
    d.social_history = None;
    d
}

fn training_inputs(kind: &str, hyper: &serde_json::Value, docs: &[AnnotatedDocument], base: Option<&str>) -> Result<serde_json::Value> {
    let mut lines = String::new();
    for d in docs {
        lines.push_str(&serialize_document_record(&Record::new(d.clone(), None))?);
        lines.push('\n');
    }
    Ok(serde_json::json!({
        "kind": kind,
        "hyper": hyper,
        "base": base,
        "docs": super::manifest::sha256_hex(lines.as_bytes()),
    }))
}

fn model_hash(model: &TaggerModel) -> Result<String> {
    Ok(super::manifest::sha256_hex(crate::tagger::checkpoint::to_json(model)?.as_bytes()))
}

fn cached_train(
    cache: Option<&ModelCache>,
    inputs: serde_json::Value,
    job: impl FnOnce() -> Result<TrainReport>,
) -> Result<TrainReport> {
    match cache {
        Some(c) => c.get_or_train(&inputs, job),
        None => job(),
    }
}

fn external_hyper(config: &ExperimentConfig) -> Hyper {
    Hyper {
        seed: derive_seed(config.seed, &format!("external/{}", config.external_hyper.seed)),
        ..config.external_hyper.clone()
    }
}

fn train_external(config: &ExperimentConfig, docs: &[AnnotatedDocument], cache: Option<&ModelCache>) -> Result<TrainReport> {
    let hyper = external_hyper(config);
    let inputs = training_inputs("scratch", &serde_json::to_value(&hyper)?, docs, None)?;
    cached_train(cache, inputs, || train(docs, &hyper)).map_err(|e| e.context("training the external model"))
}

fn train_cell(
    config: &ExperimentConfig,
    cell: Cell,
    docs: &[AnnotatedDocument],
    external: Option<&(TrainReport, String)>,
    cache: Option<&ModelCache>,
) -> Result<TrainReport> {
    let label = cell.label();
    match cell.variant {
        Variant::External => Ok(external.expect("external model trained").0.clone()),
        Variant::Finetuned => {
            let (base, base_hash) = external.expect("external model trained");
            let ft = FinetuneConfig {
                seed: derive_seed(config.seed, &format!("{label}/{}", config.finetune.seed)),
                ..config.finetune.clone()
            };
            let inputs = training_inputs("finetune", &serde_json::to_value(&ft)?, docs, Some(base_hash))?;
            cached_train(cache, inputs, || finetune(&base.model, docs, &ft))
        }
        Variant::Scratch => {
            let hyper = Hyper {
                seed: derive_seed(config.seed, &format!("{label}/{}", config.scratch_hyper.seed)),
                ..config.scratch_hyper.clone()
            };
            let inputs = training_inputs("scratch", &serde_json::to_value(&hyper)?, docs, None)?;
            cached_train(cache, inputs, || train(docs, &hyper))
        }
    }
    .map_err(|e| e.context(format!("training {label}")))
}

fn mice_config(config: &ExperimentConfig, dataset: Dataset) -> MiceConfig {
    MiceConfig {
        seed: derive_seed(config.seed, &format!("mice/{}/{}", config.mice.seed, dataset.as_str())),
        ..config.mice.clone()
    }
}

fn study_rows_with(records: &[&Record], events: &[Vec<SdohEvent>]) -> Vec<StudyRow> {
    let lex = CodeStatusLexicon::default_lexicon();
    records
        .iter()
        .zip(events)
        .map(|(r, ev)| study_row(&r.document, r.structured.as_ref(), ev, lex))
        .collect()
}

/// Associations for one (cell, dataset). A weak extractor can leave a
/// variable with no observed values; that cell gets non-converged rows
/// instead of aborting the whole experiment.
fn associate_tolerant(rows: &[StudyRow], modes: &[Method], mice: &MiceConfig) -> Result<Vec<AssociationResult>> {
    let mut out = Vec::new();
    for &method in modes {
        match associate(rows, &[method], mice) {
            Ok(r) => out.extend(r),
            Err(e) if matches!(e.root(), Error::Imputation(_) | Error::DonorPool { .. } | Error::Encoding(_) | Error::Precondition(_)) => {
                log::warn!("{} analysis failed: {e}", method.as_str());
                let m = if method == Method::Mice { mice.m } else { 1 };
                out.extend(SdohVariable::ALL.iter().map(|&v| AssociationResult::failed(v, method, rows.len(), m)));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// k-fold cross-validation of the external configuration on institution A.
fn cross_validate_external(config: &ExperimentConfig, docs: &[AnnotatedDocument], k: usize) -> Result<Vec<FoldScore>> {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "external-folds")));
    let hyper = external_hyper(config);
    (0..k)
        .into_par_iter()
        .map(|fold| {
            let held: Vec<AnnotatedDocument> =
                order.iter().enumerate().filter(|(i, _)| i % k == fold).map(|(_, &d)| docs[d].clone()).collect();
            let rest: Vec<AnnotatedDocument> =
                order.iter().enumerate().filter(|(i, _)| i % k != fold).map(|(_, &d)| docs[d].clone()).collect();
            let model = train(&rest, &hyper)?.model;
            let pred = extract_corpus(&model, &held, Sectionizer::default_rules())?;
            let rows = score_corpus(&held, &pred, Matching::Overlap)?;
            let o = overall(&rows).expect("overall row is always present");
            Ok(FoldScore {
                fold,
                p: o.p,
                r: o.r,
                f1: o.f1,
            })
        })
        .collect()
}

/// Runs the full design. With a cache directory, trained models whose inputs
/// are unchanged are reused.
pub fn run_experiment(config: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<ExperimentRun> {
    config.validate()?;
    let cache = match (config.cache, cache_dir) {
        (true, Some(dir)) => Some(ModelCache::new(dir)?),
        _ => None,
    };

    let local = generate_synthetic(&config.local).map_err(|e| e.context("generating the local corpus"))?;
    let split = split_corpus(
        local.records.len(),
        &config.train_sizes,
        config.eval_size,
        derive_seed(config.seed, "split"),
    )?;
    let ids: Vec<&str> = local.records.iter().map(|r| r.document.doc_id.as_str()).collect();
    let split_manifest = split.manifest(&ids);

    let eval_records: Vec<&Record> = split.eval.iter().map(|&i| &local.records[i]).collect();
    let large_records: Vec<&Record> = split.remainder.iter().map(|&i| &local.records[i]).collect();
    let eval_gold: Vec<AnnotatedDocument> = eval_records.iter().map(|r| r.document.clone()).collect();
    let dataset_records = |d: Dataset| match d {
        Dataset::LabeledSubset => &eval_records,
        Dataset::LargeSet => &large_records,
    };

    let mut training = Vec::new();
    let mut models = Vec::new();
    let mut external_cv = Vec::new();
    let external = if config.needs_external_model() {
        let a = generate_synthetic(&config.external).map_err(|e| e.context("generating the external corpus"))?;
        let a_docs: Vec<AnnotatedDocument> = a.records.into_iter().map(|r| r.document).collect();
        if let Some(k) = config.external_folds {
            external_cv = cross_validate_external(config, &a_docs, k)?;
        }
        let report = train_external(config, &a_docs, cache.as_ref())?;
        let hash = model_hash(&report.model)?;
        log::info!("trained the external model");
        Some((report, hash))
    } else {
        None
    };

    let cells = config.cells();
    let trained: Vec<Option<TrainReport>> = match config.extractor {
        Extractor::Gold => vec![None; cells.len()],
        Extractor::Model => cells
            .par_iter()
            .map(|&cell| {
                let docs: Vec<AnnotatedDocument> = match cell.size {
                    Some(s) => split.train(s)?.iter().map(|&i| local.records[i].document.clone()).collect(),
                    None => Vec::new(),
                };
                let t = train_cell(config, cell, &docs, external.as_ref(), cache.as_ref())?;
                log::info!("trained {}", cell.label());
                Ok(Some(t))
            })
            .collect::<Result<_>>()?,
    };
    if let Some((ext, _)) = &external {
        training.push(TrainingSummary {
            model: "external".into(),
            epoch_losses: ext.epoch_losses.clone(),
        });
        models.push(("external".to_string(), ext.model.clone()));
    }
    for (cell, t) in cells.iter().zip(&trained) {
        if let (Some(t), Some(_)) = (t, cell.size) {
            training.push(TrainingSummary {
                model: cell.label(),
                epoch_losses: t.epoch_losses.clone(),
            });
            models.push((cell.label(), t.model.clone()));
        }
    }

    // predicted events per cell and dataset
    let sectionizer = Sectionizer::default_rules();
    let predictions: Vec<[Vec<Vec<SdohEvent>>; 2]> = cells
        .iter()
        .zip(&trained)
        .map(|(cell, t)| {
            let per_dataset = |d: Dataset| -> Result<Vec<Vec<SdohEvent>>> {
                let records = dataset_records(d);
                match t {
                    None => Ok(records.iter().map(|r| r.document.events.clone()).collect()),
                    Some(t) => {
                        let docs: Vec<AnnotatedDocument> = records.iter().map(|r| unlabeled(&r.document)).collect();
                        Ok(extract_corpus(&t.model, &docs, sectionizer)?.into_iter().map(|d| d.events).collect())
                    }
                }
            };
            Ok([per_dataset(Dataset::LabeledSubset)?, per_dataset(Dataset::LargeSet)?])
                .map_err(|e: Error| e.context(format!("extracting with {}", cell.label())))
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::new();
    for (cell, pred) in cells.iter().zip(&predictions) {
        let pred_docs: Vec<AnnotatedDocument> = eval_gold
            .iter()
            .zip(&pred[0])
            .map(|(g, ev)| AnnotatedDocument {
                events: ev.clone(),
                ..g.clone()
            })
            .collect();
        let rows = score_corpus(&eval_gold, &pred_docs, Matching::Overlap)
            .map_err(|e| e.context(format!("scoring {}", cell.label())))?;
        scores.push(ScoreTable { cell: *cell, rows });
    }

    let jobs: Vec<(Cell, Dataset, &Vec<Vec<SdohEvent>>)> = cells
        .iter()
        .zip(&predictions)
        .flat_map(|(cell, pred)| Dataset::ALL.iter().enumerate().map(move |(k, d)| (*cell, *d, &pred[k])))
        .collect();
    let associations: Vec<AssociationRow> = jobs
        .par_iter()
        .map(|&(cell, dataset, events)| {
            let rows = study_rows_with(dataset_records(dataset), events);
            let results = associate_tolerant(&rows, &config.modes, &mice_config(config, dataset))
                .map_err(|e| e.context(format!("associations for {} on {}", cell.label(), dataset.as_str())))?;
            log::info!("associations for {} on {}", cell.label(), dataset.as_str());
            Ok(results.into_iter().map(move |result| AssociationRow { cell, dataset, result }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let gold_events: Vec<Vec<SdohEvent>> = eval_records.iter().map(|r| r.document.events.clone()).collect();
    let gold_rows = study_rows_with(&eval_records, &gold_events);
    let reference = associate(&gold_rows, &config.modes[..1], &mice_config(config, Dataset::LabeledSubset))
        .map_err(|e| e.context("reference associations"))?;

    let lex = CodeStatusLexicon::default_lexicon();
    let full_rows: Vec<StudyRow> = local
        .records
        .iter()
        .map(|r| study_row(&r.document, r.structured.as_ref(), &r.document.events, lex))
        .collect();
    let table1 = emit_table1(&gold_rows, &full_rows);

    Ok(ExperimentRun {
        report: ExperimentReport {
            config: config.clone(),
            split: split_manifest,
            scores,
            associations,
            reference,
            table1,
            training,
            external_cv,
        },
        models,
    })
}
