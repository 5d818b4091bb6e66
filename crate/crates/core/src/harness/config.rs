//! Experiment configuration and seed derivation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::stats::{MiceConfig, Method};
use crate::tagger::{FinetuneConfig, Hyper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    External,
    Finetuned,
    Scratch,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::External => "external",
            Variant::Finetuned => "finetuned",
            Variant::Scratch => "scratch",
        }
    }
}

/// Where the study variables come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extractor {
    /// Trained taggers run over the sectionized notes.
    Model,
    /// Gold events are used as the "extraction" (pipeline self-check).
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every training, split and imputation seed derives from it.
    pub seed: u64,
    /// Institution A corpus, used to train the external model.
    pub external: SynthConfig,
    /// Institution B corpus: training pool, labeled evaluation subset and large remainder.
    pub local: SynthConfig,
    pub train_sizes: Vec<usize>,
    pub eval_size: usize,
    pub variants: Vec<Variant>,
    pub external_hyper: Hyper,
    pub scratch_hyper: Hyper,
    pub finetune: FinetuneConfig,
    pub mice: MiceConfig,
    pub modes: Vec<Method>,
    pub extractor: Extractor,
    /// Optional k-fold cross-validation of the external model on institution A.
    pub external_folds: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Reuse trained models from `<out>/cache` when their inputs are unchanged.
    pub cache: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::with_seed(0)
    }
}

/// Child seed for a named stage.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl ExperimentConfig {
    /// Default design with both corpora seeded from `seed`.
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            external: SynthConfig::institution_a(1000, derive_seed(seed, "external-corpus")),
            local: SynthConfig::institution_b(7100, derive_seed(seed, "local-corpus")),
            train_sizes: vec![100, 200, 300, 400, 500],
            eval_size: 600,
            variants: vec![Variant::External, Variant::Finetuned, Variant::Scratch],
            external_hyper: Hyper {
                epochs: 50,
                ..Hyper::default()
            },
            scratch_hyper: Hyper::default(),
            finetune: FinetuneConfig::default(),
            mice: MiceConfig::default(),
            modes: vec![Method::Mice, Method::Cca],
            extractor: Extractor::Model,
            external_folds: None,
            output_dir: None,
            cache: true,
        }
    }

    /// Replaces the master seed and re-derives both corpus seeds from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.external.rng_seed = derive_seed(seed, "external-corpus");
        self.local.rng_seed = derive_seed(seed, "local-corpus");
    }

    pub fn validate(&self) -> Result<()> {
        self.external.validate()?;
        self.local.validate()?;
        if self.train_sizes.is_empty() || self.train_sizes[0] == 0 {
            return Err(Error::Config("training sizes must be non-empty and positive".into()));
        }
        if self.train_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("training sizes must be strictly ascending".into()));
        }
        if self.eval_size == 0 {
            return Err(Error::Config("eval_size must be positive".into()));
        }
        if self.variants.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("at least one variant and one analysis mode are required".into()));
        }
        let mut v = self.variants.clone();
        v.sort();
        v.dedup();
        if v.len() != self.variants.len() {
            return Err(Error::Config("variants repeat".into()));
        }
        let mut m = self.modes.clone();
        m.sort();
        m.dedup();
        if m.len() != self.modes.len() {
            return Err(Error::Config("analysis modes repeat".into()));
        }
        if self.modes.contains(&Method::Mice) && self.mice.m < 2 {
            return Err(Error::Config("multiple imputation needs m >= 2".into()));
        }
        if self.mice.k == 0 {
            return Err(Error::Config("donor pool size k must be positive".into()));
        }
        let needed = self.train_sizes.last().copied().unwrap_or(0) + self.eval_size;
        if self.local.n_documents <= needed {
            return Err(Error::Sizing(format!(
                "local corpus of {} documents leaves no remainder after {needed} training and evaluation documents",
                self.local.n_documents
            )));
        }
        if let Some(k) = self.external_folds {
            if k < 2 || k > self.external.n_documents {
                return Err(Error::Config(format!("external_folds must be in 2..={}", self.external.n_documents)));
            }
        }
        for h in [&self.external_hyper, &self.scratch_hyper] {
            if h.d_emb == 0 || h.d_h == 0 || h.epochs == 0 || !(h.learning_rate > 0.0) {
                return Err(Error::Config("tagger dimensions, epochs and learning rate must be positive".into()));
            }
        }
        if !(self.finetune.learning_rate > 0.0) {
            return Err(Error::Config("fine-tuning learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn needs_external_model(&self) -> bool {
        self.extractor == Extractor::Model
            && (self.variants.contains(&Variant::External) || self.variants.contains(&Variant::Finetuned))
    }

    /// (variant, size) cells in report order: external first, then per size
    /// fine-tuned before scratch.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        if self.variants.contains(&Variant::External) {
            cells.push(Cell {
                variant: Variant::External,
                size: None,
            });
        }
        for &s in &self.train_sizes {
            for v in [Variant::Finetuned, Variant::Scratch] {
                if self.variants.contains(&v) {
                    cells.push(Cell { variant: v, size: Some(s) });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub variant: Variant,
    /// Local training size; `None` for the external model.
    pub size: Option<usize>,
}

impl Cell {
    pub fn label(&self) -> String {
        match self.size {
            Some(s) => format!("{}_{s}", self.variant.as_str()),
            None => self.variant.as_str().to_string(),
        }
    }
}
