//! Experiment orchestration: configuration, model cache, the full run and its artifacts.

pub mod cache;
pub mod config;
pub mod forest;
pub mod manifest;
pub mod output;
pub mod run;
pub mod table1;

pub use cache::ModelCache;
pub use config::{derive_seed, Cell, ExperimentConfig, Extractor, Variant};
pub use forest::{forest_rows, forest_svg, ForestRow};
pub use manifest::{build_manifest, sha256_hex, write_manifest, Manifest, ManifestEntry, MANIFEST_FILE};
pub use output::{read_report, write_experiment, write_report_artifacts, CACHE_DIR};
pub use run::{run_experiment, AssociationRow, Dataset, ExperimentReport, ExperimentRun, ScoreTable};
pub use table1::{emit_table1, Table1Row};
