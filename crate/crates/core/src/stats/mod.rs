//! Association analysis: design matrices, logistic regression, multiple
//! imputation, pooling and complete-case selection.

pub mod associate;
pub mod cca;
pub mod design;
pub mod logistic;
pub mod mice;
pub mod rubin;

pub use associate::{associate, associate_cca, associate_imputed, write_associations_csv, AssociationResult, Method};
pub use cca::complete_cases;
pub use design::{encode_design, DesignMatrix};
pub use logistic::{fit_logistic, FitResult};
pub use mice::{mice, pmm_draw, MiceConfig};
pub use rubin::{rubin_pool, PooledResult};
