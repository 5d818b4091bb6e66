pub mod corpus;
pub mod derivation;
pub mod error;
pub mod harness;
pub mod scorer;
pub mod sectionizer;
pub mod stats;
pub mod tagger;

pub use error::{Error, Result};
