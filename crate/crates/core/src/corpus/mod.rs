//! Annotated corpora: data model, interchange format, synthetic generation and splitting.

pub mod jsonl;
pub mod split;
pub mod synth;
mod templates;
pub mod types;

pub use jsonl::{parse_document_record, read_corpus, serialize_document_record, write_corpus, Record};
pub use split::{split_corpus, CorpusSplit};
pub use synth::{generate_synthetic, Dialect, LatentTruth, SynthConfig, SyntheticCorpus};
pub use types::{
    char_slice, levels, AnnotatedDocument, Argument, EventType, Role, SdohEvent, SdohVariable, Span,
    StructuredRecord, Subtype,
};
