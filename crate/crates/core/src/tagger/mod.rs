//! LSTM sequence tagger for social-determinant events.

pub mod assemble;
pub mod bio;
pub mod checkpoint;
pub mod extract;
pub mod gradcheck;
pub mod model;
pub mod tokenize;
pub mod train;

pub use assemble::assemble_events;
pub use bio::{decode_bio, encode_bio, gold_spans, LabelAlphabet, Layer, TagSequences, TypedSpan};
pub use extract::{extract_corpus, extract_document};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{Distributions, Hyper, Params, Provenance, TaggerModel, Vocabulary};
pub use tokenize::{sentence_ids, tokenize, tokenize_span, Token};
pub use train::{finetune, prepare_examples, train, FinetuneConfig, TrainReport};
