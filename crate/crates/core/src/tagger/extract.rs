//! Running a trained tagger over documents.

use rayon::prelude::*;

use super::assemble::assemble_events;
use super::bio::{decode_bio, Layer};
use super::model::TaggerModel;
use super::tokenize::{sentence_ids, tokenize_span};
use crate::corpus::AnnotatedDocument;
use crate::error::Result;
use crate::sectionizer::Sectionizer;

/// Replaces the document's events with predicted ones. Documents without a
/// social-history span are sectionized first; if no section is found the
/// document gets no events.
pub fn extract_document(model: &TaggerModel, doc: &AnnotatedDocument, sectionizer: &Sectionizer) -> Result<AnnotatedDocument> {
    let mut out = doc.clone();
    out.events.clear();
    if out.social_history.is_none() {
        out.social_history = sectionizer.extract_social_history(&doc.text);
    }
    let Some(region) = out.social_history else {
        return Ok(out);
    };
    let tokens = tokenize_span(&doc.text, region);
    if tokens.is_empty() {
        return Ok(out);
    }
    let ids = model.token_ids(tokens.iter().map(|t| t.surface.as_str()));
    let (trig, arg) = model.predict(&ids);
    let trig_tags: Vec<String> = trig.iter().map(|&i| model.trigger_alphabet.label(i).to_string()).collect();
    let arg_tags: Vec<String> = arg.iter().map(|&i| model.argument_alphabet.label(i).to_string()).collect();
    let triggers = decode_bio(&trig_tags, &tokens, Layer::Trigger)?;
    let arguments = decode_bio(&arg_tags, &tokens, Layer::Argument)?;
    let sentences = sentence_ids(&doc.text, &tokens);
    out.events = assemble_events(&triggers, &arguments, &sentences);
    Ok(out)
}

/// Extraction over a corpus, in input order.
pub fn extract_corpus(model: &TaggerModel, docs: &[AnnotatedDocument], sectionizer: &Sectionizer) -> Result<Vec<AnnotatedDocument>> {
    docs.par_iter().map(|d| extract_document(model, d, sectionizer)).collect()
}
