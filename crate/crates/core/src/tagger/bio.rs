//! Two-layer BIO encoding: event triggers on one layer, arguments (with the
//! subtype folded into the label) on the other.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::Token;
use crate::corpus::{AnnotatedDocument, EventType, Role, Span, Subtype};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Trigger,
    Argument,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Trigger => "trigger",
            Layer::Argument => "argument",
        }
    }

    /// Span kinds of this layer, without B-/I- prefixes.
    pub fn kinds(&self) -> Vec<String> {
        match self {
            Layer::Trigger => EventType::ALL.iter().map(|e| e.as_str().to_string()).collect(),
            Layer::Argument => Role::ALL
                .iter()
                .flat_map(|r| {
                    if r.has_subtype() {
                        r.subtypes().iter().map(|s| argument_label(*r, Some(*s))).collect()
                    } else {
                        vec![argument_label(*r, None)]
                    }
                })
                .collect(),
        }
    }

    fn check_kind(&self, kind: &str) -> Result<()> {
        let ok = match self {
            Layer::Trigger => kind.parse::<EventType>().is_ok(),
            Layer::Argument => parse_argument_label(kind).is_ok(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Decode(format!("unknown {} label '{kind}'", self.name())))
        }
    }
}

/// `Role` or `Role.subtype`.
pub fn argument_label(role: Role, subtype: Option<Subtype>) -> String {
    match subtype {
        Some(st) => format!("{role}.{st}"),
        None => role.to_string(),
    }
}

pub fn parse_argument_label(label: &str) -> Result<(Role, Option<Subtype>)> {
    let bad = || Error::Decode(format!("unknown argument label '{label}'"));
    let (role, subtype) = match label.split_once('.') {
        Some((r, s)) => (r.parse::<Role>().map_err(|_| bad())?, Some(s.parse::<Subtype>().map_err(|_| bad())?)),
        None => (label.parse::<Role>().map_err(|_| bad())?, None),
    };
    match (role.has_subtype(), subtype) {
        (true, Some(st)) if role.subtypes().contains(&st) => Ok((role, subtype)),
        (false, None) => Ok((role, None)),
        _ => Err(bad()),
    }
}

/// Fixed, enumerable tag set of one layer: `O`, then `B-x`, `I-x` per kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlphabet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelAlphabet {
    pub fn for_layer(layer: Layer) -> Self {
        let mut labels = vec!["O".to_string()];
        for kind in layer.kinds() {
            labels.push(format!("B-{kind}"));
            labels.push(format!("I-{kind}"));
        }
        LabelAlphabet::from_labels(labels).expect("distinct labels")
    }

    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let index: HashMap<String, usize> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        if index.len() != labels.len() {
            return Err(Error::Validation("duplicate label in alphabet".into()));
        }
        Ok(LabelAlphabet { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

impl Serialize for LabelAlphabet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelAlphabet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        LabelAlphabet::from_labels(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSequences {
    pub trigger_tags: Vec<String>,
    pub argument_tags: Vec<String>,
}

/// A decoded span: its kind (no B-/I- prefix), character span and inclusive token range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypedSpan {
    pub label: String,
    pub span: Span,
    pub first_token: usize,
    pub last_token: usize,
}

/// The gold (kind, span) pairs of one layer, deduplicated and sorted.
pub fn gold_spans(doc: &AnnotatedDocument, layer: Layer) -> Vec<(String, Span)> {
    let set: BTreeSet<(String, Span)> = doc
        .events
        .iter()
        .flat_map(|ev| match layer {
            Layer::Trigger => vec![(ev.event_type.to_string(), ev.trigger)],
            Layer::Argument => ev
                .arguments
                .iter()
                .map(|a| (argument_label(a.role, a.subtype), a.span))
                .collect(),
        })
        .collect();
    set.into_iter().collect()
}

fn token_range(doc_id: &str, tokens: &[Token], span: Span, snap: bool) -> Result<(usize, usize)> {
    let misaligned = || Error::Alignment {
        doc_id: doc_id.to_string(),
        start: span.start,
        end: span.end,
    };
    if snap {
        let first = tokens.iter().position(|t| t.span.end > span.start);
        let last = tokens.iter().rposition(|t| t.span.start < span.end);
        match (first, last) {
            (Some(f), Some(l)) if f <= l => Ok((f, l)),
            _ => Err(misaligned()),
        }
    } else {
        let first = tokens.iter().position(|t| t.span.start == span.start);
        let last = tokens.iter().position(|t| t.span.end == span.end);
        match (first, last) {
            (Some(f), Some(l)) if f <= l => Ok((f, l)),
            _ => Err(misaligned()),
        }
    }
}

/// Tags `tokens` with the document's gold spans. With `snap`, spans that cut
/// through a token are widened to whole tokens instead of failing.
pub fn encode_bio(doc: &AnnotatedDocument, tokens: &[Token], snap: bool) -> Result<TagSequences> {
    let mut layers = [vec!["O".to_string(); tokens.len()], vec!["O".to_string(); tokens.len()]];
    for (li, layer) in [Layer::Trigger, Layer::Argument].into_iter().enumerate() {
        let tags = &mut layers[li];
        let mut owner: Vec<Option<usize>> = vec![None; tokens.len()];
        for (si, (kind, span)) in gold_spans(doc, layer).into_iter().enumerate() {
            let (f, l) = token_range(&doc.doc_id, tokens, span, snap)?;
            for t in f..=l {
                if owner[t].is_some() {
                    return Err(Error::Validation(format!(
                        "document {}: overlapping spans on the {} layer at {span}",
                        doc.doc_id,
                        layer.name()
                    )));
                }
                owner[t] = Some(si);
                tags[t] = format!("{}-{kind}", if t == f { 'B' } else { 'I' });
            }
        }
    }
    let [trigger_tags, argument_tags] = layers;
    Ok(TagSequences {
        trigger_tags,
        argument_tags,
    })
}

/// Turns a BIO sequence into spans. An `I-x` that does not continue an `x`
/// run opens a new span, as if it were `B-x`.
pub fn decode_bio(tags: &[String], tokens: &[Token], layer: Layer) -> Result<Vec<TypedSpan>> {
    if tags.len() != tokens.len() {
        return Err(Error::Decode(format!(
            "{} tags for {} tokens",
            tags.len(),
            tokens.len()
        )));
    }
    let mut spans: Vec<TypedSpan> = Vec::new();
    let mut open = false;
    for (i, tag) in tags.iter().enumerate() {
        if tag == "O" {
            open = false;
            continue;
        }
        let (prefix, kind) = tag
            .split_once('-')
            .filter(|(p, _)| *p == "B" || *p == "I")
            .ok_or_else(|| Error::Decode(format!("malformed tag '{tag}'")))?;
        layer.check_kind(kind)?;
        let continues = prefix == "I" && open && spans.last().map_or(false, |s| s.label == kind);
        if continues {
            let last = spans.last_mut().expect("open span");
            last.last_token = i;
            last.span.end = tokens[i].span.end;
        } else {
            spans.push(TypedSpan {
                label: kind.to_string(),
                span: tokens[i].span,
                first_token: i,
                last_token: i,
            });
        }
        open = true;
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SdohEvent;
    use crate::tagger::tokenize::tokenize;

    fn tags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn alphabet_sizes() {
        assert_eq!(LabelAlphabet::for_layer(Layer::Trigger).len(), 11);
        assert_eq!(Layer::Argument.kinds().len(), 20);
        assert_eq!(LabelAlphabet::for_layer(Layer::Argument).len(), 41);
    }

    #[test]
    fn encodes_trigger_and_subtyped_argument() {
        let text = "pt has no alcohol use";
        let toks = tokenize(text);
        let mut doc = AnnotatedDocument::new("d", text);
        doc.events.push(
            SdohEvent::new(EventType::Alcohol, Span::new(10, 21)).with_argument(
                Role::StatusTime,
                Span::new(7, 9),
                Some(Subtype::None),
            ),
        );
        let seq = encode_bio(&doc, &toks, false).unwrap();
        assert_eq!(seq.trigger_tags, tags(&["O", "O", "O", "B-Alcohol", "I-Alcohol"]));
        assert_eq!(seq.argument_tags[2], "B-StatusTime.none");
    }

    #[test]
    fn misaligned_span_names_document() {
        let text = "smoker";
        let mut doc = AnnotatedDocument::new("doc9", text);
        doc.events.push(SdohEvent::new(EventType::Tobacco, Span::new(0, 5)));
        match encode_bio(&doc, &tokenize(text), false) {
            Err(Error::Alignment { doc_id, start, end }) => assert_eq!((doc_id.as_str(), start, end), ("doc9", 0, 5)),
            other => panic!("{other:?}"),
        }
        let seq = encode_bio(&doc, &tokenize(text), true).unwrap();
        assert_eq!(seq.trigger_tags, tags(&["B-Tobacco"]));
    }

    #[test]
    fn decode_runs_and_repair() {
        let toks = tokenize("a b c d");
        let spans = decode_bio(&tags(&["O", "B-Tobacco", "I-Tobacco", "O"]), &toks, Layer::Trigger).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].first_token, spans[0].last_token), (1, 2));
        assert_eq!(spans[0].span, Span::new(2, 5));

        let toks = tokenize("a b");
        let spans = decode_bio(&tags(&["I-Drug", "O"]), &toks, Layer::Trigger).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].label.as_str(), spans[0].first_token, spans[0].last_token), ("Drug", 0, 0));

        assert!(decode_bio(&tags(&["O", "O"]), &toks, Layer::Trigger).unwrap().is_empty());
    }

    #[test]
    fn decode_switching_kind_starts_new_span() {
        let toks = tokenize("a b c");
        let spans = decode_bio(&tags(&["B-Drug", "I-Alcohol", "I-Alcohol"]), &toks, Layer::Trigger).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[1].first_token, spans[1].last_token), (1, 2));
    }

    #[test]
    fn decode_rejects_unknown_labels() {
        let toks = tokenize("a");
        assert!(matches!(decode_bio(&tags(&["B-Gambling"]), &toks, Layer::Trigger), Err(Error::Decode(_))));
        assert!(matches!(
            decode_bio(&tags(&["B-StatusTime.employed"]), &toks, Layer::Argument),
            Err(Error::Decode(_))
        ));
        assert!(matches!(decode_bio(&tags(&["X"]), &toks, Layer::Argument), Err(Error::Decode(_))));
        assert!(decode_bio(&tags(&[]), &toks, Layer::Argument).is_err());
    }
}
