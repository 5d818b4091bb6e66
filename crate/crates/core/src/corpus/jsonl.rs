//! Line-delimited JSON interchange format: one document per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{AnnotatedDocument, Argument, EventType, Role, SdohEvent, Span, StructuredRecord, Subtype};
use crate::error::{Error, Result};

/// A document together with its (optional) structured admission data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub document: AnnotatedDocument,
    pub structured: Option<StructuredRecord>,
}

impl Record {
    pub fn new(document: AnnotatedDocument, structured: Option<StructuredRecord>) -> Self {
        Record {
            document,
            structured,
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.document.doc_id
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    doc_id: String,
    text: String,
    social_history: Option<[usize; 2]>,
    events: Vec<EventWire>,
    #[serde(default)]
    structured: Option<StructuredRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventWire {
    #[serde(rename = "type")]
    event_type: EventType,
    trigger: [usize; 2],
    args: Vec<ArgWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArgWire {
    role: Role,
    span: [usize; 2],
    subtype: Option<Subtype>,
}

fn span_of(pair: [usize; 2]) -> Span {
    Span::new(pair[0], pair[1])
}

fn pair_of(span: Span) -> [usize; 2] {
    [span.start, span.end]
}

/// Parses and validates one record. `line_no` is 1-based and only used for messages.
pub fn parse_document_record(line: &str, line_no: usize) -> Result<Record> {
    let wire: RecordWire = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let events = wire
        .events
        .into_iter()
        .map(|e| SdohEvent {
            event_type: e.event_type,
            trigger: span_of(e.trigger),
            arguments: e
                .args
                .into_iter()
                .map(|a| Argument::new(a.role, span_of(a.span), a.subtype))
                .collect(),
        })
        .collect();
    let document = AnnotatedDocument {
        doc_id: wire.doc_id,
        text: wire.text,
        social_history: wire.social_history.map(span_of),
        events,
    };
    document
        .validate()
        .map_err(|e| e.context(format!("line {line_no}")))?;
    let structured = match wire.structured {
        Some(mut s) => {
            s.doc_id = document.doc_id.clone();
            s.validate().map_err(|e| e.context(format!("line {line_no}")))?;
            Some(s)
        }
        None => None,
    };
    Ok(Record {
        document,
        structured,
    })
}

/// Serializes one record to a single JSON line (no trailing newline).
pub fn serialize_document_record(record: &Record) -> Result<String> {
    let doc = &record.document;
    doc.validate()?;
    if let Some(s) = &record.structured {
        s.validate()?;
    }
    let wire = RecordWire {
        doc_id: doc.doc_id.clone(),
        text: doc.text.clone(),
        social_history: doc.social_history.map(pair_of),
        events: doc
            .events
            .iter()
            .map(|e| EventWire {
                event_type: e.event_type,
                trigger: pair_of(e.trigger),
                args: e
                    .arguments
                    .iter()
                    .map(|a| ArgWire {
                        role: a.role,
                        span: pair_of(a.span),
                        subtype: a.subtype,
                    })
                    .collect(),
            })
            .collect(),
        structured: record.structured.clone(),
    };
    Ok(serde_json::to_string(&wire)?)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_document_record(&line, i + 1)?);
    }
    Ok(records)
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        writeln!(out, "{}", serialize_document_record(record)?)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALCOHOL_LINE: &str = r#"{"doc_id":"d1","text":"Pt notes: alcohol abstain.","social_history":null,"events":[{"type":"Alcohol","trigger":[10,17],"args":[{"role":"StatusTime","span":[18,25],"subtype":"none"}]}],"structured":null}"#;

    #[test]
    fn parses_single_alcohol_event() {
        let rec = parse_document_record(ALCOHOL_LINE, 1).unwrap();
        let doc = &rec.document;
        assert_eq!(doc.events.len(), 1);
        let event = &doc.events[0];
        assert_eq!(event.event_type, EventType::Alcohol);
        assert_eq!(event.trigger, Span::new(10, 17));
        assert_eq!(event.arguments.len(), 1);
        assert_eq!(event.arguments[0].subtype, Some(Subtype::None));
        assert_eq!(event.spans().count(), 2);
        assert!(rec.structured.is_none());
    }

    #[test]
    fn empty_event_list_round_trips() {
        let line = r#"{"doc_id":"x","text":"nothing here","social_history":null,"events":[],"structured":null}"#;
        let rec = parse_document_record(line, 1).unwrap();
        assert!(rec.document.events.is_empty());
        let out = serialize_document_record(&rec).unwrap();
        assert!(out.contains(r#""events":[]"#));
        assert_eq!(out, line);
    }

    #[test]
    fn social_history_offsets_are_emitted() {
        let mut doc = AnnotatedDocument::new("s", "Social History:\nLives alone.");
        doc.social_history = Some(Span::new(16, 28));
        let out = serialize_document_record(&Record::new(doc, None)).unwrap();
        assert!(out.contains(r#""social_history":[16,28]"#));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_document_record("{\"doc_id\": ", 7).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
    }

    #[test]
    fn out_of_bounds_span_names_event() {
        let line = r#"{"doc_id":"d","text":"short","social_history":null,"events":[{"type":"Drug","trigger":[2,40],"args":[]}]}"#;
        let err = parse_document_record(line, 3).unwrap_err();
        assert!(err.is_validation());
        let msg = err.to_string();
        assert!(msg.contains("event 0 (Drug)"), "{msg}");
    }

    #[test]
    fn illegal_role_is_rejected() {
        let line = r#"{"doc_id":"d","text":"drinks beer daily","social_history":null,"events":[{"type":"Alcohol","trigger":[0,6],"args":[{"role":"StatusEmploy","span":[7,11],"subtype":"employed"}]}]}"#;
        let err = parse_document_record(line, 1).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn serialize_refuses_invalid_document() {
        let mut doc = AnnotatedDocument::new("bad", "abc");
        doc.events.push(SdohEvent::new(EventType::Tobacco, Span::new(1, 9)));
        assert!(serialize_document_record(&Record::new(doc, None)).is_err());
    }
}
