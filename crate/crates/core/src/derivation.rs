//! Study variables from extracted events, and the DNR/DNI outcome.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDocument, EventType, Record, Role, SdohEvent, SdohVariable, StructuredRecord, Subtype};
use crate::error::{Error, Result};

const DEFAULT_CODE_STATUS: &str = include_str!("../data/code_status.txt");

/// Tri-state value of a study variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Positive,
    Rest,
    Missing,
}

impl Level {
    /// CSV spelling: "positive", "rest", or empty for missing.
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Positive => "positive",
            Level::Rest => "rest",
            Level::Missing => "",
        }
    }

    pub fn parse(s: &str) -> Result<Level> {
        match s.trim() {
            "positive" => Ok(Level::Positive),
            "rest" => Ok(Level::Rest),
            "" => Ok(Level::Missing),
            other => Err(Error::Validation(format!("unknown SDoH level '{other}'"))),
        }
    }

    pub fn is_missing(&self) -> bool {
        *self == Level::Missing
    }
}

/// Name of the positive level of each variable.
pub fn positive_level_name(var: SdohVariable) -> &'static str {
    match var {
        SdohVariable::LivingStatus => "with_family",
        SdohVariable::Employment => "employed",
        _ => "current_or_past",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SdohProfile {
    pub living_status: Level,
    pub employment: Level,
    pub alcohol: Level,
    pub drug: Level,
    pub tobacco: Level,
}

impl SdohProfile {
    pub fn missing() -> Self {
        SdohProfile::from_levels([Level::Missing; 5])
    }

    /// Levels indexed by [`SdohVariable::index`].
    pub fn from_levels(l: [Level; 5]) -> Self {
        SdohProfile {
            living_status: l[0],
            employment: l[1],
            alcohol: l[2],
            drug: l[3],
            tobacco: l[4],
        }
    }

    pub fn levels(&self) -> [Level; 5] {
        [self.living_status, self.employment, self.alcohol, self.drug, self.tobacco]
    }

    pub fn get(&self, var: SdohVariable) -> Level {
        self.levels()[var.index()]
    }

    pub fn set(&mut self, var: SdohVariable, level: Level) {
        let mut l = self.levels();
        l[var.index()] = level;
        *self = SdohProfile::from_levels(l);
    }
}

/// One admission of the association study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub doc_id: String,
    pub outcome: bool,
    pub profile: SdohProfile,
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
    pub religion: Option<String>,
    pub marital_status: Option<String>,
    pub admission_location: Option<String>,
    pub insurance: Option<String>,
    pub admission_type: Option<String>,
}

fn status_time(e: &SdohEvent) -> Option<Subtype> {
    e.subtype_of(Role::StatusTime)
}

fn living_level(events: &[&SdohEvent]) -> Level {
    let current: Vec<_> = events
        .iter()
        .filter(|e| status_time(e) == Some(Subtype::Current))
        .filter_map(|e| e.subtype_of(Role::TypeLiving))
        .collect();
    if current.contains(&Subtype::WithFamily) {
        Level::Positive
    } else if !current.is_empty() {
        Level::Rest
    } else {
        Level::Missing
    }
}

fn employment_level(events: &[&SdohEvent]) -> Level {
    let statuses: Vec<_> = events.iter().filter_map(|e| e.subtype_of(Role::StatusEmploy)).collect();
    if statuses.contains(&Subtype::Employed) {
        Level::Positive
    } else if !statuses.is_empty() {
        Level::Rest
    } else {
        Level::Missing
    }
}

fn substance_level(events: &[&SdohEvent]) -> Level {
    if events.is_empty() {
        Level::Missing
    } else if events.iter().any(|e| status_time(e) != Some(Subtype::None)) {
        Level::Positive
    } else {
        Level::Rest
    }
}

/// Maps one admission's events to the five study variables.
pub fn derive_sdoh(events: &[SdohEvent]) -> SdohProfile {
    let of = |t: EventType| events.iter().filter(|e| e.event_type == t).collect::<Vec<_>>();
    SdohProfile {
        living_status: living_level(&of(EventType::LivingStatus)),
        employment: employment_level(&of(EventType::Employment)),
        alcohol: substance_level(&of(EventType::Alcohol)),
        drug: substance_level(&of(EventType::Drug)),
        tobacco: substance_level(&of(EventType::Tobacco)),
    }
}

/// DNR/DNI and full-code phrase lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeStatusLexicon {
    pub dnr: Vec<String>,
    pub full_code: Vec<String>,
}

impl CodeStatusLexicon {
    /// Parses `[dnr]` and `[full_code]` sections, one phrase per line, `#` comments.
    pub fn parse(source: &str) -> Result<Self> {
        let mut dnr = Vec::new();
        let mut full_code = Vec::new();
        let mut section = None;
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[dnr]" => section = Some(true),
                "[full_code]" => section = Some(false),
                _ => match section {
                    Some(true) => dnr.push(line.to_lowercase()),
                    Some(false) => full_code.push(line.to_lowercase()),
                    None => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: "phrase before any [dnr] or [full_code] marker".into(),
                        })
                    }
                },
            }
        }
        if dnr.is_empty() || full_code.is_empty() {
            return Err(Error::Config("code-status lexicon needs [dnr] and [full_code] phrases".into()));
        }
        Ok(CodeStatusLexicon { dnr, full_code })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        CodeStatusLexicon::parse(&std::fs::read_to_string(path)?)
    }

    /// The lexicon shipped in `data/code_status.txt`.
    pub fn default_lexicon() -> &'static CodeStatusLexicon {
        static LEX: OnceLock<CodeStatusLexicon> = OnceLock::new();
        LEX.get_or_init(|| CodeStatusLexicon::parse(DEFAULT_CODE_STATUS).expect("shipped lexicon parses"))
    }

    pub fn mentions_dnr(&self, text: &str) -> bool {
        self.dnr.iter().any(|p| contains_phrase(text, p))
    }

    pub fn mentions_full_code(&self, text: &str) -> bool {
        self.full_code.iter().any(|p| contains_phrase(text, p))
    }

    /// Structured entries decide first; otherwise a DNR/DNI mention in the
    /// text counts only when no full-code phrase appears.
    pub fn derive_outcome(&self, structured: Option<&StructuredRecord>, full_text: &str) -> bool {
        let structured_hit = structured
            .map(|s| s.code_status_entries.iter().any(|e| self.mentions_dnr(e)))
            .unwrap_or(false);
        structured_hit || (self.mentions_dnr(full_text) && !self.mentions_full_code(full_text))
    }
}

/// Shorthand for [`CodeStatusLexicon::derive_outcome`] with the shipped lexicon.
pub fn derive_outcome(structured: Option<&StructuredRecord>, full_text: &str) -> bool {
    CodeStatusLexicon::default_lexicon().derive_outcome(structured, full_text)
}

/// Case-insensitive phrase search where the match may not touch an
/// alphanumeric character on either side.
fn contains_phrase(text: &str, phrase: &str) -> bool {
    let hay: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let needle: Vec<char> = phrase.chars().flat_map(char::to_lowercase).collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    (0..=hay.len() - needle.len()).any(|i| {
        hay[i..i + needle.len()] == needle[..]
            && (i == 0 || !hay[i - 1].is_alphanumeric())
            && hay.get(i + needle.len()).map_or(true, |c| !c.is_alphanumeric())
    })
}

/// Builds the study row of one admission from `events` (gold or predicted).
pub fn study_row(
    doc: &AnnotatedDocument,
    structured: Option<&StructuredRecord>,
    events: &[SdohEvent],
    lexicon: &CodeStatusLexicon,
) -> StudyRow {
    StudyRow {
        doc_id: doc.doc_id.clone(),
        outcome: lexicon.derive_outcome(structured, &doc.text),
        profile: derive_sdoh(events),
        age: structured.map(|s| s.age as f64),
        gender: structured.map(|s| s.gender.clone()),
        ethnicity: structured.map(|s| s.ethnicity.clone()),
        religion: structured.map(|s| s.religion.clone()),
        marital_status: structured.and_then(|s| s.marital_status.clone()),
        admission_location: structured.and_then(|s| s.admission_location.clone()),
        insurance: structured.and_then(|s| s.insurance.clone()),
        admission_type: structured.map(|s| s.admission_type.clone()),
    }
}

/// Study rows for a corpus, using each record's own events.
pub fn study_rows(records: &[Record], lexicon: &CodeStatusLexicon) -> Vec<StudyRow> {
    records
        .iter()
        .map(|r| study_row(&r.document, r.structured.as_ref(), &r.document.events, lexicon))
        .collect()
}

pub const STUDY_CSV_HEADER: &[&str] = &[
    "doc_id",
    "outcome",
    "living_status",
    "employment",
    "alcohol",
    "drug",
    "tobacco",
    "age",
    "gender",
    "ethnicity",
    "religion",
    "marital_status",
    "admission_location",
    "insurance",
    "admission_type",
];

fn opt(s: &Option<String>) -> &str {
    s.as_deref().unwrap_or("")
}

fn format_age(age: Option<f64>) -> String {
    age.map(|a| if a.fract() == 0.0 { format!("{a:.0}") } else { a.to_string() })
        .unwrap_or_default()
}

pub fn write_study_csv<W: std::io::Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_CSV_HEADER)?;
    for r in rows {
        let mut rec = vec![r.doc_id.clone(), (r.outcome as u8).to_string()];
        rec.extend(r.profile.levels().iter().map(|l| l.as_str().to_string()));
        rec.push(format_age(r.age));
        for s in [
            &r.gender,
            &r.ethnicity,
            &r.religion,
            &r.marital_status,
            &r.admission_location,
            &r.insurance,
            &r.admission_type,
        ] {
            rec.push(opt(s).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_study_csv<R: std::io::Read>(input: R) -> Result<Vec<StudyRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != STUDY_CSV_HEADER {
        return Err(Error::Validation(format!("unexpected analysis-table header {header:?}")));
    }
    let some = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |m: String| Error::Parse { line, message: m };
        let outcome = match &rec[1] {
            "1" => true,
            "0" => false,
            o => return Err(bad(format!("outcome '{o}' is not 0 or 1"))),
        };
        let mut levels = [Level::Missing; 5];
        for (k, l) in levels.iter_mut().enumerate() {
            *l = Level::parse(&rec[2 + k]).map_err(|e| bad(e.to_string()))?;
        }
        let age = match &rec[7] {
            "" => None,
            a => Some(a.parse::<f64>().map_err(|_| bad(format!("age '{a}' is not a number")))?),
        };
        rows.push(StudyRow {
            doc_id: rec[0].to_string(),
            outcome,
            profile: SdohProfile::from_levels(levels),
            age,
            gender: some(&rec[8]),
            ethnicity: some(&rec[9]),
            religion: some(&rec[10]),
            marital_status: some(&rec[11]),
            admission_location: some(&rec[12]),
            insurance: some(&rec[13]),
            admission_type: some(&rec[14]),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn ev(t: EventType) -> SdohEvent {
        SdohEvent::new(t, Span::new(0, 1))
    }

    fn with(e: SdohEvent, role: Role, st: Subtype) -> SdohEvent {
        e.with_argument(role, Span::new(2, 3), Some(st))
    }

    #[test]
    fn substance_timing() {
        let past = with(ev(EventType::Tobacco), Role::StatusTime, Subtype::Past);
        assert_eq!(derive_sdoh(&[past]).tobacco, Level::Positive);
        let none = with(ev(EventType::Alcohol), Role::StatusTime, Subtype::None);
        assert_eq!(derive_sdoh(&[none.clone()]).alcohol, Level::Rest);
        assert_eq!(derive_sdoh(&[ev(EventType::Alcohol)]).alcohol, Level::Positive);
        assert_eq!(derive_sdoh(&[none, ev(EventType::Alcohol)]).alcohol, Level::Positive);
        assert_eq!(derive_sdoh(&[]).drug, Level::Missing);
    }

    #[test]
    fn employment_levels() {
        assert_eq!(derive_sdoh(&[]).employment, Level::Missing);
        let retired = with(ev(EventType::Employment), Role::StatusEmploy, Subtype::Retired);
        assert_eq!(derive_sdoh(&[retired.clone()]).employment, Level::Rest);
        let employed = with(ev(EventType::Employment), Role::StatusEmploy, Subtype::Employed);
        assert_eq!(derive_sdoh(&[retired, employed]).employment, Level::Positive);
        assert_eq!(derive_sdoh(&[ev(EventType::Employment)]).employment, Level::Missing);
    }

    #[test]
    fn living_needs_current_timing() {
        let fam = with(ev(EventType::LivingStatus), Role::TypeLiving, Subtype::WithFamily);
        let past = with(fam.clone(), Role::StatusTime, Subtype::Past);
        assert_eq!(derive_sdoh(&[past]).living_status, Level::Missing);
        let cur = with(fam, Role::StatusTime, Subtype::Current);
        assert_eq!(derive_sdoh(&[cur]).living_status, Level::Positive);
        let alone = with(
            with(ev(EventType::LivingStatus), Role::TypeLiving, Subtype::Alone),
            Role::StatusTime,
            Subtype::Current,
        );
        assert_eq!(derive_sdoh(&[alone]).living_status, Level::Rest);
    }

    fn rec(entries: &[&str]) -> StructuredRecord {
        StructuredRecord {
            doc_id: "d".into(),
            age: 60,
            gender: "Male".into(),
            ethnicity: "White".into(),
            religion: "Other".into(),
            marital_status: None,
            admission_location: None,
            insurance: None,
            admission_type: "Urgent".into(),
            code_status_entries: entries.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn outcome_paths() {
        assert!(derive_outcome(Some(&rec(&["Do Not Resuscitate"])), ""));
        assert!(derive_outcome(Some(&rec(&[])), "confirmed DNR/DNI with family"));
        assert!(!derive_outcome(Some(&rec(&[])), "DNR discussed; patient remains full code"));
        assert!(derive_outcome(Some(&rec(&["Full code", "DNR"])), "remains full code"));
        assert!(!derive_outcome(None, "no code status"));
    }

    #[test]
    fn phrases_need_word_boundaries() {
        assert!(!contains_phrase("ADNRX", "dnr"));
        assert!(contains_phrase("(DNR)", "dnr"));
        assert!(contains_phrase("was DNI.", "dni"));
        assert!(contains_phrase("Full-Code", "full-code"));
        assert!(!contains_phrase("full codes", "full code"));
    }

    #[test]
    fn csv_round_trip() {
        let mut profile = SdohProfile::missing();
        profile.set(SdohVariable::Drug, Level::Rest);
        profile.set(SdohVariable::LivingStatus, Level::Positive);
        let rows = vec![StudyRow {
            doc_id: "B1".into(),
            outcome: true,
            profile,
            age: Some(71.0),
            gender: Some("Female".into()),
            ethnicity: Some("White".into()),
            religion: Some("Jewish".into()),
            marital_status: None,
            admission_location: Some("Emergency room".into()),
            insurance: Some("Medicare".into()),
            admission_type: Some("Emergency".into()),
        }];
        let mut buf = Vec::new();
        write_study_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("B1,1,positive,,,rest,,71,Female"));
        assert_eq!(read_study_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn gold_events_recover_latent_states() {
        use crate::corpus::{generate_synthetic, SynthConfig};
        let corpus = generate_synthetic(&SynthConfig::institution_b(300, 5)).unwrap();
        let rows = study_rows(&corpus.records, CodeStatusLexicon::default_lexicon());
        for (row, truth) in rows.iter().zip(&corpus.truth) {
            assert_eq!(row.outcome, truth.outcome, "{}", row.doc_id);
            for var in SdohVariable::ALL {
                let expect = match (truth.documented[var.index()], truth.positive[var.index()]) {
                    (false, _) => Level::Missing,
                    (true, true) => Level::Positive,
                    (true, false) => Level::Rest,
                };
                assert_eq!(row.profile.get(*var), expect, "{} {var}", row.doc_id);
            }
        }
    }
}
