//! Annotation data model and the label inventory.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open character range `[start, end)` into a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shifted(&self, offset: usize) -> Span {
        Span::new(self.start + offset, self.end + offset)
    }

    /// Checks `0 <= start < end <= text_len`.
    pub fn validate(&self, text_len: usize) -> Result<()> {
        if self.start < self.end && self.end <= text_len {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "span {}..{} outside text of length {text_len}",
                self.start, self.end
            )))
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Validation(format!(
                        concat!("unknown ", stringify!($name), " '{}'"),
                        other
                    ))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_enum!(
    EventType {
        Alcohol => "Alcohol",
        Drug => "Drug",
        Tobacco => "Tobacco",
        Employment => "Employment",
        LivingStatus => "LivingStatus",
    }
);

string_enum!(
    Role {
        Amount => "Amount",
        Duration => "Duration",
        Frequency => "Frequency",
        History => "History",
        Method => "Method",
        StatusTime => "StatusTime",
        StatusEmploy => "StatusEmploy",
        Type => "Type",
        TypeLiving => "TypeLiving",
    }
);

string_enum!(
    Subtype {
        Current => "current",
        Past => "past",
        Future => "future",
        None => "none",
        Employed => "employed",
        Unemployed => "unemployed",
        Retired => "retired",
        OnDisability => "on_disability",
        Homemaker => "homemaker",
        Student => "student",
        Alone => "alone",
        Homeless => "homeless",
        WithFamily => "with_family",
        WithOthers => "with_others",
    }
);

string_enum!(
    /// The five studied social-determinant variables.
    SdohVariable {
        LivingStatus => "living_status",
        Employment => "employment",
        Alcohol => "alcohol",
        Drug => "drug",
        Tobacco => "tobacco",
    }
);

impl SdohVariable {
    pub fn event_type(&self) -> EventType {
        match self {
            SdohVariable::LivingStatus => EventType::LivingStatus,
            SdohVariable::Employment => EventType::Employment,
            SdohVariable::Alcohol => EventType::Alcohol,
            SdohVariable::Drug => EventType::Drug,
            SdohVariable::Tobacco => EventType::Tobacco,
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl EventType {
    pub fn is_substance(&self) -> bool {
        matches!(self, EventType::Alcohol | EventType::Drug | EventType::Tobacco)
    }

    /// Whether an argument with `role` may attach to an event of this type.
    pub fn admits(&self, role: Role) -> bool {
        match role {
            Role::StatusEmploy => *self == EventType::Employment,
            Role::TypeLiving => *self == EventType::LivingStatus,
            Role::Method => !matches!(self, EventType::Employment | EventType::LivingStatus),
            _ => true,
        }
    }
}

impl Role {
    /// Subtypes allowed for this role; empty for roles that carry none.
    pub fn subtypes(&self) -> &'static [Subtype] {
        use Subtype::*;
        match self {
            Role::StatusTime => &[Current, Past, Future, None],
            Role::StatusEmploy => &[Employed, Unemployed, Retired, OnDisability, Homemaker, Student],
            Role::TypeLiving => &[Alone, Homeless, WithFamily, WithOthers],
            _ => &[],
        }
    }

    pub fn has_subtype(&self) -> bool {
        !self.subtypes().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Argument {
    pub role: Role,
    pub span: Span,
    pub subtype: Option<Subtype>,
}

impl Argument {
    pub fn new(role: Role, span: Span, subtype: Option<Subtype>) -> Self {
        Argument { role, span, subtype }
    }

    /// Role/subtype legality, independent of the owning event.
    pub fn validate_labels(&self) -> Result<()> {
        match (self.role.has_subtype(), self.subtype) {
            (true, Some(st)) if self.role.subtypes().contains(&st) => Ok(()),
            (true, Some(st)) => Err(Error::Validation(format!(
                "subtype '{st}' is not allowed for role {}",
                self.role
            ))),
            (true, None) => Err(Error::Validation(format!(
                "role {} requires a subtype",
                self.role
            ))),
            (false, Some(st)) => Err(Error::Validation(format!(
                "role {} takes no subtype but got '{st}'",
                self.role
            ))),
            (false, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SdohEvent {
    pub event_type: EventType,
    pub trigger: Span,
    pub arguments: Vec<Argument>,
}

impl SdohEvent {
    pub fn new(event_type: EventType, trigger: Span) -> Self {
        SdohEvent {
            event_type,
            trigger,
            arguments: Vec::new(),
        }
    }

    pub fn with_argument(mut self, role: Role, span: Span, subtype: Option<Subtype>) -> Self {
        self.arguments.push(Argument::new(role, span, subtype));
        self
    }

    /// First subtype carried by an argument with the given role.
    pub fn subtype_of(&self, role: Role) -> Option<Subtype> {
        self.arguments
            .iter()
            .find(|a| a.role == role)
            .and_then(|a| a.subtype)
    }

    pub fn validate(&self, text_len: usize) -> Result<()> {
        self.trigger.validate(text_len)?;
        for arg in &self.arguments {
            arg.span.validate(text_len)?;
            arg.validate_labels()?;
            if !self.event_type.admits(arg.role) {
                return Err(Error::Validation(format!(
                    "role {} is not allowed on {} events",
                    arg.role, self.event_type
                )));
            }
        }
        Ok(())
    }

    /// Every annotated span of the event, trigger first.
    pub fn spans(&self) -> impl Iterator<Item = Span> + '_ {
        std::iter::once(self.trigger).chain(self.arguments.iter().map(|a| a.span))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub social_history: Option<Span>,
    pub events: Vec<SdohEvent>,
}

impl AnnotatedDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        AnnotatedDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            social_history: None,
            events: Vec::new(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring for a character span.
    pub fn slice(&self, span: Span) -> &str {
        char_slice(&self.text, span)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.char_len();
        if let Some(sh) = self.social_history {
            sh.validate(len)
                .map_err(|e| e.context(format!("document {} social_history", self.doc_id)))?;
        }
        for (i, event) in self.events.iter().enumerate() {
            event.validate(len).map_err(|e| {
                e.context(format!(
                    "document {} event {i} ({})",
                    self.doc_id, event.event_type
                ))
            })?;
            if let Some(sh) = self.social_history {
                if let Some(span) = event.spans().find(|s| !sh.contains(s)) {
                    return Err(Error::Validation(format!(
                        "document {} event {i} ({}): span {span} lies outside the social history section {sh}",
                        self.doc_id, event.event_type
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Slices `text` by character offsets.
pub fn char_slice(text: &str, span: Span) -> &str {
    let start = byte_offset(text, span.start);
    let end = byte_offset(text, span.end);
    &text[start..end]
}

pub(crate) fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(text.len())
}

/// Declared level sets for the structured covariates.
pub mod levels {
    pub const GENDER: &[&str] = &["Female", "Male"];
    pub const ETHNICITY: &[&str] = &["Asian", "Black", "Hispanic", "Not specified", "Other", "White"];
    pub const RELIGION: &[&str] = &["Catholic", "Jewish", "Not specified", "Other"];
    pub const ADMISSION_TYPE: &[&str] = &["Elective", "Emergency", "Urgent"];
    pub const MARITAL_STATUS: &[&str] = &["Divorced", "Married", "Separated", "Single", "Widowed"];
    pub const ADMISSION_LOCATION: &[&str] = &[
        "Clinic referral",
        "Emergency room",
        "Physician referral",
        "Transfer from hospital",
    ];
    pub const INSURANCE: &[&str] = &["Government", "Medicaid", "Medicare", "Private", "Self pay"];

    pub fn check(variable: &str, allowed: &[&str], value: &str) -> crate::Result<()> {
        if allowed.contains(&value) {
            Ok(())
        } else {
            Err(crate::Error::Validation(format!(
                "{variable} level '{value}' is not one of {allowed:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredRecord {
    #[serde(skip)]
    pub doc_id: String,
    pub age: i64,
    pub gender: String,
    pub ethnicity: String,
    pub religion: String,
    pub marital_status: Option<String>,
    pub admission_location: Option<String>,
    pub insurance: Option<String>,
    pub admission_type: String,
    pub code_status_entries: Vec<String>,
}

impl StructuredRecord {
    pub fn validate(&self) -> Result<()> {
        if !(18..=89).contains(&self.age) {
            return Err(Error::Validation(format!(
                "document {}: age {} outside 18..=89",
                self.doc_id, self.age
            )));
        }
        levels::check("gender", levels::GENDER, &self.gender)?;
        levels::check("ethnicity", levels::ETHNICITY, &self.ethnicity)?;
        levels::check("religion", levels::RELIGION, &self.religion)?;
        levels::check("admission_type", levels::ADMISSION_TYPE, &self.admission_type)?;
        if let Some(v) = &self.marital_status {
            levels::check("marital_status", levels::MARITAL_STATUS, v)?;
        }
        if let Some(v) = &self.admission_location {
            levels::check("admission_location", levels::ADMISSION_LOCATION, v)?;
        }
        if let Some(v) = &self.insurance {
            levels::check("insurance", levels::INSURANCE, v)?;
        }
        Ok(())
    }
}
