//! Rule-based isolation of the social-history section of a discharge report.

use std::path::Path;
use std::sync::OnceLock;

use crate::corpus::Span;
use crate::error::{Error, Result};

const DEFAULT_RULES: &str = include_str!("../data/sections.txt");

/// One section header together with the headers that end its section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionRule {
    pub header_pattern: String,
    pub terminator_patterns: Vec<String>,
}

/// Ordered rule list; the earliest header line in the note wins, and among
/// rules matching that same line the first rule wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sectionizer {
    rules: Vec<SectionRule>,
}

impl Sectionizer {
    pub fn new(rules: Vec<SectionRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Config("section rule list is empty".into()));
        }
        for rule in &rules {
            if rule.header_pattern.trim().is_empty() || rule.terminator_patterns.iter().any(|t| t.trim().is_empty()) {
                return Err(Error::Config("section patterns must be non-empty".into()));
            }
        }
        Ok(Sectionizer { rules })
    }

    /// Parses the plain-text rule format: `[header]` and `[terminator]`
    /// sections, one pattern per line, `#` comments. Every header shares the
    /// terminator list.
    pub fn parse(source: &str) -> Result<Self> {
        let mut headers = Vec::new();
        let mut terminators = Vec::new();
        let mut section: Option<&str> = None;
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[header]" => section = Some("header"),
                "[terminator]" => section = Some("terminator"),
                _ => match section {
                    Some("header") => headers.push(line.to_lowercase()),
                    Some(_) => terminators.push(line.to_lowercase()),
                    None => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: "pattern before any [header] or [terminator] marker".into(),
                        })
                    }
                },
            }
        }
        if headers.is_empty() {
            return Err(Error::Config("section rules define no header".into()));
        }
        let rules = headers
            .into_iter()
            .map(|header_pattern| SectionRule {
                header_pattern,
                terminator_patterns: terminators.clone(),
            })
            .collect();
        Sectionizer::new(rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Sectionizer::parse(&std::fs::read_to_string(path)?)
    }

    /// The rule list shipped in `data/sections.txt`.
    pub fn default_rules() -> &'static Sectionizer {
        static RULES: OnceLock<Sectionizer> = OnceLock::new();
        RULES.get_or_init(|| Sectionizer::parse(DEFAULT_RULES).expect("shipped section rules parse"))
    }

    pub fn rules(&self) -> &[SectionRule] {
        &self.rules
    }

    /// Character span of the social-history body: from just after the first
    /// header match (its colon included) to the start of the next recognized
    /// header line, whitespace-trimmed. `None` when no header matches or the
    /// body is blank.
    pub fn extract_social_history(&self, text: &str) -> Option<Span> {
        let chars: Vec<char> = text.chars().collect();
        let lines = line_starts(&chars);
        let (line_idx, rule, body_start) = lines.iter().enumerate().find_map(|(li, &(s, e))| {
            self.rules
                .iter()
                .find_map(|r| match_header(&chars[s..e], &r.header_pattern).map(|end| (li, r, s + end)))
        })?;
        let mut body_end = chars.len();
        for &(s, e) in &lines[line_idx + 1..] {
            let line = &chars[s..e];
            let terminates = rule
                .terminator_patterns
                .iter()
                .chain(self.rules.iter().map(|r| &r.header_pattern))
                .any(|p| match_header(line, p).is_some());
            if terminates {
                body_end = s;
                break;
            }
        }
        let mut start = body_start;
        let mut end = body_end;
        while start < end && chars[start].is_whitespace() {
            start += 1;
        }
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        (start < end).then(|| Span::new(start, end))
    }
}

/// Shorthand for [`Sectionizer::extract_social_history`] with the shipped rules.
pub fn extract_social_history(text: &str) -> Option<Span> {
    Sectionizer::default_rules().extract_social_history(text)
}

/// `(start, end)` char offsets of every line, newline excluded.
fn line_starts(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            out.push((start, i));
            start = i + 1;
        }
    }
    out.push((start, chars.len()));
    out
}

/// If `line` opens with `pattern` (after indentation, case-insensitive) followed
/// by optional blanks and then `:` or the end of the line, returns the offset
/// just past the header.
fn match_header(line: &[char], pattern: &str) -> Option<usize> {
    let mut i = line.iter().take_while(|c| **c == ' ' || **c == '\t').count();
    for p in pattern.chars() {
        let c = *line.get(i)?;
        if !c.to_lowercase().eq(p.to_lowercase()) {
            return None;
        }
        i += 1;
    }
    let mut j = i;
    while j < line.len() && (line[j] == ' ' || line[j] == '\t') {
        j += 1;
    }
    match line.get(j) {
        None => Some(line.len()),
        Some(':') => Some(j + 1),
        Some('\r') if j + 1 == line.len() => Some(line.len()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::char_slice;

    #[test]
    fn title_case_header() {
        let text = "HPI:\nfell.\nSocial History:\nLives alone. Former smoker.\nFamily History:\nnone\n";
        let span = extract_social_history(text).unwrap();
        assert_eq!(char_slice(text, span), "Lives alone. Former smoker.");
    }

    #[test]
    fn upper_case_header_gives_same_span() {
        let a = "x\nSocial History:\nLives alone.\nFamily History:\nnone";
        let b = "x\nSOCIAL HISTORY:\nLives alone.\nFamily History:\nnone";
        assert_eq!(extract_social_history(a), extract_social_history(b));
    }

    #[test]
    fn no_header_is_absent() {
        assert_eq!(extract_social_history("Chief Complaint:\ncough\n"), None);
        assert_eq!(extract_social_history(""), None);
    }

    #[test]
    fn same_line_content_and_end_of_text() {
        let text = "PMH: HTN\nSHx: lives w/ wife\n  - quit tob";
        let span = extract_social_history(text).unwrap();
        assert_eq!(char_slice(text, span), "lives w/ wife\n  - quit tob");
    }

    #[test]
    fn header_needs_colon_or_line_end() {
        assert_eq!(extract_social_history("social history is unknown\n"), None);
        let text = "Social Hx\nnon-smoker\nPE: ok";
        assert_eq!(char_slice(text, extract_social_history(text).unwrap()), "non-smoker");
    }

    #[test]
    fn first_header_wins_and_second_terminates() {
        let text = "Social History:\nfirst\nSocial Hx:\nsecond";
        assert_eq!(char_slice(text, extract_social_history(text).unwrap()), "first");
    }

    #[test]
    fn extraction_on_the_extracted_body_is_absent() {
        let text = "Social History:\nLives alone.\nFamily History:\nnone";
        let span = extract_social_history(text).unwrap();
        assert_eq!(extract_social_history(char_slice(text, span)), None);
    }

    #[test]
    fn custom_rule_file() {
        let rules = Sectionizer::parse("[header]\nhabits\n[terminator]\nplan\n").unwrap();
        let text = "Habits: jogs\nPlan: rest";
        assert_eq!(char_slice(text, rules.extract_social_history(text).unwrap()), "jogs");
        assert!(Sectionizer::parse("orphan\n").is_err());
        assert!(Sectionizer::parse("[terminator]\nplan\n").is_err());
    }

    #[test]
    fn multibyte_offsets_are_chars() {
        let text = "Über:\nx\nSocial History:\nvive solo — ok\nPE:";
        let span = extract_social_history(text).unwrap();
        assert_eq!(char_slice(text, span), "vive solo — ok");
    }
}
