//! Whitespace-and-punctuation tokenizer with exact character offsets.

use crate::corpus::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub span: Span,
}

/// Splits on whitespace, then emits every non-alphanumeric character
/// (punctuation, `/`, `-`, …) as its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_chars(&text.chars().collect::<Vec<_>>(), 0)
}

/// Tokenizes `chars`, reporting offsets shifted by `offset`.
pub(crate) fn tokenize_chars(chars: &[char], offset: usize) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    let flush = |tokens: &mut Vec<Token>, from: usize, to: usize| {
        tokens.push(Token {
            surface: chars[from..to].iter().collect(),
            span: Span::new(from + offset, to + offset),
        });
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            flush(&mut tokens, s, i);
        }
        if !c.is_whitespace() {
            flush(&mut tokens, i, i + 1);
        }
    }
    if let Some(s) = start {
        flush(&mut tokens, s, chars.len());
    }
    tokens
}

/// Tokens of `span` within `text`, with document-level offsets.
pub fn tokenize_span(text: &str, span: Span) -> Vec<Token> {
    let chars: Vec<char> = text.chars().skip(span.start).take(span.len()).collect();
    tokenize_chars(&chars, span.start)
}

const SENTENCE_END: &[&str] = &[".", ";", "!", "?"];

/// Sentence index per token. A sentence ends after a detached `.`, `;`, `!`
/// or `?` token, or where the gap to the next token contains a line break.
pub fn sentence_ids(text: &str, tokens: &[Token]) -> Vec<usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut ids = Vec::with_capacity(tokens.len());
    let mut sentence = 0;
    for (i, tok) in tokens.iter().enumerate() {
        ids.push(sentence);
        if let Some(next) = tokens.get(i + 1) {
            let gap = &chars[tok.span.end..next.span.start];
            let detached = !gap.is_empty();
            if gap.contains(&'\n') || (detached && SENTENCE_END.contains(&tok.surface.as_str())) {
                sentence += 1;
            }
        }
    }
    ids
}
