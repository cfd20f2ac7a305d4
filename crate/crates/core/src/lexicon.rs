//! Coordinator kind rules shared by treebank conversion and inference.
//!
//! Paired coordinators are recognized from a small lexicon of left phrases
//! (`either`, `not only`, ...) and the right phrases they combine with. The
//! lexicon is data: the default ships in `data/paired.lex` and a replacement
//! can be parsed from any text in the same format.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::schema::{CoordinatorKind, CoordinatorSpan, Token, TokenSpan};

const DEFAULT_LEXICON: &str = include_str!("../data/paired.lex");

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub left: Vec<String>,
    pub rights: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairedLexicon {
    entries: Vec<PairEntry>,
}

impl Default for PairedLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

fn phrase(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn matches_at(tokens: &[Token], start: usize, phrase: &[String]) -> bool {
    start + phrase.len() <= tokens.len()
        && tokens[start..start + phrase.len()]
            .iter()
            .zip(phrase)
            .all(|(t, p)| t.text.to_lowercase() == *p)
}

impl PairedLexicon {
    /// Parses `left => right | right ...` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| LexiconError {
                line: i + 1,
                message: message.to_string(),
            };
            let (left, rights) = line.split_once("=>").ok_or_else(|| err("missing `=>`"))?;
            let left = phrase(left);
            let rights: Vec<Vec<String>> = rights
                .split('|')
                .map(phrase)
                .filter(|p| !p.is_empty())
                .collect();
            if left.is_empty() || rights.is_empty() {
                return Err(err("empty phrase"));
            }
            entries.push(PairEntry { left, rights });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PairEntry] {
        &self.entries
    }

    /// Finds a left phrase that ends exactly at `end` and pairs with the
    /// coordinator text `right` (lowercased words). Longest phrase wins.
    pub fn left_ending_at(&self, tokens: &[Token], end: usize, right: &[String]) -> Option<TokenSpan> {
        self.entries
            .iter()
            .filter(|e| e.rights.iter().any(|r| r.as_slice() == right))
            .filter(|e| e.left.len() <= end && matches_at(tokens, end - e.left.len(), &e.left))
            .map(|e| TokenSpan {
                start: end - e.left.len(),
                end,
            })
            .min_by_key(|s| s.start)
    }

    /// True when `span` is exactly a left phrase that pairs with `right`.
    pub fn is_left_for(&self, tokens: &[Token], span: TokenSpan, right: &[String]) -> bool {
        self.left_ending_at(tokens, span.end, right) == Some(span)
    }

    fn entry_for_left(&self, words: &[String]) -> Option<&PairEntry> {
        self.entries.iter().find(|e| e.left.as_slice() == words)
    }
}

/// Lowercased words of a span.
pub fn span_words(tokens: &[Token], span: TokenSpan) -> Vec<String> {
    tokens[span.start..span.end]
        .iter()
        .map(|t| t.text.to_lowercase())
        .collect()
}

pub fn is_respectively(tokens: &[Token], span: TokenSpan) -> bool {
    span.len() == 1 && tokens[span.start].text.eq_ignore_ascii_case("respectively")
}

/// Assigns kinds to raw coordinator spans found by the identifier.
///
/// * a span matching a lexicon left phrase is paired with the nearest later
///   span matching one of its right phrases;
/// * `respectively` is kept only when at least two non-paired-left
///   coordinators precede it, otherwise it is dropped as a plain adverb;
/// * everything else is contiguous.
pub fn classify_spans(
    tokens: &[Token],
    spans: &[TokenSpan],
    lexicon: &PairedLexicon,
) -> Vec<CoordinatorSpan> {
    let mut spans: Vec<TokenSpan> = spans.iter().copied().filter(|s| s.end <= tokens.len()).collect();
    spans.sort();
    spans.dedup();
    let words: Vec<Vec<String>> = spans.iter().map(|s| span_words(tokens, *s)).collect();
    let mut kinds: Vec<Option<CoordinatorSpan>> = alloc::vec![None; spans.len()];

    for i in 0..spans.len() {
        if kinds[i].is_some() || is_respectively(tokens, spans[i]) {
            continue;
        }
        let Some(entry) = lexicon.entry_for_left(&words[i]) else {
            continue;
        };
        let partner = (i + 1..spans.len()).find(|&j| {
            kinds[j].is_none() && entry.rights.iter().any(|r| *r == words[j])
        });
        if let Some(j) = partner {
            let (left, right) = CoordinatorSpan::paired(spans[i], spans[j]);
            kinds[i] = Some(left);
            kinds[j] = Some(right);
        }
    }

    let mut out = Vec::with_capacity(spans.len());
    for (i, span) in spans.iter().enumerate() {
        if let Some(c) = kinds[i] {
            out.push(c);
        } else if is_respectively(tokens, *span) {
            let inner = out
                .iter()
                .filter(|c: &&CoordinatorSpan| c.kind != CoordinatorKind::PairedLeft)
                .count();
            if inner >= 2 {
                out.push(CoordinatorSpan::respectively(*span));
            }
        } else {
            out.push(CoordinatorSpan::contiguous(*span));
        }
    }
    out
}
