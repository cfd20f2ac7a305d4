//! Label alphabets and the mapping between coordination structures and
//! label sequences.
//!
//! Conjunct boundaries are encoded relative to one *target* coordinator: the
//! target tokens are `C`, each conjunct to its left is `B-before I-before*`,
//! each conjunct to its right is `B-after I-after*`, and everything else
//! (separating commas, other coordinators, shared context) is `O`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One word of a tokenized sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, index: usize) -> Self {
        Self {
            text: text.into(),
            index,
        }
    }
}

/// Builds a token list with contiguous indices starting at 0.
pub fn tokens_from_words<S: AsRef<str>>(words: &[S]) -> Vec<Token> {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| Token::new(w.as_ref(), i))
        .collect()
}

/// Whitespace tokenization, used wherever raw text is accepted.
pub fn tokenize_whitespace(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, w)| Token::new(w, i))
        .collect()
}

pub fn token_texts(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.text.as_str()).collect()
}

/// Serializes a token list as its word strings; indices are rebuilt on
/// deserialization.
pub mod serde_tokens {
    use super::Token;
    use alloc::string::String;
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(tokens: &[Token], s: S) -> Result<S::Ok, S::Error> {
        let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        words.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Token>, D::Error> {
        let words = Vec::<String>::deserialize(d)?;
        Ok(words
            .into_iter()
            .enumerate()
            .map(|(index, text)| Token { text, index })
            .collect())
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpan")]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Deserialize)]
struct RawSpan {
    start: usize,
    end: usize,
}

impl TryFrom<RawSpan> for TokenSpan {
    type Error = SchemaError;

    fn try_from(raw: RawSpan) -> Result<Self, Self::Error> {
        TokenSpan::new(raw.start, raw.end)
    }
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Result<Self, SchemaError> {
        if start >= end {
            return Err(SchemaError::EmptySpan { start, end });
        }
        Ok(Self { start, end })
    }

    /// Single-token span at `index`.
    pub const fn unit(index: usize) -> Self {
        Self {
            start: index,
            end: index + 1,
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub const fn len(&self) -> usize {
        self.end - self.start
    }

    pub const fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub const fn contains_span(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub const fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when `self` ends at or before the start of `other`.
    pub const fn precedes(&self, other: &TokenSpan) -> bool {
        self.end <= other.start
    }

    pub fn check_within(&self, len: usize) -> Result<(), SchemaError> {
        if self.end > len {
            return Err(SchemaError::SpanOutOfRange { span: *self, len });
        }
        Ok(())
    }

    pub fn text<'a>(&self, tokens: &'a [Token]) -> Vec<&'a str> {
        tokens[self.start..self.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect()
    }
}

impl fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Coordinator identifier alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IdentifierLabel {
    O,
    C,
}

impl IdentifierLabel {
    pub const ALL: [IdentifierLabel; 2] = [IdentifierLabel::O, IdentifierLabel::C];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            IdentifierLabel::O => "O",
            IdentifierLabel::C => "C",
        }
    }
}

/// Conjunct boundary detector alphabet. The declaration order is the
/// tie-break order used by decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorLabel {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "C")]
    C,
    #[serde(rename = "B-before")]
    BBefore,
    #[serde(rename = "I-before")]
    IBefore,
    #[serde(rename = "B-after")]
    BAfter,
    #[serde(rename = "I-after")]
    IAfter,
}

impl DetectorLabel {
    pub const COUNT: usize = 6;
    pub const ALL: [DetectorLabel; 6] = [
        DetectorLabel::O,
        DetectorLabel::C,
        DetectorLabel::BBefore,
        DetectorLabel::IBefore,
        DetectorLabel::BAfter,
        DetectorLabel::IAfter,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            DetectorLabel::O => "O",
            DetectorLabel::C => "C",
            DetectorLabel::BBefore => "B-before",
            DetectorLabel::IBefore => "I-before",
            DetectorLabel::BAfter => "B-after",
            DetectorLabel::IAfter => "I-after",
        }
    }

    pub const fn is_before(self) -> bool {
        matches!(self, DetectorLabel::BBefore | DetectorLabel::IBefore)
    }

    pub const fn is_after(self) -> bool {
        matches!(self, DetectorLabel::BAfter | DetectorLabel::IAfter)
    }

    pub const fn is_begin(self) -> bool {
        matches!(self, DetectorLabel::BBefore | DetectorLabel::BAfter)
    }
}

impl fmt::Display for DetectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorLabel {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownLabel(s.to_string()))
    }
}

impl FromStr for IdentifierLabel {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "O" => Ok(IdentifierLabel::O),
            "C" => Ok(IdentifierLabel::C),
            _ => Err(SchemaError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinatorKind {
    Contiguous,
    PairedLeft,
    PairedRight,
    Respectively,
}

impl CoordinatorKind {
    pub const ALL: [CoordinatorKind; 4] = [
        CoordinatorKind::Contiguous,
        CoordinatorKind::PairedLeft,
        CoordinatorKind::PairedRight,
        CoordinatorKind::Respectively,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            CoordinatorKind::Contiguous => "contiguous",
            CoordinatorKind::PairedLeft => "paired_left",
            CoordinatorKind::PairedRight => "paired_right",
            CoordinatorKind::Respectively => "respectively",
        }
    }
}

impl fmt::Display for CoordinatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A coordinator span with its kind. Paired halves point at each other
/// through `partner`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoordinatorSpan {
    #[serde(flatten)]
    pub span: TokenSpan,
    pub kind: CoordinatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<TokenSpan>,
}

impl CoordinatorSpan {
    pub const fn contiguous(span: TokenSpan) -> Self {
        Self {
            span,
            kind: CoordinatorKind::Contiguous,
            partner: None,
        }
    }

    pub const fn respectively(span: TokenSpan) -> Self {
        Self {
            span,
            kind: CoordinatorKind::Respectively,
            partner: None,
        }
    }

    /// Returns the `(left, right)` halves of a paired coordinator.
    pub const fn paired(left: TokenSpan, right: TokenSpan) -> (Self, Self) {
        (
            Self {
                span: left,
                kind: CoordinatorKind::PairedLeft,
                partner: Some(right),
            },
            Self {
                span: right,
                kind: CoordinatorKind::PairedRight,
                partner: Some(left),
            },
        )
    }

    /// Checks the kind/partner invariants and, when tokens are given, that a
    /// respectively span covers exactly that word.
    pub fn check(&self, tokens: Option<&[Token]>) -> Result<(), SchemaError> {
        let paired = matches!(
            self.kind,
            CoordinatorKind::PairedLeft | CoordinatorKind::PairedRight
        );
        match (paired, self.partner) {
            (true, None) | (false, Some(_)) => {
                return Err(SchemaError::PartnerMismatch { span: self.span })
            }
            (true, Some(partner)) => {
                let ordered = match self.kind {
                    CoordinatorKind::PairedLeft => partner.start >= self.span.end,
                    _ => partner.end <= self.span.start,
                };
                if !ordered {
                    return Err(SchemaError::PartnerMismatch { span: self.span });
                }
            }
            (false, None) => {}
        }
        if let (CoordinatorKind::Respectively, Some(tokens)) = (self.kind, tokens) {
            self.span.check_within(tokens.len())?;
            let ok = self.span.len() == 1
                && tokens[self.span.start]
                    .text
                    .eq_ignore_ascii_case("respectively");
            if !ok {
                return Err(SchemaError::NotRespectively { span: self.span });
            }
        }
        Ok(())
    }
}

/// One target coordinator with its conjuncts, sorted by start.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coordination {
    pub target: CoordinatorSpan,
    pub conjuncts: Vec<TokenSpan>,
}

impl Coordination {
    pub fn new(target: CoordinatorSpan, mut conjuncts: Vec<TokenSpan>) -> Self {
        conjuncts.sort();
        Self { target, conjuncts }
    }

    /// Structural checks shared by encoding and the full invariant check:
    /// everything in range, no conjunct touching the target, no two
    /// conjuncts overlapping.
    pub fn check_encodable(&self, sentence_len: usize) -> Result<(), SchemaError> {
        self.target.span.check_within(sentence_len)?;
        for c in &self.conjuncts {
            c.check_within(sentence_len)?;
            if c.overlaps(&self.target.span) {
                return Err(SchemaError::ConjunctOverlapsTarget { conjunct: *c });
            }
        }
        let mut sorted = self.conjuncts.clone();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0].overlaps(&pair[1]) {
                return Err(SchemaError::OverlappingConjuncts {
                    first: pair[0],
                    second: pair[1],
                });
            }
        }
        Ok(())
    }

    /// Full invariant check, including conjunct order and the requirement
    /// of at least one conjunct on each side (only the left side for a
    /// `respectively` target).
    pub fn check(&self, sentence_len: usize) -> Result<(), SchemaError> {
        self.check_encodable(sentence_len)?;
        if self.conjuncts.windows(2).any(|w| w[0] > w[1]) {
            return Err(SchemaError::UnsortedConjuncts);
        }
        let target = self.target.span;
        if !self.conjuncts.iter().any(|c| c.precedes(&target)) {
            return Err(SchemaError::MissingConjunctBefore { target });
        }
        if self.target.kind != CoordinatorKind::Respectively
            && !self.conjuncts.iter().any(|c| target.precedes(c))
        {
            return Err(SchemaError::MissingConjunctAfter { target });
        }
        Ok(())
    }

    pub fn before(&self) -> impl Iterator<Item = &TokenSpan> {
        let t = self.target.span;
        self.conjuncts.iter().filter(move |c| c.precedes(&t))
    }

    pub fn after(&self) -> impl Iterator<Item = &TokenSpan> {
        let t = self.target.span;
        self.conjuncts.iter().filter(move |c| t.precedes(c))
    }

    /// Smallest span covering the conjuncts and the target.
    pub fn region(&self) -> TokenSpan {
        let mut region = self.target.span;
        for c in &self.conjuncts {
            region.start = region.start.min(c.start);
            region.end = region.end.max(c.end);
        }
        region
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("empty span [{start},{end})")]
    EmptySpan { start: usize, end: usize },
    #[error("span {span} outside sentence of length {len}")]
    SpanOutOfRange { span: TokenSpan, len: usize },
    #[error("conjunct {conjunct} overlaps the target coordinator")]
    ConjunctOverlapsTarget { conjunct: TokenSpan },
    #[error("conjuncts {first} and {second} overlap")]
    OverlappingConjuncts { first: TokenSpan, second: TokenSpan },
    #[error("conjuncts are not sorted by start")]
    UnsortedConjuncts,
    #[error("no conjunct before target {target}")]
    MissingConjunctBefore { target: TokenSpan },
    #[error("no conjunct after target {target}")]
    MissingConjunctAfter { target: TokenSpan },
    #[error("paired coordinator {span} has an inconsistent partner")]
    PartnerMismatch { span: TokenSpan },
    #[error("respectively coordinator {span} does not cover the word `respectively`")]
    NotRespectively { span: TokenSpan },
    #[error("invalid label sequence at index {index}: {violation}")]
    InvalidLabels { index: usize, violation: Violation },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

/// Labels a sentence of `sentence_len` tokens for one coordination.
pub fn encode_labels(
    sentence_len: usize,
    coordination: &Coordination,
) -> Result<Vec<DetectorLabel>, SchemaError> {
    coordination.check_encodable(sentence_len)?;
    let mut labels = alloc::vec![DetectorLabel::O; sentence_len];
    let target = coordination.target.span;
    for label in &mut labels[target.start..target.end] {
        *label = DetectorLabel::C;
    }
    for c in &coordination.conjuncts {
        let (begin, inside) = if c.precedes(&target) {
            (DetectorLabel::BBefore, DetectorLabel::IBefore)
        } else {
            (DetectorLabel::BAfter, DetectorLabel::IAfter)
        };
        labels[c.start] = begin;
        for label in &mut labels[c.start + 1..c.end] {
            *label = inside;
        }
    }
    Ok(labels)
}

/// Reads conjuncts back out of a label sequence: every maximal
/// `B-x I-x*` run is one conjunct.
pub fn decode_labels(
    labels: &[DetectorLabel],
    target: &CoordinatorSpan,
) -> Result<Coordination, SchemaError> {
    let verdict = validate_labels(labels, target);
    if let Some(v) = verdict.violations.first() {
        return Err(SchemaError::InvalidLabels {
            index: v.index(),
            violation: v.clone(),
        });
    }
    let mut conjuncts = Vec::new();
    let mut open: Option<usize> = None;
    for (i, label) in labels.iter().enumerate() {
        match label {
            DetectorLabel::IBefore | DetectorLabel::IAfter => {}
            _ => {
                if let Some(start) = open.take() {
                    conjuncts.push(TokenSpan { start, end: i });
                }
                if label.is_begin() {
                    open = Some(i);
                }
            }
        }
    }
    if let Some(start) = open {
        conjuncts.push(TokenSpan {
            start,
            end: labels.len(),
        });
    }
    Ok(Coordination {
        target: *target,
        conjuncts,
    })
}

/// A hard grammar violation found by [`validate_labels`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The target span does not fit in the sequence.
    TargetOutOfRange { len: usize },
    /// A target position is not labeled `C`.
    MissingC { index: usize },
    /// `C` outside the target span.
    StrayC { index: usize },
    /// `I-x` not preceded by `B-x` or `I-x`.
    DanglingInside { index: usize },
    /// `B-after`/`I-after` left of the target.
    AfterTagBeforeTarget { index: usize },
    /// `B-before`/`I-before` right of the target.
    BeforeTagAfterTarget { index: usize },
}

impl Violation {
    pub fn index(&self) -> usize {
        match *self {
            Violation::TargetOutOfRange { len } => len,
            Violation::MissingC { index }
            | Violation::StrayC { index }
            | Violation::DanglingInside { index }
            | Violation::AfterTagBeforeTarget { index }
            | Violation::BeforeTagAfterTarget { index } => index,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TargetOutOfRange { len } => {
                write!(f, "target span exceeds sequence length {len}")
            }
            Violation::MissingC { index } => write!(f, "target position {index} is not C"),
            Violation::StrayC { index } => write!(f, "C at {index} outside the target"),
            Violation::DanglingInside { index } => {
                write!(f, "inside tag at {index} does not continue a conjunct")
            }
            Violation::AfterTagBeforeTarget { index } => {
                write!(f, "after-tag at {index} precedes the target")
            }
            Violation::BeforeTagAfterTarget { index } => {
                write!(f, "before-tag at {index} follows the target")
            }
        }
    }
}

/// Non-fatal structural remarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelWarning {
    /// No after-conjunct for a target that is not `respectively`.
    NoConjunctAfter,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelVerdict {
    pub violations: Vec<Violation>,
    pub warnings: Vec<LabelWarning>,
}

impl LabelVerdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a label sequence against the schema grammar
/// `O* (Bb Ib* O*)* C+ O* (Ba Ia* O*)*` with `C+` pinned to the target.
pub fn validate_labels(labels: &[DetectorLabel], target: &CoordinatorSpan) -> LabelVerdict {
    let mut verdict = LabelVerdict::default();
    let span = target.span;
    if span.end > labels.len() {
        verdict.violations.push(Violation::TargetOutOfRange { len: labels.len() });
        return verdict;
    }
    for (index, &label) in labels.iter().enumerate() {
        let inside_target = span.contains(index);
        let violation = if inside_target {
            (label != DetectorLabel::C).then_some(Violation::MissingC { index })
        } else if label == DetectorLabel::C {
            Some(Violation::StrayC { index })
        } else if index < span.start && label.is_after() {
            Some(Violation::AfterTagBeforeTarget { index })
        } else if index >= span.end && label.is_before() {
            Some(Violation::BeforeTagAfterTarget { index })
        } else {
            let prev = index.checked_sub(1).map(|p| labels[p]);
            match label {
                DetectorLabel::IBefore
                    if !matches!(
                        prev,
                        Some(DetectorLabel::BBefore | DetectorLabel::IBefore)
                    ) =>
                {
                    Some(Violation::DanglingInside { index })
                }
                DetectorLabel::IAfter
                    if !matches!(prev, Some(DetectorLabel::BAfter | DetectorLabel::IAfter)) =>
                {
                    Some(Violation::DanglingInside { index })
                }
                _ => None,
            }
        };
        if let Some(v) = violation {
            verdict.violations.push(v);
        }
    }
    if target.kind != CoordinatorKind::Respectively
        && !labels[span.end..].contains(&DetectorLabel::BAfter)
    {
        verdict.warnings.push(LabelWarning::NoConjunctAfter);
    }
    verdict
}

#[cfg(test)]
mod tests {
    use super::*;
    use DetectorLabel::*;

    fn sp(start: usize, end: usize) -> TokenSpan {
        TokenSpan::new(start, end).unwrap()
    }

    #[test]
    fn encodes_contiguous_list() {
        // My sister likes apples , pears , and grapes .
        let c = Coordination::new(
            CoordinatorSpan::contiguous(sp(7, 8)),
            vec![sp(3, 4), sp(5, 6), sp(8, 9)],
        );
        let labels = encode_labels(10, &c).unwrap();
        assert_eq!(labels, vec![O, O, O, BBefore, O, BBefore, O, C, BAfter, O]);
        let back = decode_labels(&labels, &c.target).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn encodes_minimal_coordination() {
        let c = Coordination::new(CoordinatorSpan::contiguous(sp(1, 2)), vec![sp(0, 1), sp(2, 3)]);
        assert_eq!(encode_labels(3, &c).unwrap(), vec![BBefore, C, BAfter]);
    }

    #[test]
    fn paired_right_leaves_partner_unlabeled() {
        // She can have either green tea or hot chocolate .
        let (_, right) = CoordinatorSpan::paired(sp(3, 4), sp(6, 7));
        let c = Coordination::new(right, vec![sp(4, 6), sp(7, 9)]);
        assert_eq!(
            encode_labels(10, &c).unwrap(),
            vec![O, O, O, O, BBefore, IBefore, C, BAfter, IAfter, O]
        );
    }

    #[test]
    fn encode_rejects_bad_structures() {
        let t = CoordinatorSpan::contiguous(sp(2, 3));
        let overlapping = Coordination::new(t, vec![sp(1, 3)]);
        assert!(matches!(
            encode_labels(5, &overlapping),
            Err(SchemaError::ConjunctOverlapsTarget { .. })
        ));
        let out_of_range = Coordination::new(t, vec![sp(0, 1), sp(3, 9)]);
        assert!(matches!(
            encode_labels(5, &out_of_range),
            Err(SchemaError::SpanOutOfRange { .. })
        ));
        let crossing = Coordination::new(t, vec![sp(0, 2), sp(1, 2)]);
        assert!(matches!(
            encode_labels(5, &crossing),
            Err(SchemaError::OverlappingConjuncts { .. })
        ));
    }

    #[test]
    fn decodes_runs() {
        let t = CoordinatorSpan::contiguous(sp(2, 3));
        let c = decode_labels(&[BBefore, IBefore, C, BAfter], &t).unwrap();
        assert_eq!(c.conjuncts, vec![sp(0, 2), sp(3, 4)]);

        let t = CoordinatorSpan::contiguous(sp(1, 2));
        let c = decode_labels(&[O, C, O], &t).unwrap();
        assert!(c.conjuncts.is_empty());
    }

    #[test]
    fn dangling_inside_is_reported_at_its_index() {
        let t = CoordinatorSpan::contiguous(sp(2, 3));
        let verdict = validate_labels(&[IBefore, O, C, BAfter], &t);
        assert_eq!(verdict.violations, vec![Violation::DanglingInside { index: 0 }]);
        let err = decode_labels(&[IBefore, O, C, BAfter], &t).unwrap_err();
        assert!(matches!(err, SchemaError::InvalidLabels { index: 0, .. }));
    }

    #[test]
    fn after_tag_before_target_is_invalid() {
        let t = CoordinatorSpan::contiguous(sp(1, 2));
        let verdict = validate_labels(&[BAfter, C, O], &t);
        assert_eq!(
            verdict.violations,
            vec![Violation::AfterTagBeforeTarget { index: 0 }]
        );
    }

    #[test]
    fn c_must_sit_exactly_on_target() {
        let t = CoordinatorSpan::contiguous(sp(1, 3));
        let verdict = validate_labels(&[C, C, O, O], &t);
        assert_eq!(
            verdict.violations,
            vec![Violation::StrayC { index: 0 }, Violation::MissingC { index: 2 }]
        );
        let verdict = validate_labels(&[O, C], &t);
        assert_eq!(verdict.violations, vec![Violation::TargetOutOfRange { len: 2 }]);
    }

    #[test]
    fn missing_after_part_is_only_a_warning() {
        let t = CoordinatorSpan::contiguous(sp(1, 2));
        let verdict = validate_labels(&[BBefore, C, O], &t);
        assert!(verdict.is_valid());
        assert_eq!(verdict.warnings, vec![LabelWarning::NoConjunctAfter]);

        let r = CoordinatorSpan::respectively(sp(1, 2));
        let verdict = validate_labels(&[BBefore, C, O], &r);
        assert!(verdict.is_valid());
        assert!(verdict.warnings.is_empty());
    }

    #[test]
    fn coordination_check_requires_both_sides() {
        let t = CoordinatorSpan::contiguous(sp(1, 2));
        let one_sided = Coordination::new(t, vec![sp(0, 1)]);
        assert!(matches!(
            one_sided.check(3),
            Err(SchemaError::MissingConjunctAfter { .. })
        ));
        let r = Coordination::new(CoordinatorSpan::respectively(sp(1, 2)), vec![sp(0, 1)]);
        assert!(r.check(3).is_ok());
    }

    #[test]
    fn coordinator_partner_invariants() {
        let (l, r) = CoordinatorSpan::paired(sp(3, 4), sp(6, 7));
        assert!(l.check(None).is_ok());
        assert!(r.check(None).is_ok());
        let broken = CoordinatorSpan {
            partner: None,
            ..l
        };
        assert!(broken.check(None).is_err());
        let tokens = tokenize_whitespace("named Jack and Sam respectively");
        assert!(CoordinatorSpan::respectively(sp(4, 5)).check(Some(&tokens)).is_ok());
        assert!(CoordinatorSpan::respectively(sp(2, 3)).check(Some(&tokens)).is_err());
    }

    #[test]
    fn label_strings_are_exact() {
        for l in DetectorLabel::ALL {
            assert_eq!(l.as_str().parse::<DetectorLabel>().unwrap(), l);
        }
        assert!("b-before".parse::<DetectorLabel>().is_err());
        assert!(TokenSpan::new(3, 3).is_err());
    }
}
