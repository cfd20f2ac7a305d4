//! Bracketed constituency trees and their conversion into gold
//! coordinations and training instances.
//!
//! A `CC` or `CONJP` constituent is a coordinator; its sibling constituents
//! are its conjuncts, minus punctuation, other coordinators and bare
//! adverbs. Paired left halves come from the [`PairedLexicon`], and a
//! `respectively` ties together two earlier coordinations with the same
//! number of conjuncts.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{span_words, PairedLexicon};
use crate::pipeline::{AnnotatedSentence, RespectivelyLink};
use crate::schema::{
    decode_labels, encode_labels, serde_tokens, validate_labels, Coordination, CoordinatorKind,
    CoordinatorSpan, DetectorLabel, IdentifierLabel, SchemaError, Token, TokenSpan,
};

/// A constituency tree node. Terminals are nodes without children whose
/// label is the word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstTree {
    pub label: String,
    pub children: Vec<ConstTree>,
}

impl ConstTree {
    pub fn leaf(word: impl Into<String>) -> Self {
        Self {
            label: word.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ConstTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_preterminal(&self) -> bool {
        !self.children.is_empty() && self.children.iter().all(ConstTree::is_terminal)
    }

    /// Tag without function suffixes or indices (`NP-SBJ-1` -> `NP`).
    pub fn base_label(&self) -> &str {
        base_label(&self.label)
    }

    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_terminal() {
            out.push(&self.label);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.leaves()
            .into_iter()
            .enumerate()
            .map(|(i, w)| Token::new(w, i))
            .collect()
    }
}

impl fmt::Display for ConstTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_terminal() {
            return f.write_str(&self.label);
        }
        write!(f, "({}", self.label)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    label.split(['-', '=']).next().unwrap_or(label)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Input ended inside an open constituent.
    Unbalanced,
    /// `)` with no matching `(`.
    UnexpectedClose,
    /// `()` or a labeled node without children.
    EmptyConstituent,
    /// Text after a complete tree.
    TrailingInput,
    /// No tree in the input, or nothing left after removing empty elements.
    NoTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("{kind:?} at byte offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
    Eof(usize),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<Lexeme<'a>>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            peeked: None,
        }
    }

    fn peek(&mut self) -> Lexeme<'a> {
        if let Some(l) = self.peeked {
            return l;
        }
        let l = self.scan();
        self.peeked = Some(l);
        l
    }

    fn next(&mut self) -> Lexeme<'a> {
        match self.peeked.take() {
            Some(l) => l,
            None => self.scan(),
        }
    }

    fn scan(&mut self) -> Lexeme<'a> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        match bytes.get(start) {
            None => Lexeme::Eof(start),
            Some(b'(') => {
                self.pos += 1;
                Lexeme::Open(start)
            }
            Some(b')') => {
                self.pos += 1;
                Lexeme::Close(start)
            }
            Some(_) => {
                while self.pos < bytes.len()
                    && !bytes[self.pos].is_ascii_whitespace()
                    && bytes[self.pos] != b'('
                    && bytes[self.pos] != b')'
                {
                    self.pos += 1;
                }
                Lexeme::Atom(start, &self.src[start..self.pos])
            }
        }
    }
}

fn parse_node(lex: &mut Lexer<'_>, open: usize) -> Result<ConstTree, ParseError> {
    let err = |offset, kind| ParseError { offset, kind };
    let label = match lex.peek() {
        Lexeme::Atom(_, a) => {
            lex.next();
            a.to_string()
        }
        Lexeme::Open(_) => String::new(),
        Lexeme::Close(_) => return Err(err(open, ParseErrorKind::EmptyConstituent)),
        Lexeme::Eof(p) => return Err(err(p, ParseErrorKind::Unbalanced)),
    };
    let mut children = Vec::new();
    loop {
        match lex.next() {
            Lexeme::Open(p) => children.push(parse_node(lex, p)?),
            Lexeme::Atom(_, a) => children.push(ConstTree::leaf(decode_escape(a))),
            Lexeme::Close(_) => break,
            Lexeme::Eof(p) => return Err(err(p, ParseErrorKind::Unbalanced)),
        }
    }
    if children.is_empty() {
        return Err(err(open, ParseErrorKind::EmptyConstituent));
    }
    Ok(ConstTree { label, children })
}

fn decode_escape(word: &str) -> String {
    match word {
        "-LRB-" => "(",
        "-RRB-" => ")",
        "-LCB-" => "{",
        "-RCB-" => "}",
        "-LSB-" => "[",
        "-RSB-" => "]",
        w => w,
    }
    .to_string()
}

/// Drops `-NONE-` subtrees and any node they leave childless. Returns
/// `None` when nothing survives.
fn prune_empty(tree: ConstTree) -> Option<ConstTree> {
    if tree.is_terminal() {
        return Some(tree);
    }
    if tree.label == "-NONE-" {
        return None;
    }
    let children: Vec<ConstTree> = tree.children.into_iter().filter_map(prune_empty).collect();
    if children.is_empty() {
        None
    } else {
        Some(ConstTree {
            label: tree.label,
            children,
        })
    }
}

fn finish_tree(tree: ConstTree, offset: usize) -> Result<ConstTree, ParseError> {
    let mut tree = prune_empty(tree).ok_or(ParseError {
        offset,
        kind: ParseErrorKind::NoTree,
    })?;
    // `( (S ...) )` wrapper used by treebank exports.
    while tree.label.is_empty() && tree.children.len() == 1 && !tree.children[0].is_terminal() {
        tree = tree.children.remove(0);
    }
    Ok(tree)
}

/// Parses exactly one bracketed tree.
pub fn parse_bracketed(text: &str) -> Result<ConstTree, ParseError> {
    let mut lex = Lexer::new(text);
    let tree = match lex.next() {
        Lexeme::Open(p) => finish_tree(parse_node(&mut lex, p)?, p)?,
        Lexeme::Close(p) => {
            return Err(ParseError {
                offset: p,
                kind: ParseErrorKind::UnexpectedClose,
            })
        }
        Lexeme::Atom(p, _) => {
            return Err(ParseError {
                offset: p,
                kind: ParseErrorKind::TrailingInput,
            })
        }
        Lexeme::Eof(p) => {
            return Err(ParseError {
                offset: p,
                kind: ParseErrorKind::NoTree,
            })
        }
    };
    match lex.next() {
        Lexeme::Eof(_) => Ok(tree),
        Lexeme::Close(p) => Err(ParseError {
            offset: p,
            kind: ParseErrorKind::UnexpectedClose,
        }),
        Lexeme::Open(p) | Lexeme::Atom(p, _) => Err(ParseError {
            offset: p,
            kind: ParseErrorKind::TrailingInput,
        }),
    }
}

/// Parses a sequence of trees (blank lines between them are optional).
/// Each tree is returned with the byte offset where it starts.
pub fn parse_forest(text: &str) -> Result<Vec<(usize, ConstTree)>, ParseError> {
    let mut lex = Lexer::new(text);
    let mut trees = Vec::new();
    loop {
        match lex.next() {
            Lexeme::Eof(_) => return Ok(trees),
            Lexeme::Open(p) => trees.push((p, finish_tree(parse_node(&mut lex, p)?, p)?)),
            Lexeme::Close(p) => {
                return Err(ParseError {
                    offset: p,
                    kind: ParseErrorKind::UnexpectedClose,
                })
            }
            Lexeme::Atom(p, _) => {
                return Err(ParseError {
                    offset: p,
                    kind: ParseErrorKind::TrailingInput,
                })
            }
        }
    }
}

const PUNCT_TAGS: &[&str] = &[
    ",", ":", ";", "--", "''", "``", ".", "-LRB-", "-RRB-", "HYPH", "NFP",
];
const ADVERB_TAGS: &[&str] = &["RB", "RBR", "RBS"];

/// Tree node with its token span and the POS tags under it.
struct Indexed {
    base: String,
    span: TokenSpan,
    tags: Vec<String>,
    children: Vec<Indexed>,
}

impl Indexed {
    fn build(tree: &ConstTree, next: &mut usize) -> Self {
        let start = *next;
        if tree.is_terminal() {
            *next += 1;
            return Self {
                base: String::new(),
                span: TokenSpan::unit(start),
                tags: Vec::new(),
                children: Vec::new(),
            };
        }
        let children: Vec<Indexed> = tree.children.iter().map(|c| Indexed::build(c, next)).collect();
        let tags = if tree.is_preterminal() {
            alloc::vec![tree.label.clone()]
        } else {
            children.iter().flat_map(|c| c.tags.iter().cloned()).collect()
        };
        Self {
            base: tree.base_label().to_string(),
            span: TokenSpan {
                start,
                end: *next,
            },
            tags,
            children,
        }
    }

    fn is_coordinator(&self) -> bool {
        self.base == "CC" || self.base == "CONJP"
    }

    fn all_tags_in(&self, set: &[&str]) -> bool {
        !self.tags.is_empty() && self.tags.iter().all(|t| set.contains(&t.as_str()))
    }

    fn is_conjunct_candidate(&self) -> bool {
        !(self.is_coordinator() || self.all_tags_in(PUNCT_TAGS) || self.all_tags_in(ADVERB_TAGS))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConversionWarning {
    /// A coordinator without a conjunct on one of its sides was dropped.
    NoQualifyingSibling { coordinator: TokenSpan },
    /// `respectively` with no pair of equal-size coordinations before it.
    UnpairedRespectively { index: usize },
}

impl fmt::Display for ConversionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConversionWarning::NoQualifyingSibling { coordinator } => {
                write!(f, "coordinator {coordinator} has no conjunct on one side; dropped")
            }
            ConversionWarning::UnpairedRespectively { index } => {
                write!(f, "`respectively` at {index} has no matching coordinations; ignored")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conversion {
    pub sentence: AnnotatedSentence,
    pub warnings: Vec<ConversionWarning>,
}

fn collect_coordinations(
    node: &Indexed,
    tokens: &[Token],
    lexicon: &PairedLexicon,
    coordinators: &mut Vec<CoordinatorSpan>,
    coordinations: &mut Vec<Coordination>,
    warnings: &mut Vec<ConversionWarning>,
) {
    let kids = &node.children;
    let coord_kids: Vec<usize> = (0..kids.len()).filter(|&i| kids[i].is_coordinator()).collect();
    let candidates: Vec<usize> = (0..kids.len())
        .filter(|&i| kids[i].is_conjunct_candidate())
        .collect();
    let mut claimed: Vec<usize> = Vec::new();

    for &k in coord_kids.iter().rev() {
        if claimed.contains(&k) {
            continue;
        }
        let target = kids[k].span;
        let right_words = span_words(tokens, target);
        let mut before: Vec<TokenSpan> = candidates
            .iter()
            .filter(|&&i| i < k)
            .map(|&i| kids[i].span)
            .collect();
        let after: Vec<TokenSpan> = candidates
            .iter()
            .filter(|&&i| i > k)
            .map(|&i| kids[i].span)
            .collect();

        let mut left: Option<TokenSpan> = None;
        if let Some(&first) = before.first() {
            if before.len() >= 2 && lexicon.is_left_for(tokens, first, &right_words) {
                left = Some(first);
                before.remove(0);
            } else if let Some(span) = lexicon.left_ending_at(tokens, first.start, &right_words) {
                left = Some(span);
            }
        }

        if before.is_empty() || after.is_empty() {
            warnings.push(ConversionWarning::NoQualifyingSibling {
                coordinator: target,
            });
            continue;
        }

        let target_span = match left {
            Some(left_span) => {
                if let Some(&j) = coord_kids.iter().find(|&&j| j < k && kids[j].span == left_span) {
                    claimed.push(j);
                }
                let (l, r) = CoordinatorSpan::paired(left_span, target);
                coordinators.push(l);
                r
            }
            None => CoordinatorSpan::contiguous(target),
        };
        coordinators.push(target_span);
        before.extend(after);
        coordinations.push(Coordination::new(target_span, before));
    }

    for child in kids {
        if !child.children.is_empty() {
            collect_coordinations(child, tokens, lexicon, coordinators, coordinations, warnings);
        }
    }
}

fn link_respectively(
    tokens: &[Token],
    coordinators: &mut Vec<CoordinatorSpan>,
    coordinations: &[Coordination],
    warnings: &mut Vec<ConversionWarning>,
) -> Vec<RespectivelyLink> {
    let mut links: Vec<RespectivelyLink> = Vec::new();
    for (r, tok) in tokens.iter().enumerate() {
        if !tok.text.eq_ignore_ascii_case("respectively") {
            continue;
        }
        let used = |c: &Coordination| {
            links
                .iter()
                .any(|l| l.first == c.target.span || l.second == c.target.span)
        };
        let eligible: Vec<&Coordination> = coordinations
            .iter()
            .filter(|c| c.region().end <= r && !used(c))
            .collect();
        let mut found = None;
        'outer: for j in (0..eligible.len()).rev() {
            for i in (0..j).rev() {
                let (a, b) = (eligible[i], eligible[j]);
                if a.conjuncts.len() == b.conjuncts.len() && a.region().precedes(&b.region()) {
                    found = Some((a.target.span, b.target.span));
                    break 'outer;
                }
            }
        }
        match found {
            Some((first, second)) => {
                let target = CoordinatorSpan::respectively(TokenSpan::unit(r));
                coordinators.push(target);
                links.push(RespectivelyLink {
                    target: target.span,
                    first,
                    second,
                });
            }
            None => warnings.push(ConversionWarning::UnpairedRespectively { index: r }),
        }
    }
    links
}

/// Converts a tree into its gold annotation.
pub fn convert_tree(tree: &ConstTree, lexicon: &PairedLexicon) -> Conversion {
    let tokens = tree.tokens();
    let mut next = 0;
    let indexed = Indexed::build(tree, &mut next);
    let mut coordinators = Vec::new();
    let mut coordinations = Vec::new();
    let mut warnings = Vec::new();
    collect_coordinations(
        &indexed,
        &tokens,
        lexicon,
        &mut coordinators,
        &mut coordinations,
        &mut warnings,
    );
    coordinations.sort_by_key(|c| c.target.span);
    let respectively = link_respectively(&tokens, &mut coordinators, &coordinations, &mut warnings);
    coordinators.sort();
    coordinators.dedup();
    Conversion {
        sentence: AnnotatedSentence {
            tokens,
            coordinators,
            coordinations,
            respectively,
            ..AnnotatedSentence::default()
        },
        warnings,
    }
}

/// Gold coordinations of a tree, one per coordinator constituent that
/// has conjuncts on both sides (paired coordinators appear once, under
/// their right half).
pub fn extract_coordinations(tree: &ConstTree) -> Vec<Coordination> {
    convert_tree(tree, &PairedLexicon::default()).sentence.coordinations
}

/// One detector training example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    #[serde(with = "serde_tokens")]
    pub tokens: Vec<Token>,
    pub target: CoordinatorSpan,
    pub coordinators: Vec<CoordinatorSpan>,
    pub labels: Vec<DetectorLabel>,
    pub identifier_labels: Vec<IdentifierLabel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("label sequence length {labels} does not match sentence length {tokens}")]
    LengthMismatch { labels: usize, tokens: usize },
    #[error("identifier labels disagree with the coordinator spans")]
    IdentifierMismatch,
    #[error("target {0} is not listed among the coordinators")]
    TargetNotListed(TokenSpan),
    #[error("coordination for {target} not found in the annotation")]
    MissingCoordination { target: TokenSpan },
}

/// `C` on every token covered by a coordinator span.
pub fn identifier_labels(len: usize, coordinators: &[CoordinatorSpan]) -> Vec<IdentifierLabel> {
    let mut labels = alloc::vec![IdentifierLabel::O; len];
    for c in coordinators {
        for l in &mut labels[c.span.start..c.span.end.min(len)] {
            *l = IdentifierLabel::C;
        }
    }
    labels
}

impl TrainingInstance {
    pub fn new(
        tokens: Vec<Token>,
        coordinators: Vec<CoordinatorSpan>,
        coordination: &Coordination,
    ) -> Result<Self, InstanceError> {
        let labels = encode_labels(tokens.len(), coordination)?;
        let identifier_labels = identifier_labels(tokens.len(), &coordinators);
        let instance = Self {
            tokens,
            target: coordination.target,
            coordinators,
            labels,
            identifier_labels,
        };
        instance.check()?;
        Ok(instance)
    }

    pub fn check(&self) -> Result<(), InstanceError> {
        let n = self.tokens.len();
        if self.labels.len() != n {
            return Err(InstanceError::LengthMismatch {
                labels: self.labels.len(),
                tokens: n,
            });
        }
        if !self.coordinators.contains(&self.target) {
            return Err(InstanceError::TargetNotListed(self.target.span));
        }
        for c in &self.coordinators {
            c.span.check_within(n)?;
        }
        if let Some(v) = validate_labels(&self.labels, &self.target).violations.first() {
            return Err(SchemaError::InvalidLabels {
                index: v.index(),
                violation: v.clone(),
            }
            .into());
        }
        if self.identifier_labels != identifier_labels(n, &self.coordinators) {
            return Err(InstanceError::IdentifierMismatch);
        }
        Ok(())
    }

    pub fn coordination(&self) -> Result<Coordination, SchemaError> {
        decode_labels(&self.labels, &self.target)
    }

    pub fn complexity(&self) -> Complexity {
        classify_target(&self.tokens, &self.target)
    }
}

/// One instance per coordinator: contiguous and paired-right targets carry
/// their conjuncts, paired-left targets carry none, and a `respectively`
/// target carries the conjuncts of both linked coordinations.
pub fn instances_from_annotation(
    sentence: &AnnotatedSentence,
) -> Result<Vec<TrainingInstance>, InstanceError> {
    let mut out = Vec::with_capacity(sentence.coordinators.len());
    for target in &sentence.coordinators {
        let coordination = match target.kind {
            CoordinatorKind::PairedLeft => Coordination::new(*target, Vec::new()),
            CoordinatorKind::Respectively => {
                let link = sentence
                    .respectively
                    .iter()
                    .find(|l| l.target == target.span)
                    .ok_or(InstanceError::MissingCoordination {
                        target: target.span,
                    })?;
                let mut conjuncts = Vec::new();
                for inner in [link.first, link.second] {
                    let c = sentence.coordination_for(inner).ok_or(
                        InstanceError::MissingCoordination { target: inner },
                    )?;
                    conjuncts.extend_from_slice(&c.conjuncts);
                }
                Coordination::new(*target, conjuncts)
            }
            _ => sentence
                .coordination_for(target.span)
                .cloned()
                .ok_or(InstanceError::MissingCoordination {
                    target: target.span,
                })?,
        };
        out.push(TrainingInstance::new(
            sentence.tokens.clone(),
            sentence.coordinators.clone(),
            &coordination,
        )?);
    }
    Ok(out)
}

/// All training instances of a tree.
pub fn generate_instances(tree: &ConstTree) -> Result<Vec<TrainingInstance>, InstanceError> {
    instances_from_annotation(&convert_tree(tree, &PairedLexicon::default()).sentence)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOutcome {
    Swapped,
    /// Fewer than two conjuncts; the instance is returned unchanged.
    TooFewConjuncts,
    /// Some coordinator straddles a swapped region; unchanged.
    CrossingSpan,
}

/// Exchanges the first and last conjunct of an instance and remaps every
/// span and label accordingly.
pub fn augment(instance: &TrainingInstance) -> Result<(TrainingInstance, AugmentOutcome), InstanceError> {
    let coordination = instance.coordination()?;
    let conj = &coordination.conjuncts;
    if conj.len() < 2 {
        return Ok((instance.clone(), AugmentOutcome::TooFewConjuncts));
    }
    let first = conj[0];
    let last = conj[conj.len() - 1];
    let n = instance.tokens.len();
    let shift = last.len() as isize - first.len() as isize;

    let map = |i: usize| -> (usize, u8) {
        if i < first.start {
            (i, 0)
        } else if i < first.end {
            (last.end - first.len() + (i - first.start), 1)
        } else if i < last.start {
            ((i as isize + shift) as usize, 2)
        } else if i < last.end {
            (first.start + (i - last.start), 3)
        } else {
            (i, 4)
        }
    };
    let remap = |s: TokenSpan| -> Option<TokenSpan> {
        let (a, seg_a) = map(s.start);
        let (b, seg_b) = map(s.end - 1);
        (seg_a == seg_b).then_some(TokenSpan { start: a, end: b + 1 })
    };
    let remap_coord = |c: &CoordinatorSpan| -> Option<CoordinatorSpan> {
        Some(CoordinatorSpan {
            span: remap(c.span)?,
            kind: c.kind,
            partner: match c.partner {
                Some(p) => Some(remap(p)?),
                None => None,
            },
        })
    };

    let mut tokens: Vec<Token> = alloc::vec![Token::new("", 0); n];
    for (i, tok) in instance.tokens.iter().enumerate() {
        let j = map(i).0;
        tokens[j] = Token::new(tok.text.clone(), j);
    }
    let Some(coordinators) = instance
        .coordinators
        .iter()
        .map(remap_coord)
        .collect::<Option<Vec<_>>>()
    else {
        return Ok((instance.clone(), AugmentOutcome::CrossingSpan));
    };
    let Some(target) = remap_coord(&instance.target) else {
        return Ok((instance.clone(), AugmentOutcome::CrossingSpan));
    };
    let conjuncts: Vec<TokenSpan> = conj.iter().map(|&c| remap(c).expect("conjuncts never cross")).collect();
    let mut coordinators = coordinators;
    coordinators.sort();
    let swapped = TrainingInstance::new(tokens, coordinators, &Coordination::new(target, conjuncts))?;
    Ok((swapped, AugmentOutcome::Swapped))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Simple,
    Complex,
}

const SIMPLE_COORDINATORS: &[&str] = &["and", "but", "or"];

/// `Simple` for a single-token contiguous `and`/`but`/`or`, `Complex`
/// otherwise.
pub fn classify_target(tokens: &[Token], target: &CoordinatorSpan) -> Complexity {
    let simple = target.kind == CoordinatorKind::Contiguous
        && target.span.len() == 1
        && tokens
            .get(target.span.start)
            .is_some_and(|t| SIMPLE_COORDINATORS.contains(&t.text.to_lowercase().as_str()));
    if simple {
        Complexity::Simple
    } else {
        Complexity::Complex
    }
}

pub fn classify_complexity(instance: &TrainingInstance) -> Complexity {
    instance.complexity()
}

/// Manual corrections applied after automatic conversion. One entry per
/// line, tab separated: sentence text, target `start:end`, then either
/// `drop` or a comma-separated list of conjunct spans `s:e,s:e,...`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExceptionList {
    pub entries: Vec<ExceptionEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExceptionEntry {
    pub sentence: String,
    pub target: TokenSpan,
    pub action: ExceptionAction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExceptionAction {
    Drop,
    Conjuncts(Vec<TokenSpan>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExceptionError {
    #[error("exceptions line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("exception for target {target} does not apply: {reason}")]
    Inapplicable { target: TokenSpan, reason: Box<str> },
}

fn parse_span(text: &str) -> Option<TokenSpan> {
    let (a, b) = text.trim().split_once(':')?;
    TokenSpan::new(a.trim().parse().ok()?, b.trim().parse().ok()?).ok()
}

impl ExceptionList {
    pub fn parse(text: &str) -> Result<Self, ExceptionError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let syntax = |message: &str| ExceptionError::Syntax {
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(syntax("expected three tab-separated fields"));
            }
            let target = parse_span(fields[1]).ok_or_else(|| syntax("bad target span"))?;
            let action = if fields[2].trim() == "drop" {
                ExceptionAction::Drop
            } else {
                let spans = fields[2]
                    .split(',')
                    .map(parse_span)
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| syntax("bad conjunct span list"))?;
                ExceptionAction::Conjuncts(spans)
            };
            entries.push(ExceptionEntry {
                sentence: fields[0].split_whitespace().collect::<Vec<_>>().join(" "),
                target,
                action,
            });
        }
        Ok(Self { entries })
    }

    /// Applies every entry whose sentence matches; returns how many applied.
    pub fn apply(&self, sentence: &mut AnnotatedSentence) -> Result<usize, ExceptionError> {
        let text = sentence
            .tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let mut applied = 0;
        for entry in self.entries.iter().filter(|e| e.sentence == text) {
            let inapplicable = |reason: &str| ExceptionError::Inapplicable {
                target: entry.target,
                reason: reason.into(),
            };
            match &entry.action {
                ExceptionAction::Drop => {
                    let Some(pos) = sentence.coordinators.iter().position(|c| c.span == entry.target) else {
                        return Err(inapplicable("no such coordinator"));
                    };
                    let removed = sentence.coordinators.remove(pos);
                    let mut gone = alloc::vec![removed.span];
                    gone.extend(removed.partner);
                    sentence.coordinators.retain(|c| !gone.contains(&c.span));
                    sentence
                        .coordinations
                        .retain(|c| !gone.contains(&c.target.span));
                    let dropped_links: Vec<TokenSpan> = sentence
                        .respectively
                        .iter()
                        .filter(|l| gone.iter().any(|g| *g == l.target || *g == l.first || *g == l.second))
                        .map(|l| l.target)
                        .collect();
                    sentence.respectively.retain(|l| !dropped_links.contains(&l.target));
                    sentence.coordinators.retain(|c| !dropped_links.contains(&c.span));
                }
                ExceptionAction::Conjuncts(spans) => {
                    let n = sentence.tokens.len();
                    let Some(c) = sentence
                        .coordinations
                        .iter_mut()
                        .find(|c| c.target.span == entry.target)
                    else {
                        return Err(inapplicable("no coordination with this target"));
                    };
                    let fixed = Coordination::new(c.target, spans.clone());
                    fixed
                        .check(n)
                        .map_err(|e| inapplicable(&e.to_string()))?;
                    *c = fixed;
                }
            }
            applied += 1;
        }
        Ok(applied)
    }
}
