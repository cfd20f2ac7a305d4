//! Per-token features for both models.
//!
//! The detector sees the sentence with a `[C]` marker on each side of the
//! target coordinator, plus a flag per token saying whether it belongs to
//! any detected coordinator. Contextual vectors come from a
//! [`TokenEncoder`]; the built-in one is a hashed, windowed feature encoder
//! so everything trains without external model files.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{CoordinatorKind, CoordinatorSpan, DetectorLabel, Token, TokenSpan};

/// Text of the marker token placed around the target coordinator.
pub const MARKER: &str = "[C]";

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EncoderError {
    #[error("target {target} outside sentence of length {len}")]
    TargetOutOfRange { target: TokenSpan, len: usize },
    #[error("sequence of length {len} exceeds encoder maximum {max}")]
    TooLong { len: usize, max: usize },
    #[error("length mismatch: {left} vectors vs {right} flags")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty sequence")]
    Empty,
    #[error("encoder produced {got} values, expected dimension {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("encoder backend unavailable: {0}")]
    Unavailable(String),
}

/// A sentence with markers around the target. `origin[i]` is the original
/// index of marked position `i`, or `None` for a marker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSequence {
    pub tokens: Vec<Token>,
    pub target: TokenSpan,
    pub origin: Vec<Option<usize>>,
}

impl MarkedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Positions of the opening and closing marker.
    pub fn markers(&self) -> (usize, usize) {
        (self.target.start - 1, self.target.end)
    }

    /// Marked position of original index `i`.
    pub fn marked_index(&self, i: usize) -> usize {
        let (open, _) = self.markers();
        if i < open {
            i
        } else if i < open + self.target.len() {
            i + 1
        } else {
            i + 2
        }
    }

    /// Drops the entries at marker positions.
    pub fn unmark<T: Clone>(&self, values: &[T]) -> Vec<T> {
        values
            .iter()
            .zip(&self.origin)
            .filter(|(_, o)| o.is_some())
            .map(|(v, _)| v.clone())
            .collect()
    }

    /// Inserts `fill` at both marker positions of an unmarked sequence.
    pub fn mark<T: Clone>(&self, values: &[T], fill: T) -> Vec<T> {
        self.origin
            .iter()
            .map(|o| match o {
                Some(i) => values[*i].clone(),
                None => fill.clone(),
            })
            .collect()
    }
}

pub fn insert_markers(tokens: &[Token], target: &TokenSpan) -> Result<MarkedSequence, EncoderError> {
    if target.end > tokens.len() || target.start >= target.end {
        return Err(EncoderError::TargetOutOfRange {
            target: *target,
            len: tokens.len(),
        });
    }
    let mut marked = Vec::with_capacity(tokens.len() + 2);
    let mut origin = Vec::with_capacity(tokens.len() + 2);
    for (i, tok) in tokens.iter().enumerate() {
        if i == target.start {
            marked.push(MARKER.to_string());
            origin.push(None);
        }
        marked.push(tok.text.clone());
        origin.push(Some(i));
        if i + 1 == target.end {
            marked.push(MARKER.to_string());
            origin.push(None);
        }
    }
    Ok(MarkedSequence {
        tokens: marked
            .into_iter()
            .enumerate()
            .map(|(i, t)| Token::new(t, i))
            .collect(),
        target: TokenSpan {
            start: target.start + 1,
            end: target.end + 1,
        },
        origin,
    })
}

pub fn strip_markers(marked: &MarkedSequence) -> Vec<Token> {
    marked
        .tokens
        .iter()
        .zip(&marked.origin)
        .filter_map(|(t, o)| o.map(|i| Token::new(t.text.clone(), i)))
        .collect()
}

/// How coordinator membership is written into the flag vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagEncoding {
    /// One entry: inside any coordinator span or not.
    #[default]
    Binary,
    /// One entry per coordinator kind.
    KindOneHot,
}

impl FlagEncoding {
    pub const fn dim(self) -> usize {
        match self {
            FlagEncoding::Binary => 1,
            FlagEncoding::KindOneHot => CoordinatorKind::ALL.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositionFlag {
    pub values: Vec<f64>,
}

pub fn position_flags(marked: &MarkedSequence, coordinators: &[CoordinatorSpan]) -> Vec<PositionFlag> {
    position_flags_with(marked, coordinators, FlagEncoding::Binary)
}

pub fn position_flags_with(
    marked: &MarkedSequence,
    coordinators: &[CoordinatorSpan],
    encoding: FlagEncoding,
) -> Vec<PositionFlag> {
    marked
        .origin
        .iter()
        .map(|origin| {
            let mut values = alloc::vec![0.0; encoding.dim()];
            if let Some(i) = origin {
                for c in coordinators.iter().filter(|c| c.span.contains(*i)) {
                    let slot = match encoding {
                        FlagEncoding::Binary => 0,
                        FlagEncoding::KindOneHot => c.kind.index(),
                    };
                    values[slot] = 1.0;
                }
            }
            PositionFlag { values }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenVector {
    pub values: Vec<f64>,
}

/// `[h; b]` for every position.
pub fn concat_position(h: &[TokenVector], b: &[PositionFlag]) -> Result<Vec<TokenVector>, EncoderError> {
    if h.len() != b.len() {
        return Err(EncoderError::LengthMismatch {
            left: h.len(),
            right: b.len(),
        });
    }
    Ok(h.iter()
        .zip(b)
        .map(|(h, b)| {
            let mut values = Vec::with_capacity(h.values.len() + b.values.len());
            values.extend_from_slice(&h.values);
            values.extend_from_slice(&b.values);
            TokenVector { values }
        })
        .collect())
}

/// Serializable description of an encoder, stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderSpec {
    Hashed(HashedConfig),
    External {
        model_path: String,
        max_len: usize,
        pooling: Pooling,
    },
}

/// Contract for contextual encoders: one vector of `dim()` values per
/// input token, deterministic for a given input.
pub trait TokenEncoder {
    fn dim(&self) -> usize;
    fn max_len(&self) -> usize;
    fn spec(&self) -> EncoderSpec;
    fn encode(&self, tokens: &[Token]) -> Result<Vec<TokenVector>, EncoderError>;
}

pub fn encode_tokens<E: TokenEncoder + ?Sized>(
    encoder: &E,
    marked: &MarkedSequence,
) -> Result<Vec<TokenVector>, EncoderError> {
    encoder.encode(&marked.tokens)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashedConfig {
    pub dim: usize,
    pub window: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_max_len() -> usize {
    512
}

impl Default for HashedConfig {
    fn default() -> Self {
        Self {
            dim: 4096,
            window: 2,
            max_len: default_max_len(),
        }
    }
}

/// Signed feature hashing over word identity, lowercase form and word
/// shape in a `±window` context. The marker gets its own feature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashedEncoder {
    config: HashedConfig,
}

fn word_shape(word: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for ch in word.chars() {
        let class = if ch.is_uppercase() {
            'X'
        } else if ch.is_lowercase() {
            'x'
        } else if ch.is_ascii_digit() {
            'd'
        } else {
            ch
        };
        if last != Some(class) {
            out.push(class);
            last = Some(class);
        }
    }
    out
}

impl HashedEncoder {
    pub fn new(config: HashedConfig) -> Self {
        assert!(config.dim > 0, "hashed encoder needs a positive dimension");
        Self { config }
    }

    pub fn config(&self) -> HashedConfig {
        self.config
    }

    fn add(&self, values: &mut [f64], parts: &[&[u8]]) {
        let mut h = FnvHasher::default();
        for p in parts {
            h.write(p);
            h.write_u8(0xff);
        }
        let hash = h.finish();
        let slot = (hash % self.config.dim as u64) as usize;
        let sign = if hash >> 63 == 1 { -1.0 } else { 1.0 };
        values[slot] += sign;
    }
}

impl TokenEncoder for HashedEncoder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn spec(&self) -> EncoderSpec {
        EncoderSpec::Hashed(self.config)
    }

    fn encode(&self, tokens: &[Token]) -> Result<Vec<TokenVector>, EncoderError> {
        if tokens.is_empty() {
            return Err(EncoderError::Empty);
        }
        if tokens.len() > self.config.max_len {
            return Err(EncoderError::TooLong {
                len: tokens.len(),
                max: self.config.max_len,
            });
        }
        let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let shapes: Vec<String> = tokens.iter().map(|t| word_shape(&t.text)).collect();
        let w = self.config.window as isize;
        let n = tokens.len() as isize;
        Ok((0..n)
            .map(|i| {
                let mut values = alloc::vec![0.0; self.config.dim];
                self.add(&mut values, &[b"bias"]);
                let me = &tokens[i as usize].text;
                if me == MARKER {
                    self.add(&mut values, &[b"marker"]);
                } else {
                    self.add(&mut values, &[b"id", me.as_bytes()]);
                }
                for off in -w..=w {
                    let j = i + off;
                    let o = [off as i8 as u8];
                    if j < 0 || j >= n {
                        self.add(&mut values, &[b"pad", &o]);
                        continue;
                    }
                    let j = j as usize;
                    self.add(&mut values, &[b"w", &o, lower[j].as_bytes()]);
                    self.add(&mut values, &[b"s", &o, shapes[j].as_bytes()]);
                }
                TokenVector { values }
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Vector of each word's first subword.
    #[default]
    First,
    /// Mean over each word's subwords.
    Mean,
}

/// A subword-level contextual model, e.g. an exported transformer graph.
pub trait SubwordModel {
    fn dim(&self) -> usize;
    /// Maximum number of subword positions per forward pass.
    fn max_len(&self) -> usize;
    /// Subword ids of one word; never empty.
    fn split(&self, word: &str) -> Vec<u32>;
    /// Id of the added special token for [`MARKER`].
    fn marker_id(&self) -> u32;
    fn forward(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>, EncoderError>;
    fn spec(&self) -> EncoderSpec;
}

/// Word-level adapter over a [`SubwordModel`].
pub struct PooledEncoder<M> {
    model: M,
    pooling: Pooling,
}

impl<M: SubwordModel> PooledEncoder<M> {
    pub fn new(model: M, pooling: Pooling) -> Self {
        Self { model, pooling }
    }
}

impl<M: SubwordModel> TokenEncoder for PooledEncoder<M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn max_len(&self) -> usize {
        self.model.max_len()
    }

    fn spec(&self) -> EncoderSpec {
        self.model.spec()
    }

    fn encode(&self, tokens: &[Token]) -> Result<Vec<TokenVector>, EncoderError> {
        if tokens.is_empty() {
            return Err(EncoderError::Empty);
        }
        let mut ids = Vec::new();
        let mut pieces = Vec::with_capacity(tokens.len());
        for t in tokens {
            let start = ids.len();
            if t.text == MARKER {
                ids.push(self.model.marker_id());
            } else {
                ids.extend(self.model.split(&t.text));
            }
            pieces.push(start..ids.len());
        }
        if ids.len() > self.model.max_len() {
            return Err(EncoderError::TooLong {
                len: ids.len(),
                max: self.model.max_len(),
            });
        }
        let out = self.model.forward(&ids)?;
        let dim = self.model.dim();
        if out.len() != ids.len() || out.iter().any(|v| v.len() != dim) {
            return Err(EncoderError::Dimension {
                got: out.first().map_or(0, Vec::len),
                expected: dim,
            });
        }
        Ok(pieces
            .into_iter()
            .map(|range| {
                let values = match self.pooling {
                    Pooling::First => out[range.start].clone(),
                    Pooling::Mean => {
                        let k = range.len() as f64;
                        let mut acc = alloc::vec![0.0; dim];
                        for row in &out[range] {
                            for (a, v) in acc.iter_mut().zip(row) {
                                *a += v / k;
                            }
                        }
                        acc
                    }
                };
                TokenVector { values }
            })
            .collect())
    }
}

/// Everything the detector needs for one target: the marked sequence, the
/// coordinator flags and, for training, the gold labels in marked
/// coordinates (markers are `O`).
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorInstance {
    pub marked: MarkedSequence,
    pub flags: Vec<PositionFlag>,
    pub gold: Option<Vec<DetectorLabel>>,
}

impl DetectorInstance {
    pub fn new(
        tokens: &[Token],
        target: &CoordinatorSpan,
        coordinators: &[CoordinatorSpan],
        encoding: FlagEncoding,
    ) -> Result<Self, EncoderError> {
        let marked = insert_markers(tokens, &target.span)?;
        let flags = position_flags_with(&marked, coordinators, encoding);
        Ok(Self {
            marked,
            flags,
            gold: None,
        })
    }

    /// Attaches gold labels given in original (unmarked) coordinates.
    pub fn with_gold(mut self, labels: &[DetectorLabel]) -> Result<Self, EncoderError> {
        let n = self.marked.len() - 2;
        if labels.len() != n {
            return Err(EncoderError::LengthMismatch {
                left: labels.len(),
                right: n,
            });
        }
        self.gold = Some(self.marked.mark(labels, DetectorLabel::O));
        Ok(self)
    }
}
