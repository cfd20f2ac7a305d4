//! Two-stage recognition: identify coordinator spans, then decode the
//! conjuncts of every effective target.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::PairedLexicon;
use crate::models::{DetectorModel, IdentifierModel, ModelError};
use crate::schema::{serde_tokens, Coordination, CoordinatorKind, CoordinatorSpan, Token, TokenSpan};

/// Ties a `respectively` coordinator to the two coordinations it aligns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RespectivelyLink {
    pub target: TokenSpan,
    pub first: TokenSpan,
    pub second: TokenSpan,
}

/// Two coordinations whose regions cross without nesting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conflict {
    pub first: TokenSpan,
    pub second: TokenSpan,
}

/// A target whose decode failed; the rest of the sentence is unaffected.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodeFailure {
    pub target: TokenSpan,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    #[serde(with = "serde_tokens")]
    pub tokens: Vec<Token>,
    pub coordinators: Vec<CoordinatorSpan>,
    pub coordinations: Vec<Coordination>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub respectively: Vec<RespectivelyLink>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<Conflict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<DecodeFailure>,
}

impl AnnotatedSentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self {
            tokens,
            ..Self::default()
        }
    }

    pub fn coordination_for(&self, target: TokenSpan) -> Option<&Coordination> {
        self.coordinations.iter().find(|c| c.target.span == target)
    }

    /// Checks the structural invariants of every coordination and link.
    pub fn check(&self) -> Result<(), crate::schema::SchemaError> {
        let n = self.tokens.len();
        for c in &self.coordinators {
            c.check(Some(&self.tokens))?;
            c.span.check_within(n)?;
        }
        for c in &self.coordinations {
            c.check(n)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PairingError {
    #[error("fewer than two coordinators inside the conjunct region")]
    TooFewCoordinators,
    #[error("no gap between the inner coordinators")]
    NoGap,
    #[error("unequal groups: {first} and {second} conjuncts")]
    Unequal { first: usize, second: usize },
    #[error("coordinator {0} does not separate its group")]
    Misplaced(TokenSpan),
}

/// Conjuncts of a `respectively` decode split into the two aligned
/// coordinations; `a[i]` pairs with `b[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RespectivelyPairing {
    pub first: CoordinatorSpan,
    pub second: CoordinatorSpan,
    pub a: Vec<TokenSpan>,
    pub b: Vec<TokenSpan>,
}

/// Splits sorted conjuncts at the widest gap lying between the first and
/// last coordinator found among them. Ties prefer the most balanced split,
/// then the leftmost.
pub fn respectively_pairing(
    conjuncts: &[TokenSpan],
    coordinators: &[CoordinatorSpan],
) -> Result<RespectivelyPairing, PairingError> {
    let (Some(lo), Some(hi)) = (conjuncts.first(), conjuncts.last()) else {
        return Err(PairingError::TooFewCoordinators);
    };
    let inner: Vec<&CoordinatorSpan> = coordinators
        .iter()
        .filter(|c| {
            matches!(c.kind, CoordinatorKind::Contiguous | CoordinatorKind::PairedRight)
                && lo.end <= c.span.start
                && c.span.end <= hi.start
                && !conjuncts.iter().any(|k| k.overlaps(&c.span))
        })
        .collect();
    if inner.len() < 2 {
        return Err(PairingError::TooFewCoordinators);
    }
    let (c1, c2) = (*inner[0], *inner[inner.len() - 1]);
    let n = conjuncts.len();
    let mut best: Option<(usize, usize, usize)> = None;
    for k in 0..n - 1 {
        let (left, right) = (conjuncts[k], conjuncts[k + 1]);
        if left.end < c1.span.end || right.start > c2.span.start {
            continue;
        }
        let width = right.start - left.end;
        let imbalance = (k + 1).abs_diff(n - k - 1);
        let better = match best {
            None => true,
            Some((_, w, imb)) => width > w || (width == w && imbalance < imb),
        };
        if better {
            best = Some((k, width, imbalance));
        }
    }
    let (k, _, _) = best.ok_or(PairingError::NoGap)?;
    let (a, b) = conjuncts.split_at(k + 1);
    if a.len() != b.len() {
        return Err(PairingError::Unequal {
            first: a.len(),
            second: b.len(),
        });
    }
    let separates = |c: &CoordinatorSpan, g: &[TokenSpan]| g[0].end <= c.span.start && c.span.end <= g[g.len() - 1].start;
    if !separates(&c1, a) {
        return Err(PairingError::Misplaced(c1.span));
    }
    if !separates(&c2, b) {
        return Err(PairingError::Misplaced(c2.span));
    }
    Ok(RespectivelyPairing {
        first: c1,
        second: c2,
        a: a.to_vec(),
        b: b.to_vec(),
    })
}

fn is_fatal(e: &ModelError) -> bool {
    matches!(e, ModelError::Dimension { .. })
        || matches!(e, ModelError::Encoder(crate::encoder::EncoderError::Dimension { .. }))
        || matches!(e, ModelError::Encoder(crate::encoder::EncoderError::Unavailable(_)))
}

/// Regions that overlap without one containing the other.
pub fn find_conflicts(coordinations: &[Coordination]) -> Vec<Conflict> {
    let mut out = Vec::new();
    for (i, a) in coordinations.iter().enumerate() {
        for b in &coordinations[i + 1..] {
            let (ra, rb) = (a.region(), b.region());
            if ra.overlaps(&rb) && !ra.contains_span(&rb) && !rb.contains_span(&ra) {
                out.push(Conflict {
                    first: a.target.span,
                    second: b.target.span,
                });
            }
        }
    }
    out
}

/// Decodes every effective target given the coordinator spans.
pub fn recognize_with_coordinators(
    detector: &DetectorModel,
    tokens: &[Token],
    coordinators: &[CoordinatorSpan],
) -> Result<AnnotatedSentence, ModelError> {
    let mut out = AnnotatedSentence {
        tokens: tokens.to_vec(),
        coordinators: coordinators.to_vec(),
        ..AnnotatedSentence::default()
    };
    if tokens.is_empty() {
        out.coordinators.clear();
        return Ok(out);
    }
    let fail = |out: &mut AnnotatedSentence, target: TokenSpan, reason: String| {
        log::warn!("decode failed for target {target}: {reason}");
        out.failures.push(DecodeFailure { target, reason });
    };

    for target in coordinators {
        if matches!(target.kind, CoordinatorKind::PairedLeft | CoordinatorKind::Respectively) {
            continue;
        }
        match detector.detect(tokens, target, coordinators) {
            Ok(d) => out.coordinations.push(d.coordination),
            Err(e) if is_fatal(&e) => return Err(e),
            Err(e) => fail(&mut out, target.span, e.to_string()),
        }
    }

    for target in coordinators.iter().filter(|c| c.kind == CoordinatorKind::Respectively) {
        let detection = match detector.detect(tokens, target, coordinators) {
            Ok(d) => d,
            Err(e) if is_fatal(&e) => return Err(e),
            Err(e) => {
                fail(&mut out, target.span, e.to_string());
                continue;
            }
        };
        match respectively_pairing(&detection.coordination.conjuncts, coordinators) {
            Ok(p) => {
                for (inner, group) in [(p.first, p.a), (p.second, p.b)] {
                    let fixed = Coordination::new(inner, group);
                    match out.coordinations.iter_mut().find(|c| c.target.span == inner.span) {
                        Some(c) => *c = fixed,
                        None => {
                            out.failures.retain(|f| f.target != inner.span);
                            out.coordinations.push(fixed);
                        }
                    }
                }
                out.respectively.push(RespectivelyLink {
                    target: target.span,
                    first: p.first.span,
                    second: p.second.span,
                });
            }
            Err(e) => {
                log::info!(
                    "`respectively` at {}: {e}; keeping per-coordinator decodes",
                    target.span
                );
                out.failures.push(DecodeFailure {
                    target: target.span,
                    reason: e.to_string(),
                });
            }
        }
    }

    out.coordinations.sort_by_key(|c| (c.target.span.start, c.target.span.end));
    out.conflicts = find_conflicts(&out.coordinations);
    Ok(out)
}

/// Full inference: identifier spans feed the detector.
pub fn recognize(
    identifier: &IdentifierModel,
    detector: &DetectorModel,
    lexicon: &PairedLexicon,
    tokens: &[Token],
) -> Result<AnnotatedSentence, ModelError> {
    if tokens.is_empty() {
        return Ok(AnnotatedSentence::default());
    }
    let coordinators = identifier.identify(tokens, lexicon)?;
    recognize_with_coordinators(detector, tokens, &coordinators)
}

/// Models bundled for repeated inference.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub identifier: Option<IdentifierModel>,
    pub detector: DetectorModel,
    pub lexicon: PairedLexicon,
}

impl Pipeline {
    pub fn new(identifier: IdentifierModel, detector: DetectorModel) -> Self {
        Self {
            identifier: Some(identifier),
            detector,
            lexicon: PairedLexicon::default(),
        }
    }

    /// Uses the identifier when present, otherwise `gold` coordinators.
    pub fn run(&self, tokens: &[Token], gold: Option<&[CoordinatorSpan]>) -> Result<AnnotatedSentence, ModelError> {
        match (gold, &self.identifier) {
            (Some(coords), _) => recognize_with_coordinators(&self.detector, tokens, coords),
            (None, Some(id)) => recognize(id, &self.detector, &self.lexicon, tokens),
            (None, None) => recognize_with_coordinators(&self.detector, tokens, &[]),
        }
    }
}
