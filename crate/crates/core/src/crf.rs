//! Linear-chain CRF over the six detector labels with hard constraints.
//!
//! Constraints come in two layers. Position masks pin the target tokens to
//! `C`, the markers to `O`, and restrict each side of the target to its own
//! before/after tags. The transition mask forbids `I-x` unless it continues
//! a `B-x`/`I-x` run. Together they make every decoded path valid under the
//! label grammar, so no repair step is needed after decoding.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::schema::{DetectorLabel, TokenSpan};

pub const NUM_LABELS: usize = DetectorLabel::COUNT;

type Row = [f64; NUM_LABELS];

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CrfError {
    #[error("emission matrix is empty")]
    Empty,
    #[error("non-finite emission at row {row}")]
    NonFinite { row: usize },
    #[error("{emissions} emission rows but {constraints} constrained positions")]
    LengthMismatch { emissions: usize, constraints: usize },
    #[error("target {0} leaves no room for markers")]
    BadTarget(TokenSpan),
    #[error("no label path satisfies the constraints")]
    NoValidPath,
    #[error("gold label {label} at {index} is ruled out by the constraints")]
    ImpossibleGold { index: usize, label: DetectorLabel },
}

/// Row-major `len x 6` score matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Emissions {
    rows: Vec<Row>,
}

impl Emissions {
    pub fn new(rows: Vec<Row>) -> Self {
        Self { rows }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            rows: vec![[0.0; NUM_LABELS]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [Row] {
        &mut self.rows
    }

    pub fn get(&self, i: usize, label: DetectorLabel) -> f64 {
        self.rows[i][label.index()]
    }

    fn check(&self) -> Result<(), CrfError> {
        if self.rows.is_empty() {
            return Err(CrfError::Empty);
        }
        match self.rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            Some(row) => Err(CrfError::NonFinite { row }),
            None => Ok(()),
        }
    }
}

/// Learned start, end and transition scores.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrfParams {
    pub start: Row,
    pub end: Row,
    pub transitions: [Row; NUM_LABELS],
}

/// Whether `to` may follow `from`.
pub const fn transition_allowed(from: DetectorLabel, to: DetectorLabel) -> bool {
    match to {
        DetectorLabel::IBefore => matches!(from, DetectorLabel::BBefore | DetectorLabel::IBefore),
        DetectorLabel::IAfter => matches!(from, DetectorLabel::BAfter | DetectorLabel::IAfter),
        _ => true,
    }
}

/// Whether a path may begin with `label`.
pub const fn start_allowed(label: DetectorLabel) -> bool {
    !matches!(label, DetectorLabel::IBefore | DetectorLabel::IAfter)
}

/// The full transition mask, indexed `[from][to]`.
pub fn transition_mask() -> [[bool; NUM_LABELS]; NUM_LABELS] {
    let mut mask = [[false; NUM_LABELS]; NUM_LABELS];
    for from in DetectorLabel::ALL {
        for to in DetectorLabel::ALL {
            mask[from.index()][to.index()] = transition_allowed(from, to);
        }
    }
    mask
}

/// Per-position label masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraints {
    allowed: Vec<[bool; NUM_LABELS]>,
}

const BEFORE_SET: [bool; NUM_LABELS] = [true, false, true, true, false, false];
const AFTER_SET: [bool; NUM_LABELS] = [true, false, false, false, true, true];
const ONLY_O: [bool; NUM_LABELS] = [true, false, false, false, false, false];
const ONLY_C: [bool; NUM_LABELS] = [false, true, false, false, false, false];

impl Constraints {
    /// Masks for a marked sequence of `len` positions whose target occupies
    /// `target` (markers at `target.start - 1` and `target.end`).
    pub fn for_marked_target(len: usize, target: TokenSpan) -> Result<Self, CrfError> {
        if target.start == 0 || target.end >= len || target.start >= target.end {
            return Err(CrfError::BadTarget(target));
        }
        let (open, close) = (target.start - 1, target.end);
        let allowed = (0..len)
            .map(|i| {
                if i < open {
                    BEFORE_SET
                } else if i == open || i == close {
                    ONLY_O
                } else if i < close {
                    ONLY_C
                } else {
                    AFTER_SET
                }
            })
            .collect();
        Ok(Self { allowed })
    }

    /// Every label allowed everywhere (transition mask still applies).
    pub fn unconstrained(len: usize) -> Self {
        Self {
            allowed: vec![[true; NUM_LABELS]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn allows(&self, i: usize, label: DetectorLabel) -> bool {
        self.allowed[i][label.index()]
    }

    /// True when `path` satisfies position masks, start and transition rules.
    pub fn admits(&self, path: &[DetectorLabel]) -> bool {
        path.len() == self.len()
            && path.iter().enumerate().all(|(i, &l)| self.allows(i, l))
            && path.first().is_none_or(|&l| start_allowed(l))
            && path.windows(2).all(|w| transition_allowed(w[0], w[1]))
    }

    fn check_against(&self, em: &Emissions) -> Result<(), CrfError> {
        em.check()?;
        if em.len() != self.len() {
            return Err(CrfError::LengthMismatch {
                emissions: em.len(),
                constraints: self.len(),
            });
        }
        Ok(())
    }
}

/// Unnormalized log score of a path (no constraint check).
pub fn path_score(em: &Emissions, params: &CrfParams, path: &[DetectorLabel]) -> f64 {
    let mut score = 0.0;
    for (i, &l) in path.iter().enumerate() {
        score += em.rows[i][l.index()];
        if i == 0 {
            score += params.start[l.index()];
        } else {
            score += params.transitions[path[i - 1].index()][l.index()];
        }
    }
    if let Some(&last) = path.last() {
        score += params.end[last.index()];
    }
    score
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.map(|v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

fn initial(em: &Emissions, params: &CrfParams, cons: &Constraints) -> Row {
    let mut row = [f64::NEG_INFINITY; NUM_LABELS];
    for l in DetectorLabel::ALL {
        if cons.allows(0, l) && start_allowed(l) {
            row[l.index()] = params.start[l.index()] + em.rows[0][l.index()];
        }
    }
    row
}

/// Best path under the constraints and its score. Exact ties go to the
/// lower label in declaration order.
pub fn viterbi(
    em: &Emissions,
    params: &CrfParams,
    cons: &Constraints,
) -> Result<(Vec<DetectorLabel>, f64), CrfError> {
    cons.check_against(em)?;
    let m = em.len();
    let mut score = initial(em, params, cons);
    let mut back: Vec<[usize; NUM_LABELS]> = Vec::with_capacity(m);
    back.push([0; NUM_LABELS]);
    for t in 1..m {
        let mut next = [f64::NEG_INFINITY; NUM_LABELS];
        let mut ptr = [0; NUM_LABELS];
        for to in DetectorLabel::ALL {
            let j = to.index();
            if !cons.allows(t, to) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for from in DetectorLabel::ALL {
                let i = from.index();
                if score[i] == f64::NEG_INFINITY || !transition_allowed(from, to) {
                    continue;
                }
                let s = score[i] + params.transitions[i][j];
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            if let Some((i, s)) = best {
                next[j] = s + em.rows[t][j];
                ptr[j] = i;
            }
        }
        score = next;
        back.push(ptr);
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, &sj) in score.iter().enumerate() {
        if sj == f64::NEG_INFINITY {
            continue;
        }
        let s = sj + params.end[j];
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    let (mut j, total) = best.ok_or(CrfError::NoValidPath)?;
    let mut path = vec![DetectorLabel::O; m];
    for t in (0..m).rev() {
        path[t] = DetectorLabel::ALL[j];
        j = back[t][j];
    }
    Ok((path, total))
}

fn forward(em: &Emissions, params: &CrfParams, cons: &Constraints) -> Vec<Row> {
    let m = em.len();
    let mut alpha = Vec::with_capacity(m);
    alpha.push(initial(em, params, cons));
    for t in 1..m {
        let prev = alpha[t - 1];
        let mut row = [f64::NEG_INFINITY; NUM_LABELS];
        for to in DetectorLabel::ALL {
            let j = to.index();
            if !cons.allows(t, to) {
                continue;
            }
            let incoming = DetectorLabel::ALL
                .iter()
                .filter(|from| transition_allowed(**from, to))
                .map(|from| prev[from.index()] + params.transitions[from.index()][j]);
            row[j] = log_sum_exp(incoming) + em.rows[t][j];
        }
        alpha.push(row);
    }
    alpha
}

fn backward(em: &Emissions, params: &CrfParams, cons: &Constraints) -> Vec<Row> {
    let m = em.len();
    let mut beta = vec![[f64::NEG_INFINITY; NUM_LABELS]; m];
    beta[m - 1] = params.end;
    for t in (0..m - 1).rev() {
        let next = beta[t + 1];
        let mut row = [f64::NEG_INFINITY; NUM_LABELS];
        for from in DetectorLabel::ALL {
            let i = from.index();
            let outgoing = DetectorLabel::ALL
                .iter()
                .filter(|to| cons.allows(t + 1, **to) && transition_allowed(from, **to))
                .map(|to| {
                    let j = to.index();
                    params.transitions[i][j] + em.rows[t + 1][j] + next[j]
                });
            row[i] = log_sum_exp(outgoing);
        }
        beta[t] = row;
    }
    beta
}

/// Log of the sum of `exp(score)` over every admissible path.
pub fn log_partition(em: &Emissions, params: &CrfParams, cons: &Constraints) -> Result<f64, CrfError> {
    cons.check_against(em)?;
    let alpha = forward(em, params, cons);
    let last = alpha[alpha.len() - 1];
    let z = log_sum_exp((0..NUM_LABELS).map(|j| last[j] + params.end[j]));
    if z == f64::NEG_INFINITY {
        return Err(CrfError::NoValidPath);
    }
    Ok(z)
}

/// Loss value plus gradients with respect to emissions and CRF parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub emissions: Emissions,
    pub params: CrfParams,
}

fn check_gold(cons: &Constraints, gold: &[DetectorLabel]) -> Result<(), CrfError> {
    if gold.len() != cons.len() {
        return Err(CrfError::LengthMismatch {
            emissions: gold.len(),
            constraints: cons.len(),
        });
    }
    for (index, &label) in gold.iter().enumerate() {
        let ok = cons.allows(index, label)
            && if index == 0 {
                start_allowed(label)
            } else {
                transition_allowed(gold[index - 1], label)
            };
        if !ok {
            return Err(CrfError::ImpossibleGold { index, label });
        }
    }
    Ok(())
}

/// Negative log-likelihood of `gold` under the constrained CRF, with
/// gradients from forward-backward marginals.
pub fn nll(
    em: &Emissions,
    params: &CrfParams,
    cons: &Constraints,
    gold: &[DetectorLabel],
) -> Result<LossGrad, CrfError> {
    cons.check_against(em)?;
    check_gold(cons, gold)?;
    let m = em.len();
    let alpha = forward(em, params, cons);
    let beta = backward(em, params, cons);
    let z = log_sum_exp((0..NUM_LABELS).map(|j| alpha[m - 1][j] + params.end[j]));
    if z == f64::NEG_INFINITY {
        return Err(CrfError::NoValidPath);
    }
    let loss = z - path_score(em, params, gold);

    let mut d_em = Emissions::zeros(m);
    let mut d = CrfParams::default();
    for t in 0..m {
        for j in 0..NUM_LABELS {
            let p = libm::exp(alpha[t][j] + beta[t][j] - z);
            d_em.rows[t][j] = p;
            if t == 0 {
                d.start[j] = p;
            }
            if t == m - 1 {
                d.end[j] = p;
            }
        }
        if t + 1 < m {
            for from in DetectorLabel::ALL {
                let i = from.index();
                if alpha[t][i] == f64::NEG_INFINITY {
                    continue;
                }
                for to in DetectorLabel::ALL {
                    let j = to.index();
                    if !cons.allows(t + 1, to) || !transition_allowed(from, to) {
                        continue;
                    }
                    d.transitions[i][j] += libm::exp(
                        alpha[t][i] + params.transitions[i][j] + em.rows[t + 1][j] + beta[t + 1][j] - z,
                    );
                }
            }
        }
    }
    for (t, &g) in gold.iter().enumerate() {
        d_em.rows[t][g.index()] -= 1.0;
        if t > 0 {
            d.transitions[gold[t - 1].index()][g.index()] -= 1.0;
        }
    }
    d.start[gold[0].index()] -= 1.0;
    d.end[gold[m - 1].index()] -= 1.0;
    Ok(LossGrad {
        loss,
        emissions: d_em,
        params: d,
    })
}

/// Per-token softmax cross-entropy over the labels each position allows.
/// Transition scores play no part; the returned parameter gradient is zero.
pub fn token_cross_entropy(
    em: &Emissions,
    cons: &Constraints,
    gold: &[DetectorLabel],
) -> Result<LossGrad, CrfError> {
    cons.check_against(em)?;
    if gold.len() != cons.len() {
        return Err(CrfError::LengthMismatch {
            emissions: gold.len(),
            constraints: cons.len(),
        });
    }
    let mut loss = 0.0;
    let mut d_em = Emissions::zeros(em.len());
    for (t, &g) in gold.iter().enumerate() {
        if !cons.allows(t, g) {
            return Err(CrfError::ImpossibleGold { index: t, label: g });
        }
        let allowed = || DetectorLabel::ALL.iter().filter(|l| cons.allows(t, **l));
        let lz = log_sum_exp(allowed().map(|l| em.rows[t][l.index()]));
        loss += lz - em.rows[t][g.index()];
        for l in allowed() {
            d_em.rows[t][l.index()] = libm::exp(em.rows[t][l.index()] - lz);
        }
        d_em.rows[t][g.index()] -= 1.0;
    }
    Ok(LossGrad {
        loss,
        emissions: d_em,
        params: CrfParams::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{validate_labels, CoordinatorSpan};
    use DetectorLabel::*;

    fn marked_gold() -> Vec<DetectorLabel> {
        // My sister likes apples , pears , [C] and [C] grapes .
        vec![O, O, O, BBefore, O, BBefore, O, O, C, O, BAfter, O]
    }

    #[test]
    fn strong_emissions_recover_gold() {
        let gold = marked_gold();
        let cons = Constraints::for_marked_target(12, TokenSpan::unit(8)).unwrap();
        let rows = gold
            .iter()
            .enumerate()
            .map(|(t, g)| {
                let mut r = [0.0; NUM_LABELS];
                for (j, v) in r.iter_mut().enumerate() {
                    *v = 0.3 * libm::sin((t * 7 + j) as f64);
                }
                r[g.index()] += 5.0;
                r
            })
            .collect();
        let (path, _) = viterbi(&Emissions::new(rows), &CrfParams::default(), &cons).unwrap();
        assert_eq!(path, gold);
    }

    #[test]
    fn zero_emissions_still_decode_valid_path() {
        let cons = Constraints::for_marked_target(12, TokenSpan::unit(8)).unwrap();
        let (path, _) = viterbi(&Emissions::zeros(12), &CrfParams::default(), &cons).unwrap();
        assert!(cons.admits(&path));
        let target = CoordinatorSpan::contiguous(TokenSpan::unit(7));
        let unmarked: Vec<_> = path
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 7 && *i != 9)
            .map(|(_, l)| *l)
            .collect();
        assert!(validate_labels(&unmarked, &target).is_valid());
        // lowest label wins ties: everything not forced is O
        assert!(path.iter().all(|l| *l == O || *l == C));
    }

    #[test]
    fn nll_vanishes_with_huge_margin() {
        let gold = marked_gold();
        let cons = Constraints::for_marked_target(12, TokenSpan::unit(8)).unwrap();
        let rows = gold
            .iter()
            .map(|g| {
                let mut r = [0.0; NUM_LABELS];
                r[g.index()] = 60.0;
                r
            })
            .collect();
        let out = nll(&Emissions::new(rows), &CrfParams::default(), &cons, &gold).unwrap();
        assert!(out.loss >= 0.0 && out.loss < 1e-12);
    }

    #[test]
    fn impossible_gold_and_bad_inputs() {
        let cons = Constraints::for_marked_target(5, TokenSpan::unit(2)).unwrap();
        let em = Emissions::zeros(5);
        let bad = [O, O, O, O, O];
        assert_eq!(
            nll(&em, &CrfParams::default(), &cons, &bad).unwrap_err(),
            CrfError::ImpossibleGold { index: 2, label: O }
        );
        assert!(Constraints::for_marked_target(5, TokenSpan::unit(4)).is_err());
        assert!(Constraints::for_marked_target(5, TokenSpan::unit(0)).is_err());
        let mut nan = Emissions::zeros(5);
        nan.rows_mut()[3][0] = f64::NAN;
        assert_eq!(
            viterbi(&nan, &CrfParams::default(), &cons).unwrap_err(),
            CrfError::NonFinite { row: 3 }
        );
        assert_eq!(
            viterbi(&Emissions::zeros(4), &CrfParams::default(), &cons).unwrap_err(),
            CrfError::LengthMismatch {
                emissions: 4,
                constraints: 5
            }
        );
    }

    #[test]
    fn token_ce_matches_manual_softmax() {
        let cons = Constraints::for_marked_target(3, TokenSpan::unit(1)).unwrap();
        let gold = [O, C, O];
        let out = token_cross_entropy(&Emissions::zeros(3), &cons, &gold).unwrap();
        // only O is allowed at the markers and only C at the target
        assert!(out.loss.abs() < 1e-15);
        let cons = Constraints::for_marked_target(4, TokenSpan::unit(2)).unwrap();
        let gold = [BBefore, O, C, O];
        let out = token_cross_entropy(&Emissions::zeros(4), &cons, &gold).unwrap();
        assert!((out.loss - libm::log(3.0)).abs() < 1e-12);
        assert!((out.emissions.rows()[0][BBefore.index()] - (1.0 / 3.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn mask_table_shape() {
        let mask = transition_mask();
        assert!(!mask[O.index()][IBefore.index()]);
        assert!(!mask[BBefore.index()][IAfter.index()]);
        assert!(mask[BBefore.index()][IBefore.index()]);
        assert_eq!(mask.iter().flatten().filter(|a| !**a).count(), 8);
    }
}
