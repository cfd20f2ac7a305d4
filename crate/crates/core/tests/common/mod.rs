//! Independent reference implementations and random generators shared by
//! the integration tests and the acceptance target.

#![allow(dead_code)]

use conjunct_core::crf::{self, Constraints, CrfParams, Emissions, NUM_LABELS};
use conjunct_core::schema::{Coordination, CoordinatorSpan, DetectorLabel, TokenSpan};
use rand::Rng;
use regex::Regex;

pub fn all_paths(m: usize) -> impl Iterator<Item = Vec<DetectorLabel>> {
    let total = NUM_LABELS.pow(m as u32);
    (0..total).map(move |mut code| {
        let mut path = vec![DetectorLabel::O; m];
        for slot in path.iter_mut().rev() {
            *slot = DetectorLabel::ALL[code % NUM_LABELS];
            code /= NUM_LABELS;
        }
        path
    })
}

/// Best admissible path by enumeration. Among equal scores the path that
/// is smallest when read from its last label backwards wins.
pub fn brute_viterbi(em: &Emissions, params: &CrfParams, cons: &Constraints) -> Option<(Vec<DetectorLabel>, f64)> {
    let mut best: Option<(Vec<DetectorLabel>, f64)> = None;
    for path in all_paths(em.len()).filter(|p| cons.admits(p)) {
        let s = crf::path_score(em, params, &path);
        let replace = match &best {
            None => true,
            Some((bp, bs)) => s > *bs || (s == *bs && reverse_key(&path) < reverse_key(bp)),
        };
        if replace {
            best = Some((path, s));
        }
    }
    best
}

fn reverse_key(path: &[DetectorLabel]) -> Vec<usize> {
    path.iter().rev().map(|l| l.index()).collect()
}

pub fn brute_log_partition(em: &Emissions, params: &CrfParams, cons: &Constraints) -> f64 {
    let scores: Vec<f64> = all_paths(em.len())
        .filter(|p| cons.admits(p))
        .map(|p| crf::path_score(em, params, &p))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

pub fn random_emissions<R: Rng>(rng: &mut R, m: usize, integer: bool) -> Emissions {
    let draw = |rng: &mut R| {
        if integer {
            rng.gen_range(-3i32..=3) as f64
        } else {
            rng.gen_range(-4.0..4.0)
        }
    };
    Emissions::new((0..m).map(|_| std::array::from_fn(|_| draw(rng))).collect())
}

pub fn random_params<R: Rng>(rng: &mut R, integer: bool) -> CrfParams {
    let mut draw = || {
        if integer {
            rng.gen_range(-2i32..=2) as f64
        } else {
            rng.gen_range(-2.0..2.0)
        }
    };
    let mut p = CrfParams::default();
    for j in 0..NUM_LABELS {
        p.start[j] = draw();
        p.end[j] = draw();
        for k in 0..NUM_LABELS {
            p.transitions[j][k] = draw();
        }
    }
    p
}

/// Target in marked coordinates for a sequence of `m >= 3` positions.
pub fn random_marked_target<R: Rng>(rng: &mut R, m: usize) -> TokenSpan {
    let start = rng.gen_range(1..m - 1);
    let end = rng.gen_range(start + 1..m);
    TokenSpan { start, end }
}

/// Like [`random_marked_target`] but leaves at least one position outside
/// the markers and the target, so more than one path is admissible.
pub fn random_free_target<R: Rng>(rng: &mut R, m: usize) -> TokenSpan {
    loop {
        let t = random_marked_target(rng, m);
        if t.start > 1 || t.end < m - 1 {
            return t;
        }
    }
}

/// Gold path admitted by the constraints, drawn uniformly among admissible
/// labels position by position with backtracking-free repair.
pub fn random_gold<R: Rng>(rng: &mut R, cons: &Constraints) -> Vec<DetectorLabel> {
    let mut path: Vec<DetectorLabel> = Vec::with_capacity(cons.len());
    for i in 0..cons.len() {
        let options: Vec<DetectorLabel> = DetectorLabel::ALL
            .into_iter()
            .filter(|&l| cons.allows(i, l))
            .filter(|&l| match path.last() {
                None => crf::start_allowed(l),
                Some(&prev) => crf::transition_allowed(prev, l),
            })
            .collect();
        path.push(options[rng.gen_range(0..options.len())]);
    }
    path
}

fn random_spans<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut i = lo;
    while i < hi {
        if rng.gen_bool(0.5) {
            let len = rng.gen_range(1..=3.min(hi - i));
            spans.push(TokenSpan { start: i, end: i + len });
            i += len;
        } else {
            i += 1;
        }
    }
    if spans.is_empty() {
        let s = rng.gen_range(lo..hi);
        let e = rng.gen_range(s + 1..=hi.min(s + 3));
        spans.push(TokenSpan { start: s, end: e });
    }
    spans
}

/// A coordination satisfying every invariant, over `n` tokens, `3 <= n`.
pub fn random_coordination<R: Rng>(rng: &mut R, n: usize) -> Coordination {
    let kind = rng.gen_range(0..3);
    if kind == 2 {
        let t = rng.gen_range(1..n);
        let target = CoordinatorSpan::respectively(TokenSpan::unit(t));
        return Coordination::new(target, random_spans(rng, 0, t));
    }
    let len = if n >= 4 && rng.gen_bool(0.3) { 2 } else { 1 };
    let start = rng.gen_range(1..n - len);
    let span = TokenSpan { start, end: start + len };
    let target = if kind == 1 && start >= 2 {
        CoordinatorSpan::paired(TokenSpan::unit(0), span).1
    } else {
        CoordinatorSpan::contiguous(span)
    };
    let lo = usize::from(target.partner.is_some());
    let mut conjuncts = random_spans(rng, lo, start);
    conjuncts.extend(random_spans(rng, span.end, n));
    Coordination::new(target, conjuncts)
}

fn label_char(l: DetectorLabel) -> char {
    match l {
        DetectorLabel::O => 'o',
        DetectorLabel::C => 'c',
        DetectorLabel::BBefore => 'b',
        DetectorLabel::IBefore => 'i',
        DetectorLabel::BAfter => 'a',
        DetectorLabel::IAfter => 'j',
    }
}

pub struct GrammarOracle {
    shape: Regex,
}

impl Default for GrammarOracle {
    fn default() -> Self {
        Self {
            shape: Regex::new("^o*(?:bi*o*)*c+o*(?:aj*o*)*$").unwrap(),
        }
    }
}

impl GrammarOracle {
    /// Membership in the label language with `C` exactly on `target`.
    pub fn accepts(&self, labels: &[DetectorLabel], target: TokenSpan) -> bool {
        let s: String = labels.iter().map(|&l| label_char(l)).collect();
        target.end <= labels.len()
            && self.shape.is_match(&s)
            && labels
                .iter()
                .enumerate()
                .all(|(i, &l)| (l == DetectorLabel::C) == target.contains(i))
    }

    pub fn has_after(&self, labels: &[DetectorLabel]) -> bool {
        labels.contains(&DetectorLabel::BAfter)
    }
}

/// Gradient check. Returns the relative error
/// `|g - fd| / max(|g| + |fd|, 1e-8)` over all coordinates as a vector.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / (na + nn).max(1e-8)
}

fn flatten(em: &Emissions, p: &CrfParams) -> Vec<f64> {
    let mut v: Vec<f64> = em.rows().iter().flatten().copied().collect();
    v.extend(p.start);
    v.extend(p.end);
    v.extend(p.transitions.iter().flatten());
    v
}

fn unflatten(v: &[f64], m: usize) -> (Emissions, CrfParams) {
    let rows = (0..m).map(|i| std::array::from_fn(|j| v[i * NUM_LABELS + j])).collect();
    let o = m * NUM_LABELS;
    let mut p = CrfParams::default();
    p.start.copy_from_slice(&v[o..o + NUM_LABELS]);
    p.end.copy_from_slice(&v[o + NUM_LABELS..o + 2 * NUM_LABELS]);
    for j in 0..NUM_LABELS {
        let b = o + (2 + j) * NUM_LABELS;
        p.transitions[j].copy_from_slice(&v[b..b + NUM_LABELS]);
    }
    (Emissions::new(rows), p)
}

/// Analytic and central-difference gradients of the CRF NLL with respect
/// to emissions and all CRF parameters, flattened.
pub fn nll_gradients(em: &Emissions, params: &CrfParams, cons: &Constraints, gold: &[DetectorLabel], h: f64) -> (Vec<f64>, Vec<f64>) {
    let out = crf::nll(em, params, cons, gold).unwrap();
    let analytic = flatten(&out.emissions, &out.params);
    let x = flatten(em, params);
    let m = em.len();
    let f = |v: &[f64]| {
        let (e, p) = unflatten(v, m);
        crf::nll(&e, &p, cons, gold).unwrap().loss
    };
    let numeric = (0..x.len())
        .map(|i| {
            let mut up = x.clone();
            up[i] += h;
            let mut down = x.clone();
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect();
    (analytic, numeric)
}
